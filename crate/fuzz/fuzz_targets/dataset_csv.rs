#![no_main]

use libfuzzer_sys::fuzz_target;
use offloadlab::features::Dataset;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = Dataset::from_csv_reader(data) {
        // whatever parses must write back out and parse to the same thing
        let mut out = Vec::new();
        ds.write_csv(&mut out).expect("write");
        let again = Dataset::from_csv_reader(out.as_slice()).expect("reparse");
        assert_eq!(ds, again);
    }
});
