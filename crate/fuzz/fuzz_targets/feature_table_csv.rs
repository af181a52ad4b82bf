#![no_main]

use libfuzzer_sys::fuzz_target;
use offloadlab::features::{Feature, FeatureTable};

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = FeatureTable::from_csv_reader(data) {
        if let Ok(rows) = table.project(&Feature::PRIMARY) {
            assert_eq!(rows.len(), table.rows.len());
        }
    }
});
