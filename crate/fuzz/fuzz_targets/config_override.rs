#![no_main]

use libfuzzer_sys::fuzz_target;
use offloadlab_cli::config::apply_override;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let mut table = toml::Table::new();
        for line in text.lines() {
            let _ = apply_override(&mut table, line);
        }
    }
});
