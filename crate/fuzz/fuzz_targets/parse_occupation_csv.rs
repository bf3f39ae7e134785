#![no_main]

use apla::simulate::read_occupation_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(rows) = read_occupation_csv(s) {
            assert!(rows.iter().all(|(_, f)| (0.0..=1.0).contains(f)));
        }
    }
});
