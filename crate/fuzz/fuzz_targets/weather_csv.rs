#![no_main]

use aquamar::weather::{load_csv, write_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(series) = load_csv(data) {
        let mut out = Vec::new();
        write_csv(&series, &mut out).expect("write parsed series");
        let again = load_csv(out.as_slice()).expect("reparse written series");
        assert_eq!(again.len(), series.len());
    }
});
