#![no_main]

use aquamar::weather::load_forecast_json;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(series) = load_forecast_json(s) {
            assert!(series.precip_mm.iter().all(|p| *p >= 0.0));
        }
    }
});
