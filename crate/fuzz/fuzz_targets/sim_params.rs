#![no_main]

use aquamar::{SimParams, SimState};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = SimParams::from_kv(s) {
        assert_eq!(SimParams::from_kv(&p.to_kv()).expect("reparse"), p);
    }
    let _ = SimState::from_kv(s);
});
