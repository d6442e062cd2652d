#![no_main]

use aquamar::history::{load_csv, write_csv};
use aquamar::validate::validate_frame;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(frame) = load_csv(data) {
        let _ = validate_frame(&frame);
        let mut out = Vec::new();
        write_csv(&frame, &mut out).expect("write parsed frame");
        let again = load_csv(out.as_slice()).expect("reparse written frame");
        assert_eq!(again.len(), frame.len());
    }
});
