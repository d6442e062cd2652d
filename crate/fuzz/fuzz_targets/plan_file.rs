#![no_main]

use aquamar::planner::{parse_plans, write_plans};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(plans) = parse_plans(s) {
        let mut out = Vec::new();
        write_plans(&plans, &mut out).expect("write plans");
        let again = parse_plans(std::str::from_utf8(&out).unwrap()).expect("reparse plans");
        assert_eq!(again, plans);
    }
});
