#![no_main]

use aquamar::forecast::{load, save};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(models) = load(data) {
        let bytes = save(&models).expect("save loaded model");
        assert_eq!(load(&bytes).expect("reload"), models);
    }
});
