#![no_main]

use libfuzzer_sys::fuzz_target;
use sigjeff::io::{truth_from_json, truth_to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(truth) = truth_from_json(text, 64) {
        assert_eq!(truth_from_json(&truth_to_json(&truth), 64).unwrap(), truth);
    }
});
