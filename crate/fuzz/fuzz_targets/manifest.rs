#![no_main]

use libfuzzer_sys::fuzz_target;
use sigjeff::pipeline::Manifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = Manifest::from_json(text) {
        let again = Manifest::from_json(&m.to_json()).expect("serialized manifest parses");
        assert_eq!(again.analysis, m.analysis);
        assert_eq!(again.input, m.input);
    }
});
