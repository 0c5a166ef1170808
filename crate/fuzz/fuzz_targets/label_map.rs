#![no_main]

use libfuzzer_sys::fuzz_target;
use sigjeff::io::LabelMap;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let (spec, probe) = text.split_once('\n').unwrap_or((text, ""));
    if let Ok(map) = spec.parse::<LabelMap>() {
        let _ = map.class_of(probe);
    }
});
