#![no_main]

use libfuzzer_sys::fuzz_target;
use sigjeff::io::{parse_label_file, parse_labeled_csv, parse_table, LabelMap};

fuzz_target!(|data: &[u8]| {
    let map = LabelMap::default();
    if let Ok(m) = parse_labeled_csv(data, "label", &map) {
        assert_eq!(m.n(), m.n1() + m.n2());
        assert!(m.values().iter().all(|x| x.is_finite()));
    }
    if let Ok(t) = parse_table(data, None) {
        assert!(t.rows.iter().all(|r| r.len() == t.names.len()));
    }
    let _ = parse_label_file(data);
});
