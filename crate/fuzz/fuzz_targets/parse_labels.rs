#![no_main]

use jtiv::io::{encode_labels, parse_labels};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(labels) = parse_labels(data) {
        assert!(!labels.is_empty());
        assert_eq!(parse_labels(&encode_labels(&labels)).expect("re-encoded labels parse"), labels);
    }
});
