#![no_main]

use jtiv::io::{encode_trace, parse_trace};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(trace) = parse_trace(data) {
        let again = parse_trace(&encode_trace(&trace)).expect("re-encoded trace parses");
        assert_eq!(again.len(), trace.len());
    }
});
