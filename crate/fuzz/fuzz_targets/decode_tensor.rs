#![no_main]

use jtiv::io::{decode_tensor, encode_tensor};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = decode_tensor(data) {
        let again = decode_tensor(&encode_tensor(&t)).expect("re-encoded tensor decodes");
        assert_eq!(again.dims(), t.dims());
        let bits = |x: &[f64]| x.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(again.as_slice()), bits(t.as_slice()));
    }
});
