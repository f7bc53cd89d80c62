#![no_main]

use jtiv::io::{decode_matrix, encode_matrix};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = decode_matrix(data) {
        let again = decode_matrix(&encode_matrix(&m)).expect("re-encoded matrix decodes");
        assert_eq!(again.shape(), m.shape());
        assert!(again.iter().zip(m.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
});
