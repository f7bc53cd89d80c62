#![no_main]

use jtiv::io::parse_manifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = parse_manifest(data) {
        // accepted manifests are internally consistent
        assert!(m.validate().is_ok());
        assert!(m.views.iter().all(|v| v.observed.iter().all(|&i| i < m.n)));
    }
});
