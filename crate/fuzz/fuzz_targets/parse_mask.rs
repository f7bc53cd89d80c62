#![no_main]

use jtiv::io::parse_mask;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(mask) = parse_mask(data) {
        let n = mask.observed().iter().flatten().max().map_or(0, |&i| i + 1);
        let _ = mask.validate(n);
    }
});
