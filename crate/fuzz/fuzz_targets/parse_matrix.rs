#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = sdcc::io::parse_matrix(text) {
            // accepted matrices are symmetric and finite
            assert!(m.mat().iter().all(|v| v.is_finite()));
            assert!(sdcc::symmat::asymmetry(m.mat()) == 0.0);
        }
    }
});
