#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = sdcc::io::parse_problem(text) else { return };
    // a validated spec must evaluate without panicking
    if spec.m <= 64 && spec.n <= 16 {
        let x = nalgebra::DVector::zeros(spec.m);
        let _ = spec.eval(&x);
        let _ = spec.jacobian(&x);
    }
});
