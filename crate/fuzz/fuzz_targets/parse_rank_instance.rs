#![no_main]

use libfuzzer_sys::fuzz_target;
use sdcc::rank::{build_mpec, RankInstance};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(inst) = sdcc::io::parse::<RankInstance>(text, "rank instance") {
        if inst.n <= 8 && build_mpec(&inst).is_ok() {
            let _ = inst.warnings();
        }
    }
});
