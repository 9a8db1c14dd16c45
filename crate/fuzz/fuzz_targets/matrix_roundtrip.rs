#![no_main]

use libfuzzer_sys::fuzz_target;
use sdcc::io::{parse_matrix, to_json};
use sdcc::SymMat;

fuzz_target!(|data: (u8, Vec<f64>)| {
    let (n, vals) = data;
    let n = (n % 8) as usize;
    if vals.len() < n * n || vals.iter().any(|v| !v.is_finite()) {
        return;
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i <= j { vals[i * n + j] } else { vals[j * n + i] }).collect())
        .collect();
    let m = SymMat::from_rows(&rows).unwrap();
    let back = parse_matrix(&to_json(&m)).unwrap();
    assert_eq!(back, m);
});
