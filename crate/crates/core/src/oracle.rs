//! Finite-difference oracles for Löwner operators, evaluated from raw
//! eigendecompositions without clustering so they share no code path with
//! the derivative formulas they check.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::scalarfun::ScalarFun;
use crate::spectral::eig_sorted;
use crate::symmat::SymMat;

/// `P Diag(f(λ)) Pᵀ` from an unclustered decomposition.
pub fn lowner_raw(f: &dyn ScalarFun, a: &SymMat) -> Result<SymMat> {
    let (p, lam) = eig_sorted(a.mat())?;
    let d: Vec<f64> = lam.into_iter().map(|t| f.eval(t)).collect();
    Ok(SymMat::symmetrize(&p * DMatrix::from_diagonal(&DVector::from_vec(d)) * p.transpose()))
}

/// `(𝓕(Z + tH) − 𝓕(Z)) / t`.
pub fn fd_dir1(f: &dyn ScalarFun, z: &SymMat, h: &SymMat, t: f64) -> Result<SymMat> {
    let fz = lowner_raw(f, z)?;
    let ft = lowner_raw(f, &(z + &(h * t)))?;
    Ok(&(&ft - &fz) * (1.0 / t))
}

/// `2/t² (𝓕(Z + tH + t²W/2) − 𝓕(Z) − t·dir1)`.
pub fn fd_dir2(
    f: &dyn ScalarFun,
    z: &SymMat,
    h: &SymMat,
    w: &SymMat,
    dir1: &SymMat,
    t: f64,
) -> Result<SymMat> {
    let fz = lowner_raw(f, z)?;
    let arg = z + &(&(h * t) + &(w * (0.5 * t * t)));
    let ft = lowner_raw(f, &arg)?;
    Ok(&(&(&ft - &fz) - &(dir1 * t)) * (2.0 / (t * t)))
}

/// Residuals `‖fd(t) − d‖_F` along a step ladder.
pub fn residual_ladder(
    ladder: &[f64],
    mut fd: impl FnMut(f64) -> Result<SymMat>,
    d: &SymMat,
) -> Result<Vec<f64>> {
    ladder.iter().map(|&t| Ok((&fd(t)? - d).frob())).collect()
}

/// Roundoff level of a second-order difference quotient at step `t` for an
/// argument of Frobenius norm `scale`.
pub fn dir2_roundoff(scale: f64, t: f64) -> f64 {
    100.0 * f64::EPSILON * (1.0 + scale) / (t * t)
}

/// True when each residual is at most `ratio` times its predecessor, with
/// residuals under the matching `floor` treated as converged.
pub fn decays(res: &[f64], ratio: f64, floor: &[f64]) -> bool {
    (1..res.len()).all(|i| res[i] <= floor[i] || res[i] <= ratio * res[i - 1])
}
