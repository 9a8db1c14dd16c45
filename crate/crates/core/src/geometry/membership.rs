use std::ops::Range;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lowner::lowner_dir1;
use crate::projpsd::{proj_dir1_spec, proj_nsd, proj_psd};
use crate::scalarfun::MinZero;
use crate::spectral::{block, Spectral};
use crate::symmat::{pair_norm, SymMat};

/// Default membership tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    In,
    Borderline,
    Out,
}

impl Verdict {
    /// `in` up to `tol`, `borderline` up to `10·tol`, `out` beyond.
    pub fn classify(residual: f64, tol: f64) -> Verdict {
        if residual <= tol {
            Verdict::In
        } else if residual <= 10.0 * tol {
            Verdict::Borderline
        } else {
            Verdict::Out
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub block: String,
    pub constraint: String,
    pub magnitude: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MembershipReport {
    pub verdict: Verdict,
    /// Raw residual divided by `scale`; compared against `tol`.
    pub residual: f64,
    pub raw_residual: f64,
    pub scale: f64,
    pub tol: f64,
    /// Blocks whose own contribution exceeds the threshold, largest first.
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl MembershipReport {
    /// Builds a report from per-block contributions. The raw residual is the
    /// root sum of squares of all contributions.
    pub fn from_parts(parts: Vec<Violation>, scale: f64, tol: f64, warnings: Vec<String>) -> Self {
        let raw = parts.iter().map(|v| v.magnitude * v.magnitude).sum::<f64>().sqrt();
        let scale = scale.max(1.0);
        let residual = raw / scale;
        let thr = tol * scale;
        let mut violations: Vec<Violation> = parts.into_iter().filter(|v| v.magnitude > thr).collect();
        violations.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
        MembershipReport {
            verdict: Verdict::classify(residual, tol),
            residual,
            raw_residual: raw,
            scale,
            tol,
            violations,
            warnings,
        }
    }

    pub fn is_in(&self) -> bool {
        self.verdict == Verdict::In
    }

    pub fn is_out(&self) -> bool {
        self.verdict == Verdict::Out
    }
}

pub(crate) fn violation(block: impl Into<String>, constraint: impl Into<String>, magnitude: f64) -> Violation {
    Violation {
        block: block.into(),
        constraint: constraint.into(),
        magnitude,
    }
}

/// Index groups `α, β, γ` of a decomposition with their names.
pub(crate) fn groups(spec: &Spectral) -> [(&'static str, Range<usize>); 3] {
    [("α", spec.alpha()), ("β", spec.beta()), ("γ", spec.gamma())]
}

/// Frobenius contribution of the `(rows, cols)` block of a symmetric matrix,
/// counting the mirrored block when off-diagonal.
pub(crate) fn sym_block_norm(m: &DMatrix<f64>, rows: Range<usize>, cols: Range<usize>) -> f64 {
    let w = if rows == cols { 1.0 } else { 2f64.sqrt() };
    w * block(m, rows, cols).norm()
}

/// Per-group contributions of a symmetric matrix given in the rotated basis.
pub(crate) fn group_parts(spec: &Spectral, m: &DMatrix<f64>, constraint: &str) -> Vec<Violation> {
    let g = groups(spec);
    let mut out = Vec::new();
    for i in 0..3 {
        for j in i..3 {
            if g[i].1.is_empty() || g[j].1.is_empty() {
                continue;
            }
            let mag = sym_block_norm(m, g[i].1.clone(), g[j].1.clone());
            out.push(violation(format!("{}{}", g[i].0, g[j].0), constraint, mag));
        }
    }
    out
}

/// A point of `Ω` with the decomposition of `Z = X + Y`.
#[derive(Clone, Debug)]
pub struct CCPair {
    x: SymMat,
    y: SymMat,
    z: SymMat,
    spec: Spectral,
}

impl CCPair {
    /// Validates membership with [`DEFAULT_TOL`].
    pub fn new(x: SymMat, y: SymMat) -> Result<Self> {
        let rep = in_omega(&x, &y, DEFAULT_TOL)?;
        if rep.verdict != Verdict::In {
            return Err(Error::Infeasible(format!(
                "(X, Y) is not in the complementarity set (relative residual {:.3e})",
                rep.residual
            )));
        }
        let z = &x + &y;
        let spec = Spectral::new(&z)?;
        Ok(CCPair { x, y, z, spec })
    }

    /// `(Π₊(Z), Π₋(Z))`, which always lies in `Ω`.
    pub fn from_z(z: &SymMat) -> Result<Self> {
        let spec = Spectral::new(z)?;
        let x = proj_psd(z)?;
        let y = z - &x;
        Ok(CCPair {
            x,
            y,
            z: z.clone(),
            spec,
        })
    }

    pub fn x(&self) -> &SymMat {
        &self.x
    }

    pub fn y(&self) -> &SymMat {
        &self.y
    }

    pub fn z(&self) -> &SymMat {
        &self.z
    }

    pub fn spec(&self) -> &Spectral {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }
}

pub(crate) fn check_dims(n: usize, mats: &[(&str, &SymMat)]) -> Result<()> {
    for (name, m) in mats {
        if m.n() != n {
            return Err(Error::Dimension(format!("{name} is {0}x{0}, expected {n}x{n}", m.n())));
        }
    }
    Ok(())
}

/// Membership of `(X, Y)` in `Ω` through `X = Π₊(X + Y)`.
pub fn in_omega(x: &SymMat, y: &SymMat, tol: f64) -> Result<MembershipReport> {
    check_dims(x.n(), &[("Y", y)])?;
    let z = x + y;
    let px = proj_psd(&z)?;
    let d = x - &px;
    let parts = vec![violation("all", "X = Π₊(X+Y)", d.frob())];
    let scale = pair_norm(x, y);
    let mut warnings = Vec::new();
    let neg_x = proj_nsd(x)?.frob();
    let pos_y = proj_psd(y)?.frob();
    let xy = x.inner(y).abs();
    if neg_x > tol * scale.max(1.0) {
        warnings.push(format!("X has negative part of norm {neg_x:.3e}"));
    }
    if pos_y > tol * scale.max(1.0) {
        warnings.push(format!("Y has positive part of norm {pos_y:.3e}"));
    }
    if xy > tol * scale.max(1.0).powi(2) {
        warnings.push(format!("<X, Y> = {xy:.3e}"));
    }
    Ok(MembershipReport::from_parts(parts, scale, tol, warnings))
}

/// Membership of `(F, G)` in `T_Ω(X, Y)` through `Π′(X + Y; F + G) = F`.
pub fn tangent_test(base: &CCPair, f: &SymMat, g: &SymMat, tol: f64) -> Result<MembershipReport> {
    check_dims(base.n(), &[("F", f), ("G", g)])?;
    let spec = base.spec();
    let h = f + g;
    let fp = proj_dir1_spec(spec, &h)?;
    let d = spec.rotate(&(&fp - f));
    let parts = group_parts(spec, &d, "F = Π′(Z; F+G)");
    let mut warnings = spec.warnings().to_vec();
    let gm = lowner_dir1(spec, &MinZero, &h)?;
    let cross = (&(&gm + &fp) - &h).frob();
    if cross > 1e-10 * h.frob().max(1.0) {
        warnings.push(format!("Π₊′ + Π₋′ differs from the identity by {cross:.3e}"));
    }
    Ok(MembershipReport::from_parts(parts, pair_norm(f, g), tol, warnings))
}
