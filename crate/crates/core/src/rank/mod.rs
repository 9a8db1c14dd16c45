//! Rank-regularized problems `min ϑ(X) + rank(X)` recast over `S₊ⁿ × Ω`:
//! `min ϑ(X) + tr(W)` s.t. `W ∈ S₊ⁿ`, `(X, W − I) ∈ Ω`.
//!
//! The decision vector is `(svec X, svec W)` where `svec` scales
//! off-diagonal entries by `√2`, so Euclidean norms and inner products on
//! `ℝ^{n(n+1)}` are the Frobenius ones.

mod example;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{in_omega, sigma_table, MembershipReport};
use crate::optimality::{upper_pairs, ConeFactor, KPart, Multipliers, Poly2, ProblemSpec};
use crate::spectral::{eig_sorted, Spectral};
use crate::symmat::SymMat;

pub use example::{example1, Clause, ExampleReport, ExampleSetup, GridRow};

pub fn upper_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn coeff(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        std::f64::consts::FRAC_1_SQRT_2
    }
}

/// Upper-triangular entries in row-major order, off-diagonals times `√2`.
pub fn svec(a: &SymMat) -> Vec<f64> {
    upper_pairs(a.n()).into_iter().map(|(i, j)| a.get(i, j) / coeff(i, j)).collect()
}

pub fn smat(v: &[f64], n: usize) -> Result<SymMat> {
    if v.len() != upper_len(n) {
        return Err(Error::Dimension(format!("svec of length {} for n = {n}", v.len())));
    }
    let mut m = SymMat::zeros(n);
    for (k, (i, j)) in upper_pairs(n).into_iter().enumerate() {
        m.set(i, j, v[k] * coeff(i, j));
    }
    Ok(m)
}

pub fn mpec_point(x: &SymMat, w: &SymMat) -> DVector<f64> {
    DVector::from_iterator(2 * upper_len(x.n()), svec(x).into_iter().chain(svec(w)))
}

pub fn split_point(p: &DVector<f64>, n: usize) -> Result<(SymMat, SymMat)> {
    let len = upper_len(n);
    if p.len() != 2 * len {
        return Err(Error::Dimension(format!("point of length {} for n = {n}", p.len())));
    }
    Ok((smat(&p.as_slice()[..len], n)?, smat(&p.as_slice()[len..], n)?))
}

/// `ϑ` as a quadratic in the raw upper-triangular entries `X_ij`, `i ≤ j`,
/// row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankInstance {
    pub n: usize,
    pub loss: Poly2,
}

impl RankInstance {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Invalid("n must be positive".into()));
        }
        self.loss.check(upper_len(self.n), "loss")
    }

    fn entries(&self, x: &SymMat) -> DVector<f64> {
        DVector::from_iterator(upper_len(self.n), upper_pairs(self.n).into_iter().map(|(i, j)| x.get(i, j)))
    }

    pub fn loss_value(&self, x: &SymMat) -> f64 {
        self.loss.value(&self.entries(x))
    }

    /// Frobenius gradient of `ϑ`.
    pub fn loss_gradient(&self, x: &SymMat) -> SymMat {
        let g = self.loss.gradient(&self.entries(x));
        let mut out = SymMat::zeros(self.n);
        for (k, (i, j)) in upper_pairs(self.n).into_iter().enumerate() {
            out.set(i, j, if i == j { g[k] } else { 0.5 * g[k] });
        }
        out
    }

    /// The loss is meant to be nonnegative; this is only checked here.
    pub fn warnings(&self) -> Vec<String> {
        let len = upper_len(self.n);
        let q = self.loss.hessian(len);
        let Ok((_, ev)) = eig_sorted(&q) else {
            return vec!["could not inspect the loss Hessian".into()];
        };
        let scale = ev.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if ev.last().is_some_and(|&v| v < -1e-12 * scale) {
            return vec!["loss is unbounded below (indefinite quadratic)".into()];
        }
        let lin = if self.loss.lin.is_empty() {
            DVector::zeros(len)
        } else {
            DVector::from_column_slice(&self.loss.lin)
        };
        let Ok(pinv) = q.clone().pseudo_inverse(1e-12 * scale) else {
            return vec!["could not inspect the loss Hessian".into()];
        };
        let u = -(&pinv * &lin);
        if (&q * &u + &lin).norm() > 1e-9 * lin.norm().max(1.0) {
            return vec!["loss is unbounded below (linear term outside the Hessian range)".into()];
        }
        let min = self.loss.value(&u);
        if min < -1e-12 {
            vec![format!("loss takes negative values (minimum {min:.6e})")]
        } else {
            Vec::new()
        }
    }
}

/// The MPEC over `x = (svec X, svec W)`, `m = n(n+1)`, `K = S₊ⁿ`,
/// `h = W`, `θ = X`, `ζ = W − I`.
pub fn build_mpec(inst: &RankInstance) -> Result<ProblemSpec> {
    inst.validate()?;
    let n = inst.n;
    let len = upper_len(n);
    let m = 2 * len;
    let pairs = upper_pairs(n);
    let scale: Vec<f64> = pairs.iter().map(|&(i, j)| coeff(i, j)).collect();
    let mut lin = vec![0.0; m];
    if !inst.loss.lin.is_empty() {
        for k in 0..len {
            lin[k] = inst.loss.lin[k] * scale[k];
        }
    }
    for (k, &(i, j)) in pairs.iter().enumerate() {
        if i == j {
            lin[len + k] = 1.0;
        }
    }
    let quad = if inst.loss.quad.is_empty() {
        Vec::new()
    } else {
        let q = inst.loss.hessian(len);
        (0..m)
            .map(|a| (0..m).map(|b| if a < len && b < len { scale[a] * q[(a, b)] * scale[b] } else { 0.0 }).collect())
            .collect()
    };
    let unit = |k: usize, c: f64| {
        let mut v = vec![0.0; m];
        v[k] = c;
        v
    };
    let h = (0..len).map(|k| Poly2::linear(0.0, unit(len + k, scale[k]))).collect();
    let theta = (0..len).map(|k| Poly2::linear(0.0, unit(k, scale[k]))).collect();
    let zeta = pairs
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| Poly2::linear(if i == j { -1.0 } else { 0.0 }, unit(len + k, scale[k])))
        .collect();
    Ok(ProblemSpec {
        m,
        n,
        cone: vec![ConeFactor::Psd { dim: n }],
        phi: Poly2 {
            c: inst.loss.c,
            lin,
            quad,
        },
        h,
        theta,
        zeta,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Lift {
    /// `X*` truncated to its numerical rank.
    pub x: SymMat,
    /// Projector onto the top-`rank` eigenspace of `X*`.
    pub w: SymMat,
    pub rank: usize,
    pub rank_tol: f64,
    /// Membership of `(X, W − I)` in `Ω`.
    pub omega: MembershipReport,
    pub warnings: Vec<String>,
}

impl Lift {
    pub fn point(&self) -> DVector<f64> {
        mpec_point(&self.x, &self.w)
    }
}

/// `W* = P₁P₁ᵀ` over the eigenvectors of `X*` with eigenvalue above
/// `rank_tol` (default `1e−8‖X*‖₂`).
pub fn lift_point(x_star: &SymMat, rank_tol: Option<f64>) -> Result<Lift> {
    let spec = Spectral::new(x_star)?;
    let lam = spec.lambda();
    let norm2 = lam.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = rank_tol.unwrap_or(1e-8 * norm2);
    if !(tol >= 0.0) {
        return Err(Error::Invalid(format!("rank tolerance {tol} must be nonnegative")));
    }
    let floor = tol.max(1e-12 * norm2.max(1.0));
    if let Some(&low) = lam.last() {
        if low < -floor {
            return Err(Error::Infeasible(format!("X* has eigenvalue {low:.6e} < 0")));
        }
    }
    let rank = lam.iter().filter(|&&v| v > tol).count();
    let mut warnings = Vec::new();
    if tol > 0.0 {
        for &v in lam {
            if v.abs() > tol / 10.0 && v.abs() < tol * 10.0 {
                warnings.push(format!("eigenvalue {v:.6e} is within a factor 10 of the rank tolerance {tol:.6e}"));
            }
        }
    }
    let p1 = spec.p().columns(0, rank).into_owned();
    let lam1 = DMatrix::from_diagonal(&DVector::from_column_slice(&lam[..rank]));
    let x = SymMat::symmetrize(&p1 * lam1 * p1.transpose());
    let dropped = (x.mat() - x_star.mat()).norm();
    if dropped > 0.0 {
        warnings.push(format!("X* truncated to rank {rank} (change {dropped:.3e})"));
    }
    let w = SymMat::symmetrize(&p1 * p1.transpose());
    let y = &w - &SymMat::identity(x_star.n());
    let omega = in_omega(&x, &y, 1e-10)?;
    Ok(Lift {
        x,
        w,
        rank,
        rank_tol: tol,
        omega,
        warnings,
    })
}

/// The multipliers forced by `∇ₓL = 0` at a lifted point:
/// `Γ¹ = −∇ϑ(X*)`, `ξ = W* − I`, `Γ² = −W*`.
pub fn lift_multipliers(inst: &RankInstance, lift: &Lift) -> Multipliers {
    let id = SymMat::identity(inst.n);
    Multipliers {
        xi: vec![KPart::Mat(&lift.w - &id)],
        gamma1: inst.loss_gradient(&lift.x).scale(-1.0),
        gamma2: lift.w.scale(-1.0),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SrcqReport {
    /// Dimension of the candidate subspace of `(H, F, G)`.
    pub unknowns: usize,
    pub rank: usize,
    /// Only `(0, 0, 0)` survives.
    pub holds: bool,
}

fn sym_unit(p: &DMatrix<f64>, i: usize, j: usize) -> DMatrix<f64> {
    let n = p.nrows();
    let mut e = DMatrix::zeros(n, n);
    if i == j {
        e[(i, i)] = 1.0;
    } else {
        e[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
        e[(j, i)] = std::f64::consts::FRAC_1_SQRT_2;
    }
    p * e * p.transpose()
}

/// The block argument for the constraint qualification at a lifted point:
/// `(H, F, G)` in the span of the Clarke normal cone of `S₊ⁿ × Ω` with
/// `F = 0` and `G + H = 0` must vanish. The span is assembled from block
/// patterns in the eigenbasis of `Z = X* + W* − I` and the injectivity of
/// `(H, F, G) ↦ (F, G + H)` on it is decided by a rank computation.
pub fn srcq_check(lift: &Lift) -> Result<SrcqReport> {
    let n = lift.x.n();
    let z = &lift.x + &(&lift.w - &SymMat::identity(n));
    let spec = Spectral::new(&z)?;
    let p = spec.p();
    let (al, be, ga) = (spec.alpha(), spec.beta(), spec.gamma());
    let sig = sigma_table(&spec);
    let tol = spec.cluster_tol();
    let lam = spec.lambda();
    // γ' = kernel of W*, i.e. eigenvalue −1 of Z.
    let gp: Vec<usize> = ga.clone().filter(|&i| (lam[i] + 1.0).abs() <= tol).collect();
    let len = upper_len(n);
    let flat = |m: &DMatrix<f64>| svec(&SymMat::symmetrize(m.clone()));
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut push = |h: Option<&DMatrix<f64>>, f: Option<&DMatrix<f64>>, g: Option<&DMatrix<f64>>| {
        let mut c = vec![0.0; 3 * len];
        for (slot, m) in [h, f, g].into_iter().enumerate() {
            if let Some(m) = m {
                c[slot * len..(slot + 1) * len].copy_from_slice(&flat(m));
            }
        }
        cols.push(c);
    };
    for (a, &i) in gp.iter().enumerate() {
        for &j in &gp[a..] {
            push(Some(&sym_unit(p, i, j)), None, None);
        }
    }
    let group = |i: usize| {
        if al.contains(&i) {
            0
        } else if be.contains(&i) {
            1
        } else {
            2
        }
    };
    for i in 0..n {
        for j in i..n {
            let e = sym_unit(p, i, j);
            match (group(i), group(j)) {
                (0, 0) | (0, 1) => push(None, None, Some(&e)),
                (1, 1) => {
                    push(None, Some(&e), None);
                    push(None, None, Some(&e));
                }
                (0, 2) => {
                    let s = sig[(i - al.start, j - ga.start)];
                    push(None, Some(&(&e * (1.0 - s))), Some(&(&e * -s)));
                }
                _ => push(None, Some(&e), None),
            }
        }
    }
    let k = cols.len();
    // (H, F, G) ↦ (F, G + H)
    let image = DMatrix::from_fn(2 * len, k, |r, c| {
        let col = &cols[c];
        if r < len {
            col[len + r]
        } else {
            col[r - len] + col[2 * len + r - len]
        }
    });
    let rank = if k == 0 {
        0
    } else {
        let sv = image.singular_values();
        let top = sv.max();
        sv.iter().filter(|&&s| s > 1e-10 * top.max(1.0)).count()
    };
    Ok(SrcqReport {
        unknowns: k,
        rank,
        holds: rank == k,
    })
}
