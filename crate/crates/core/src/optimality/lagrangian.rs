use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    clarke_polar_test, in_omega, limiting_normal_test, regular_normal_test, tangent_test, CCPair, MembershipReport,
    Verdict, Violation,
};
use crate::instances::rng_from;
use crate::symmat::SymMat;

use super::cone::{feasibility_deficit, normal_deficit, tangent_deficit};
use super::problem::{upper_pairs, KPart, Multipliers, ProblemSpec};

/// Printed on every report: constraint qualifications are not checked.
pub const CQ_BANNER: &str = "CQ assumed: metric subregularity is not verified";

#[derive(Clone, Debug, Serialize)]
pub struct LagrangianJet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
}

/// Weight of each scalar constraint output in `⟨(ξ, Γ¹, Γ²), Υ(x)⟩`.
fn output_weights(spec: &ProblemSpec, mult: &Multipliers) -> Vec<f64> {
    let mut w = Vec::with_capacity(spec.h.len() + spec.theta.len() * 2);
    let mat = |w: &mut Vec<f64>, m: &SymMat| {
        for (i, j) in upper_pairs(m.n()) {
            w.push(if i == j { m.get(i, j) } else { 2.0 * m.get(i, j) });
        }
    };
    for part in &mult.xi {
        match part {
            KPart::Mat(m) => mat(&mut w, m),
            KPart::Vec(v) => w.extend_from_slice(v),
        }
    }
    mat(&mut w, &mult.gamma1);
    mat(&mut w, &mult.gamma2);
    w
}

/// `L(x, ξ, Γ) = φ(x) + ⟨ξ, h(x)⟩ + ⟨Γ¹, θ(x)⟩ + ⟨Γ², ζ(x)⟩` with its exact
/// gradient and Hessian.
pub fn lagrangian_jet(spec: &ProblemSpec, x: &DVector<f64>, mult: &Multipliers) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    spec.check_point(x)?;
    spec.check_multipliers(mult)?;
    let w = output_weights(spec, mult);
    let mut value = spec.phi.value(x);
    let mut grad = spec.phi.gradient(x);
    let mut hess = spec.phi.hessian(spec.m);
    for (p, &wi) in spec.h.iter().chain(&spec.theta).chain(&spec.zeta).zip(&w) {
        if wi == 0.0 {
            continue;
        }
        value += wi * p.value(x);
        grad += p.gradient(x) * wi;
        hess += p.hessian(spec.m) * wi;
    }
    Ok((value, grad, hess))
}

pub fn jet_report(value: f64, grad: &DVector<f64>, hess: &DMatrix<f64>) -> LagrangianJet {
    LagrangianJet {
        value,
        gradient: grad.iter().copied().collect(),
        hessian: (0..hess.nrows()).map(|i| hess.row(i).iter().copied().collect()).collect(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub k_residuals: Vec<f64>,
    pub omega: MembershipReport,
    pub residual: f64,
}

/// Feasibility of `x`: distance of each `h`-factor to its cone and the
/// complementarity residual of `(θ(x), ζ(x))`.
pub fn feasibility(spec: &ProblemSpec, x: &DVector<f64>, tol: f64) -> Result<FeasibilityReport> {
    spec.check_point(x)?;
    let v = spec.eval(x);
    let mut k_residuals = Vec::new();
    for (f, a) in spec.cone.iter().zip(&v.k) {
        k_residuals.push(feasibility_deficit(f, a)?);
    }
    let omega = in_omega(&v.theta, &v.zeta, tol)?;
    let kscale = v.k.iter().map(|p| p.norm()).fold(1.0f64, f64::max);
    let kres = k_residuals.iter().map(|r| r * r).sum::<f64>().sqrt();
    let feasible = kres <= tol * kscale && omega.is_in();
    Ok(FeasibilityReport {
        feasible,
        residual: kres + omega.raw_residual,
        k_residuals,
        omega,
    })
}

pub(crate) fn require_feasible(spec: &ProblemSpec, x: &DVector<f64>, tol: f64) -> Result<(FeasibilityReport, CCPair)> {
    let rep = feasibility(spec, x, tol)?;
    if !rep.feasible {
        return Err(Error::Infeasible(format!(
            "K residuals {:?}, complementarity residual {:.3e}",
            rep.k_residuals, rep.omega.raw_residual
        )));
    }
    let v = spec.eval(x);
    let base = CCPair::from_z(&(&v.theta + &v.zeta))?;
    Ok((rep, base))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// Polar of the Clarke tangent cone.
    C,
    /// Polar of the tangent cone.
    Regular,
    /// Sampled outer approximation of the limiting normal cone.
    Limiting,
}

impl std::str::FromStr for Flavor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c" | "clarke" => Ok(Flavor::C),
            "regular" => Ok(Flavor::Regular),
            "limiting" => Ok(Flavor::Limiting),
            other => Err(Error::Invalid(format!("unknown multiplier flavor {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StationarityOptions {
    pub tol: f64,
    pub seed: u64,
    /// Random bases tried by the limiting flavor.
    pub samples: usize,
}

impl Default for StationarityOptions {
    fn default() -> Self {
        StationarityOptions {
            tol: 1e-8,
            seed: crate::instances::DEFAULT_SEED,
            samples: 16,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StationarityReport {
    pub flavor: Flavor,
    pub verdict: Verdict,
    /// `‖∇ₓL‖ + Σ K-normal deficits + Ω-normal deficit`.
    pub residual: f64,
    pub gradient_norm: f64,
    pub k_deficits: Vec<f64>,
    pub omega: MembershipReport,
    pub feasibility: FeasibilityReport,
    pub sampled: bool,
    pub banner: &'static str,
}

/// Residual of the multiplier system `∇ₓL = 0`, `ξ ∈ N_K(h(x))`,
/// `(Γ¹, Γ²) ∈ N(θ(x), ζ(x))` for the chosen normal cone.
pub fn stationarity_residual(
    spec: &ProblemSpec,
    x: &DVector<f64>,
    mult: &Multipliers,
    flavor: Flavor,
    opts: &StationarityOptions,
) -> Result<StationarityReport> {
    let (_, grad, _) = lagrangian_jet(spec, x, mult)?;
    let (feas, base) = require_feasible(spec, x, opts.tol)?;
    let v = spec.eval(x);
    let mut k_deficits = Vec::new();
    for ((f, a), xi) in spec.cone.iter().zip(&v.k).zip(&mult.xi) {
        k_deficits.push(normal_deficit(f, a, xi)?);
    }
    let (g1, g2) = (&mult.gamma1, &mult.gamma2);
    let omega = match flavor {
        Flavor::C => clarke_polar_test(&base, g1, g2, opts.tol)?,
        Flavor::Regular => regular_normal_test(&base, g1, g2, opts.tol)?,
        Flavor::Limiting => {
            let mut rng = rng_from(opts.seed);
            limiting_normal_test(&base, g1, g2, opts.tol, &mut rng, opts.samples)?
        }
    };
    let gradient_norm = grad.norm();
    let residual = gradient_norm + k_deficits.iter().sum::<f64>() + omega.raw_residual;
    Ok(StationarityReport {
        flavor,
        verdict: Verdict::classify(residual, opts.tol),
        residual,
        gradient_norm,
        k_deficits,
        omega,
        feasibility: feas,
        sampled: flavor == Flavor::Limiting,
        banner: CQ_BANNER,
    })
}

/// Membership of `d` in `C(x) = {d : φ′(x)d ≤ 0, Υ′(x)d ∈ T_{K×Ω}(Υ(x))}`.
pub fn critical_cone_test(spec: &ProblemSpec, x: &DVector<f64>, d: &DVector<f64>, tol: f64) -> Result<MembershipReport> {
    spec.check_point(d)?;
    let (_, base) = require_feasible(spec, x, tol)?;
    critical_cone_at(spec, x, &base, d, tol)
}

pub(crate) fn critical_cone_at(
    spec: &ProblemSpec,
    x: &DVector<f64>,
    base: &CCPair,
    d: &DVector<f64>,
    tol: f64,
) -> Result<MembershipReport> {
    let v = spec.eval(x);
    let dv = spec.deriv(x, d);
    let gphi = spec.phi.gradient(x);
    let slope = gphi.dot(d);
    let mut parts = vec![Violation {
        block: "φ".into(),
        constraint: "φ′(x)d ≤ 0".into(),
        magnitude: slope.max(0.0),
    }];
    for (i, ((f, a), dk)) in spec.cone.iter().zip(&v.k).zip(&dv.k).enumerate() {
        parts.push(Violation {
            block: format!("K[{i}]"),
            constraint: "h′(x)d ∈ T_K".into(),
            magnitude: tangent_deficit(f, a, dk)?,
        });
    }
    let om = tangent_test(base, &dv.theta, &dv.zeta, tol)?;
    parts.push(Violation {
        block: "Ω".into(),
        constraint: "Θ′(x)d ∈ T_Ω".into(),
        magnitude: om.raw_residual,
    });
    let scale = spec.flatten(&dv).norm().max(gphi.norm() * d.norm());
    Ok(MembershipReport::from_parts(parts, scale, tol, om.warnings))
}
