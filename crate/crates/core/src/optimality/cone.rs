//! Closed-form pieces for the factors of `K`.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::geometry::{sigma_tangent2_psd, SigmaValue};
use crate::projpsd::nsd_part;
use crate::spectral::{block, Spectral};
use crate::symmat::SymMat;

use super::problem::{ConeFactor, KPart};

fn kernel(a: &SymMat) -> Result<DMatrix<f64>> {
    let spec = Spectral::new(a)?;
    Ok(block(spec.p(), 0..spec.n(), spec.beta()))
}

fn active(a: &[f64]) -> Vec<bool> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    a.iter().map(|&v| v <= 1e-8 * scale).collect()
}

fn vnorm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Distance from `a` to the factor.
pub fn feasibility_deficit(f: &ConeFactor, a: &KPart) -> Result<f64> {
    Ok(match (f, a) {
        (ConeFactor::Psd { .. }, KPart::Mat(m)) => nsd_part(m.mat())?.norm(),
        (ConeFactor::Nonneg { .. }, KPart::Vec(v)) => vnorm(v.iter().map(|x| x.min(0.0))),
        (ConeFactor::Zero { .. }, KPart::Vec(v)) => vnorm(v.iter().copied()),
        _ => 0.0,
    })
}

/// Distance from `ξ` to the normal cone of the factor at `a`.
pub fn normal_deficit(f: &ConeFactor, a: &KPart, xi: &KPart) -> Result<f64> {
    Ok(match (f, a, xi) {
        (ConeFactor::Psd { .. }, KPart::Mat(a), KPart::Mat(xi)) => {
            let p0 = kernel(a)?;
            let inner = nsd_part(&(p0.transpose() * xi.mat() * &p0))?;
            (xi.mat() - &p0 * inner * p0.transpose()).norm()
        }
        (ConeFactor::Nonneg { .. }, KPart::Vec(a), KPart::Vec(xi)) => {
            let act = active(a);
            vnorm(xi.iter().zip(&act).map(|(&x, &on)| if on { x.max(0.0) } else { x }))
        }
        (ConeFactor::Zero { .. }, _, _) => 0.0,
        (_, _, xi) => xi.norm(),
    })
}

/// Distance-like deficit of `d` from the tangent cone of the factor at `a`.
pub fn tangent_deficit(f: &ConeFactor, a: &KPart, d: &KPart) -> Result<f64> {
    Ok(match (f, a, d) {
        (ConeFactor::Psd { .. }, KPart::Mat(a), KPart::Mat(d)) => {
            let p0 = kernel(a)?;
            nsd_part(&(p0.transpose() * d.mat() * &p0))?.norm()
        }
        (ConeFactor::Nonneg { .. }, KPart::Vec(a), KPart::Vec(d)) => {
            let act = active(a);
            vnorm(d.iter().zip(&act).map(|(&x, &on)| if on { x.min(0.0) } else { 0.0 }))
        }
        (ConeFactor::Zero { .. }, _, d) => d.norm(),
        _ => 0.0,
    })
}

/// A tangent vector near `d`: the offending part is removed.
pub fn tangent_repair(f: &ConeFactor, a: &KPart, d: &KPart) -> Result<KPart> {
    Ok(match (f, a, d) {
        (ConeFactor::Psd { .. }, KPart::Mat(a), KPart::Mat(d)) => {
            let p0 = kernel(a)?;
            let neg = nsd_part(&(p0.transpose() * d.mat() * &p0))?;
            KPart::Mat(SymMat::symmetrize(d.mat() - &p0 * neg * p0.transpose()))
        }
        (ConeFactor::Nonneg { .. }, KPart::Vec(a), KPart::Vec(d)) => {
            let act = active(a);
            KPart::Vec(d.iter().zip(&act).map(|(&x, &on)| if on { x.max(0.0) } else { x }).collect())
        }
        (ConeFactor::Zero { .. }, _, KPart::Vec(d)) => KPart::Vec(vec![0.0; d.len()]),
        (_, _, d) => d.clone(),
    })
}

/// `sup { ⟨ξ, w⟩ : w ∈ T²_K(a; v) }` for one factor.
pub fn sigma_factor(f: &ConeFactor, a: &KPart, v: &KPart, xi: &KPart, tol: f64) -> Result<SigmaValue> {
    let thr = tol * xi.norm().max(1.0);
    Ok(match (f, a, v, xi) {
        (ConeFactor::Psd { .. }, KPart::Mat(a), KPart::Mat(v), KPart::Mat(xi)) => sigma_tangent2_psd(xi, a, v, tol)?,
        (ConeFactor::Nonneg { .. }, KPart::Vec(a), KPart::Vec(v), KPart::Vec(xi)) => {
            let act = active(a);
            let vs = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
            let mut notes = Vec::new();
            for i in 0..xi.len() {
                let free_sign = act[i] && v[i].abs() <= 1e-8 * vs;
                let bad = if free_sign { xi[i] > thr } else { xi[i].abs() > thr };
                if bad {
                    notes.push(format!("ξ[{i}] = {:.3e} pairs with an unbounded direction", xi[i]));
                }
            }
            if notes.is_empty() {
                SigmaValue::finite(0.0)
            } else {
                SigmaValue::infinite(notes)
            }
        }
        (ConeFactor::Zero { .. }, _, _, _) => SigmaValue::finite(0.0),
        (_, _, _, xi) => {
            if xi.norm() > thr {
                SigmaValue::infinite(vec!["nonzero multiplier on a free factor".into()])
            } else {
                SigmaValue::finite(0.0)
            }
        }
    })
}
