use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use crate::error::Result;
use crate::instances::{gaussian_matrix, Rng64};
use crate::projpsd::{nsd_part, psd_part};
use crate::spectral::{block, eig_sorted, Spectral};
use crate::symmat::SymMat;

use super::tangent2::{BlockKind, Coords, Tangent2Data};

fn ser_value<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// Value of a support function; `+∞` serializes as `null`.
#[derive(Clone, Debug, Serialize)]
pub struct SigmaValue {
    #[serde(serialize_with = "ser_value")]
    pub value: f64,
    /// Why the value is infinite, one entry per failed condition.
    pub notes: Vec<String>,
}

impl SigmaValue {
    pub fn finite(value: f64) -> Self {
        SigmaValue { value, notes: Vec::new() }
    }

    pub fn infinite(notes: Vec<String>) -> Self {
        SigmaValue {
            value: f64::INFINITY,
            notes,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }

    fn from_notes(value: f64, notes: Vec<String>) -> Self {
        if notes.is_empty() {
            SigmaValue::finite(value)
        } else {
            SigmaValue::infinite(notes)
        }
    }
}

/// Multiplier blocks in the coordinates of [`Tangent2Data`].
fn multiplier_coords(data: &Tangent2Data, g1: &SymMat, g2: &SymMat) -> Coords {
    data.coords(g1, g2)
}

fn pair(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// `sup { ⟨Γ¹, S⟩ + ⟨Γ², T⟩ : (S, T) ∈ T²_Ω((X, Y); (F, G)) }`.
///
/// A multiplier block paired with a free block must vanish, a block paired
/// with an entrywise relation `a∘S̃ + b∘T̃ = rhs` must be parallel to `(a, b)`,
/// and on the shifted `Ω` block `Γ̂¹ ⪯ 0`, `Γ̂² ⪰ 0`. Each test uses the
/// threshold `tol·max(1, ‖(Γ¹, Γ²)‖)`.
pub fn sigma_tangent2_omega(g1: &SymMat, g2: &SymMat, data: &Tangent2Data, tol: f64) -> Result<SigmaValue> {
    let c = multiplier_coords(data, g1, g2);
    let thr = tol * crate::symmat::pair_norm(g1, g2).max(1.0);
    let mut value = 0.0;
    let mut notes = Vec::new();
    for rule in data.rules() {
        let (a1, a2) = c.blocks(rule);
        let w = rule.weight();
        match &rule.kind {
            BlockKind::FixedS(v) => {
                let free = w.sqrt() * a2.norm();
                if free > thr {
                    notes.push(format!("{}: Γ² pairs with a free T block ({free:.3e})", rule.label));
                }
                value += w * pair(&a1, v);
            }
            BlockKind::FixedT(v) => {
                let free = w.sqrt() * a1.norm();
                if free > thr {
                    notes.push(format!("{}: Γ¹ pairs with a free S block ({free:.3e})", rule.label));
                }
                value += w * pair(&a2, v);
            }
            BlockKind::Coupled { a, b, rhs } => {
                let dev = w.sqrt() * (a1.component_mul(b) - a2.component_mul(a)).norm();
                if dev > thr {
                    notes.push(format!("{}: (Γ¹, Γ²) not parallel to the coupling ({dev:.3e})", rule.label));
                }
                let den = a.component_mul(a) + b.component_mul(b);
                let lam = (a.component_mul(&a1) + b.component_mul(&a2)).component_div(&den);
                value += w * pair(&lam, rhs);
            }
            BlockKind::ShiftedOmega { s_shift, t_shift } => {
                let pos = psd_part(&a1)?.norm();
                let neg = nsd_part(&a2)?.norm();
                if pos > thr {
                    notes.push(format!("{}: Γ̂¹ has a positive part ({pos:.3e})", rule.label));
                }
                if neg > thr {
                    notes.push(format!("{}: Γ̂² has a negative part ({neg:.3e})", rule.label));
                }
                value += pair(&a1, s_shift) + pair(&a2, t_shift);
            }
        }
    }
    Ok(SigmaValue::from_notes(value, notes))
}

/// A member `(S₀, T₀)` and a direction `(S_d, T_d)` with
/// `(S₀, T₀) + s(S_d, T_d) ∈ T²` for all `s ≥ 0` and positive pairing with
/// `(Γ¹, Γ²)`, built from the first failed finiteness condition. `None`
/// when every condition holds.
pub fn recession_ray(
    g1: &SymMat,
    g2: &SymMat,
    data: &Tangent2Data,
    tol: f64,
) -> Result<Option<((SymMat, SymMat), (SymMat, SymMat))>> {
    let c = multiplier_coords(data, g1, g2);
    let thr = tol * crate::symmat::pair_norm(g1, g2).max(1.0);
    let n = data.spec().n();
    let b = data.spec().beta().len();
    let mut dir = Coords::zeros(n, b);
    let mut found = false;
    for rule in data.rules() {
        let (a1, a2) = c.blocks(rule);
        let w = rule.weight().sqrt();
        let zero = DMatrix::zeros(rule.rows.len(), rule.cols.len());
        let d = match &rule.kind {
            BlockKind::FixedS(_) if w * a2.norm() > thr => Some((zero, a2)),
            BlockKind::FixedT(_) if w * a1.norm() > thr => Some((a1, zero)),
            BlockKind::Coupled { a, b, .. } => {
                let m = a2.component_mul(a) - a1.component_mul(b);
                if w * m.norm() > thr {
                    Some((-b.component_mul(&m), a.component_mul(&m)))
                } else {
                    None
                }
            }
            BlockKind::ShiftedOmega { .. } => {
                let (p1, l1) = eig_sorted(&a1)?;
                let (p2, l2) = eig_sorted(&a2)?;
                if l1[0] > thr {
                    let r = p1.column(0).into_owned();
                    Some((&r * r.transpose(), zero))
                } else if *l2.last().unwrap() < -thr {
                    let r = p2.column(l2.len() - 1).into_owned();
                    Some((zero, -(&r * r.transpose())))
                } else {
                    None
                }
            }
            _ => None,
        };
        if let Some((sd, td)) = d {
            dir.set(rule, &sd, &td);
            found = true;
            break;
        }
    }
    if !found {
        return Ok(None);
    }
    let start = data.anchor();
    Ok(Some((data.assemble(&start), data.assemble(&dir))))
}

/// Multipliers for which [`sigma_tangent2_omega`] is finite: free-paired
/// blocks zero, coupled blocks parallel to the relation, and the zero-cluster
/// blocks of the required signs. The remaining parts are Gaussian.
pub fn finite_multipliers(data: &Tangent2Data, rng: &mut Rng64) -> (SymMat, SymMat) {
    let n = data.spec().n();
    let b = data.spec().beta().len();
    let mut c = Coords::zeros(n, b);
    for rule in data.rules() {
        let (p, q) = (rule.rows.len(), rule.cols.len());
        let g = gaussian_matrix(rng, p, q);
        let g = if rule.is_diagonal() { (&g + g.transpose()) * 0.5 } else { g };
        let zero = DMatrix::zeros(p, q);
        let (sb, tb) = match &rule.kind {
            BlockKind::FixedS(_) => (g, zero),
            BlockKind::FixedT(_) => (zero, g),
            BlockKind::Coupled { a, b, .. } => (a.component_mul(&g), b.component_mul(&g)),
            BlockKind::ShiftedOmega { .. } => {
                let h = gaussian_matrix(rng, p, p);
                let u = -(&g * g.transpose()) / p as f64;
                let v = &h * h.transpose() / p as f64;
                (u, v)
            }
        };
        c.set(rule, &sb, &tb);
    }
    data.assemble(&c)
}

/// Adds a block of size about `eps` to `(Γ¹, Γ²)` that breaks the finiteness
/// condition of one randomly chosen rule; returns the new pair and the rule
/// index.
pub fn break_multipliers(
    data: &Tangent2Data,
    g1: &SymMat,
    g2: &SymMat,
    rng: &mut Rng64,
    eps: f64,
) -> Result<(SymMat, SymMat, usize)> {
    use rand::Rng;
    if data.rules().is_empty() {
        return Err(crate::error::Error::Invalid("second-order tangent set has no constraints".into()));
    }
    let idx = rng.gen_range(0..data.rules().len());
    let rule = &data.rules()[idx];
    let (p, q) = (rule.rows.len(), rule.cols.len());
    let g = gaussian_matrix(rng, p, q);
    let g = if rule.is_diagonal() { (&g + g.transpose()) * 0.5 } else { g };
    let g = &g * (eps / g.norm().max(f64::MIN_POSITIVE));
    let zero = DMatrix::zeros(p, q);
    let (sb, tb) = match &rule.kind {
        BlockKind::FixedS(_) => (zero, g),
        BlockKind::FixedT(_) => (g, zero),
        // Orthogonal to (a, b) entrywise.
        BlockKind::Coupled { a, b, .. } => (-b.component_mul(&g), a.component_mul(&g)),
        // Lifts the top eigenvalue of Γ̂¹ to `eps`.
        BlockKind::ShiftedOmega { .. } => {
            let (a1, _) = data.coords(g1, g2).blocks(rule);
            let (pv, lam) = eig_sorted(&a1)?;
            let v = pv.column(0).into_owned();
            (&v * v.transpose() * (eps - lam[0]), zero)
        }
    };
    let mut c = Coords::zeros(data.spec().n(), data.spec().beta().len());
    c.set(rule, &sb, &tb);
    let (d1, d2) = data.assemble(&c);
    Ok((g1 + &d1, g2 + &d2, idx))
}

/// Eigenvectors of the zero cluster.
fn kernel_basis(spec: &Spectral) -> DMatrix<f64> {
    let rb = spec.beta();
    block(spec.p(), 0..spec.n(), rb)
}

fn psd_check(spec: &Spectral, m: &SymMat, what: &str, thr: f64, notes: &mut Vec<String>) -> Result<()> {
    let p0 = kernel_basis(spec);
    if p0.ncols() > 0 {
        let b = p0.transpose() * m.mat() * &p0;
        let neg = nsd_part(&b)?.norm();
        if neg > thr {
            notes.push(format!("{what} is not tangent: negative part {neg:.3e} on the kernel"));
        }
    }
    Ok(())
}

/// `sup { ⟨ξ, W⟩ : W ∈ T²_{S₊}(A; H) } = 2⟨ξ, H A† H⟩` for `ξ ∈ N_{S₊}(A)`
/// with `⟨ξ, H⟩ = 0`, and `+∞` otherwise.
pub fn sigma_tangent2_psd(xi: &SymMat, a: &SymMat, h: &SymMat, tol: f64) -> Result<SigmaValue> {
    let thr = tol * xi.frob().max(1.0) * a.frob().max(h.frob()).max(1.0);
    let mut notes = Vec::new();
    let pos = psd_part(xi.mat())?.norm();
    if pos > tol * xi.frob().max(1.0) {
        notes.push(format!("ξ is not negative semidefinite (positive part {pos:.3e})"));
    }
    let xa = xi.inner(a);
    if xa.abs() > thr {
        notes.push(format!("⟨ξ, A⟩ = {xa:.3e}"));
    }
    let spec = Spectral::new(a)?;
    psd_check(&spec, h, "H", tol * h.frob().max(1.0), &mut notes)?;
    let xh = xi.inner(h);
    if xh.abs() > thr {
        notes.push(format!("⟨ξ, H⟩ = {xh:.3e}"));
    }
    let hah = SymMat::symmetrize(h.mat() * pinv(&spec) * h.mat());
    let value = 2.0 * xi.inner(&hah);
    Ok(SigmaValue::from_notes(value, notes))
}

/// Mirror of [`sigma_tangent2_psd`] for `S₋`: `2⟨Γ, G Y† G⟩` when `Γ ⪰ 0`,
/// `⟨Γ, Y⟩ = 0`, `⟨Γ, G⟩ = 0` and `G` is tangent to `S₋` at `Y`.
pub fn sigma_tangent2_nsd(gamma: &SymMat, y: &SymMat, g: &SymMat, tol: f64) -> Result<SigmaValue> {
    let v = sigma_tangent2_psd(&-gamma, &-y, &-g, tol)?;
    Ok(SigmaValue {
        value: v.value,
        notes: v
            .notes
            .into_iter()
            .map(|s| s.replace("ξ", "−Γ").replace("A", "−Y").replace("H", "−G"))
            .collect(),
    })
}

fn pinv(spec: &Spectral) -> DMatrix<f64> {
    let lam = spec.snapped();
    let d: Vec<f64> = lam.iter().map(|&l| if l == 0.0 { 0.0 } else { 1.0 / l }).collect();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d));
    spec.p() * d * spec.p().transpose()
}
