//! Projections onto the PSD and NSD cones and closed-form first and second
//! directional derivatives of the PSD projection.
//!
//! The second derivative is assembled from explicit case formulas keyed on
//! the position of the clusters `k ≤ l` relative to the zero cluster `r0`.
//! The generic engine in [`crate::lowner`] computes the same quantity from
//! divided differences and serves as an independent cross-check.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::lowner::SubBlock;
use crate::scalarfun::g2_max;
use crate::spectral::{block, eig_sorted, set_block, Spectral};
use crate::symmat::SymMat;

/// Mutation hook used by the self-test to confirm the oracle suite detects a
/// wrong sign in the case tables.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    FlipPositivePairSign,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Dir2Options {
    #[doc(hidden)]
    pub fault: Option<Fault>,
}

fn spectral_map(a: &DMatrix<f64>, g: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    if a.nrows() == 0 {
        return Ok(a.clone());
    }
    let (p, lam) = eig_sorted(&((a + a.transpose()) * 0.5))?;
    let d: Vec<f64> = lam.into_iter().map(g).collect();
    let m = &p * DMatrix::from_diagonal(&DVector::from_vec(d)) * p.transpose();
    Ok((&m + m.transpose()) * 0.5)
}

/// `Π₊` on a raw square block.
pub fn psd_part(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spectral_map(a, |t| t.max(0.0))
}

/// `Π₋` on a raw square block.
pub fn nsd_part(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spectral_map(a, |t| t.min(0.0))
}

pub fn proj_psd(a: &SymMat) -> Result<SymMat> {
    Ok(SymMat::symmetrize(psd_part(a.mat())?))
}

pub fn proj_nsd(a: &SymMat) -> Result<SymMat> {
    Ok(SymMat::symmetrize(nsd_part(a.mat())?))
}

/// `Π′(Z; H)`.
pub fn proj_dir1(z: &SymMat, h: &SymMat) -> Result<SymMat> {
    proj_dir1_spec(&Spectral::new(z)?, h)
}

pub fn proj_dir1_spec(spec: &Spectral, h: &SymMat) -> Result<SymMat> {
    let htil = spec.rotate(h);
    let cl = spec.clusters();
    let r0 = spec.r0();
    let mut m = DMatrix::zeros(spec.n(), spec.n());
    for k in 0..cl.len() {
        if cl[k].is_empty() {
            continue;
        }
        let hkk = block(&htil, cl[k].range(), cl[k].range());
        let diag = if k < r0 {
            hkk
        } else if k == r0 {
            psd_part(&hkk)?
        } else {
            DMatrix::zeros(cl[k].len, cl[k].len)
        };
        set_block(&mut m, cl[k].range(), cl[k].range(), &diag);
        for l in k + 1..cl.len() {
            if cl[l].is_empty() {
                continue;
            }
            let (a, b) = (cl[k].value, cl[l].value);
            let g1 = (a.max(0.0) - b.max(0.0)) / (a - b);
            let hkl = block(&htil, cl[k].range(), cl[l].range()) * g1;
            set_block(&mut m, cl[k].range(), cl[l].range(), &hkl);
            set_block(&mut m, cl[l].range(), cl[k].range(), &hkl.transpose());
        }
    }
    Ok(spec.unrotate(&m))
}

/// `Π″(Z; H, W)`.
pub fn proj_dir2(z: &SymMat, h: &SymMat, w: &SymMat) -> Result<SymMat> {
    proj_dir2_spec(&Spectral::new(z)?, h, w, Dir2Options::default())
}

/// `Π″_{S₋}(Z; H, W) = W − Π″(Z; H, W)`.
pub fn proj_nsd_dir2(z: &SymMat, h: &SymMat, w: &SymMat) -> Result<SymMat> {
    Ok(w - &proj_dir2(z, h, w)?)
}

pub fn proj_dir2_spec(spec: &Spectral, h: &SymMat, w: &SymMat, opts: Dir2Options) -> Result<SymMat> {
    let htil = spec.rotate(h);
    let wtil = spec.rotate(w);
    Ok(spec.unrotate(&dir2_tilde(spec, &htil, &wtil, opts)?))
}

/// `Σ_j c_j H̃_{a_k a_j} H̃_{a_j a_l}` over nonempty clusters `j` with
/// nonzero weight.
pub(crate) fn kernel_sum(
    spec: &Spectral,
    htil: &DMatrix<f64>,
    k: usize,
    l: usize,
    weight: impl Fn(usize, f64) -> f64,
) -> DMatrix<f64> {
    let cl = spec.clusters();
    let mut acc = DMatrix::zeros(cl[k].len, cl[l].len);
    for (j, c) in cl.iter().enumerate() {
        if c.is_empty() {
            continue;
        }
        let wj = weight(j, c.value);
        if wj != 0.0 {
            acc += block(htil, cl[k].range(), c.range()) * block(htil, c.range(), cl[l].range()) * wj;
        }
    }
    acc
}

/// The blocks `B̃` of `Pᵀ Π″(Z; H, W) P`.
pub fn dir2_tilde(
    spec: &Spectral,
    htil: &DMatrix<f64>,
    wtil: &DMatrix<f64>,
    opts: Dir2Options,
) -> Result<DMatrix<f64>> {
    let cl = spec.clusters();
    let r0 = spec.r0();
    let n = spec.n();
    let mut b = DMatrix::zeros(n, n);
    let flip = if opts.fault == Some(Fault::FlipPositivePairSign) { -1.0 } else { 1.0 };

    for k in 0..cl.len() {
        if cl[k].is_empty() {
            continue;
        }
        let mk = cl[k].value;
        let rk = cl[k].range();

        let bkk = if k < r0 {
            block(wtil, rk.clone(), rk.clone())
                - kernel_sum(spec, htil, k, k, |j, mj| {
                    if j > r0 {
                        2.0 * mj / ((mj - mk) * (mj - mk))
                    } else {
                        0.0
                    }
                })
        } else if k > r0 {
            kernel_sum(spec, htil, k, k, |j, mj| {
                if j < r0 {
                    2.0 * mj / ((mj - mk) * (mj - mk))
                } else {
                    0.0
                }
            })
        } else {
            zero_cluster_block(spec, htil, wtil)?
        };
        set_block(&mut b, rk.clone(), rk.clone(), &bkk);

        for l in k + 1..cl.len() {
            if cl[l].is_empty() {
                continue;
            }
            let ml = cl[l].value;
            let rl = cl[l].range();
            let hkl = block(htil, rk.clone(), rl.clone());
            let wkl = block(wtil, rk.clone(), rl.clone());
            let bkl = if l < r0 {
                wkl + kernel_sum(spec, htil, k, l, |j, mj| {
                    if j > r0 {
                        flip * 2.0 * mj / ((mk - mj) * (mj - ml))
                    } else {
                        0.0
                    }
                })
            } else if l == r0 {
                let hll = block(htil, rl.clone(), rl.clone());
                wkl + kernel_sum(spec, htil, k, l, |j, mj| {
                    if j > r0 {
                        2.0 / (mk - mj)
                    } else {
                        0.0
                    }
                }) + &hkl * nsd_part(&hll)? * (2.0 / mk)
            } else if k == r0 {
                let hkk = block(htil, rk.clone(), rk.clone());
                kernel_sum(spec, htil, k, l, |j, mj| {
                    if j < r0 {
                        2.0 / (mj - ml)
                    } else {
                        0.0
                    }
                }) - psd_part(&hkk)? * &hkl * (2.0 / ml)
            } else if k > r0 {
                kernel_sum(spec, htil, k, l, |j, mj| {
                    if j < r0 {
                        2.0 * mj / ((mj - mk) * (mj - ml))
                    } else {
                        0.0
                    }
                })
            } else {
                let hkk = block(htil, rk.clone(), rk.clone());
                wkl * (mk / (mk - ml))
                    + kernel_sum(spec, htil, k, l, |_, mj| 2.0 * g2_max(mk, mj, ml))
                    + hkk * &hkl * (2.0 / (mk - ml))
            };
            set_block(&mut b, rk.clone(), rl.clone(), &bkl);
            set_block(&mut b, rl, rk.clone(), &bkl.transpose());
        }
    }
    Ok(b)
}

/// Diagonal block at the zero cluster, built in the eigenbasis `Q` of
/// `H̃_{ββ}` from `V̂ = Qᵀ Ṽ Q` with `Ṽ = W̃ − 2 Σ_{j≠r0} H̃ H̃ / μ_j`.
fn zero_cluster_block(
    spec: &Spectral,
    htil: &DMatrix<f64>,
    wtil: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let r0 = spec.r0();
    let rb = spec.clusters()[r0].range();
    let sub = SubBlock::new(&block(htil, rb.clone(), rb.clone()))?;
    let vtil = block(wtil, rb.clone(), rb.clone())
        - kernel_sum(spec, htil, r0, r0, |j, mj| if j != r0 { 2.0 / mj } else { 0.0 });
    let q = sub.q();
    let vhat = q.transpose() * vtil * q;
    let inner = zero_cluster_pattern(&sub, &vhat)?;
    let plus = kernel_sum(spec, htil, r0, r0, |j, mj| if j < r0 { 2.0 / mj } else { 0.0 });
    Ok(q * inner * q.transpose() + plus)
}

/// Applies the sign pattern of the zero-cluster block to `V̂`:
/// `αα, αβ` kept, `αγ` scaled by `Σ`, `ββ` projected, the rest zeroed.
pub(crate) fn zero_cluster_pattern(sub: &SubBlock, vhat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (al, be, ga) = (sub.spec.alpha(), sub.spec.beta(), sub.spec.gamma());
    let eta = sub.spec.snapped();
    let m = vhat.nrows();
    let mut out = DMatrix::zeros(m, m);
    let keep = 0..be.end;
    set_block(&mut out, al.clone(), keep.clone(), &block(vhat, al.clone(), keep.clone()));
    set_block(&mut out, keep.clone(), al.clone(), &block(vhat, keep, al.clone()));
    for i in al.clone() {
        for j in ga.clone() {
            let s = eta[i] / (eta[i] - eta[j]);
            out[(i, j)] = s * vhat[(i, j)];
            out[(j, i)] = s * vhat[(j, i)];
        }
    }
    set_block(&mut out, be.clone(), be.clone(), &psd_part(&block(vhat, be.clone(), be))?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{random_clustered, random_sym, rng_from, SpectrumShape};
    use crate::lowner::lowner_dir2;
    use crate::scalarfun::{MaxZero, MinZero};

    fn sm(rows: &[&[f64]]) -> SymMat {
        SymMat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn projection_examples() {
        let p = proj_psd(&SymMat::diag(&[2.0, -1.0, 0.0])).unwrap();
        assert!((&p - &SymMat::diag(&[2.0, 0.0, 0.0])).frob() < 1e-15);
        let p = proj_psd(&sm(&[&[0.0, 3.0], &[3.0, 0.0]])).unwrap();
        assert!((&p - &sm(&[&[1.5, 1.5], &[1.5, 1.5]])).frob() < 1e-14);
    }

    #[test]
    fn moreau_decomposition() {
        let mut rng = rng_from(11);
        for _ in 0..1000 {
            let n = 1 + (crate::instances::normal(&mut rng).abs() * 3.0) as usize % 8;
            let a = random_sym(&mut rng, n);
            let p = proj_psd(&a).unwrap();
            let q = proj_nsd(&a).unwrap();
            assert!((&(&p + &q) - &a).frob() < 1e-10 * a.frob().max(1.0));
            assert!(p.inner(&q).abs() < 1e-10 * a.frob().max(1.0).powi(2));
        }
    }

    #[test]
    fn dir1_examples() {
        let h = sm(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let d = proj_dir1(&SymMat::diag(&[1.0, -1.0]), &h).unwrap();
        assert!((&d - &sm(&[&[1.0, 0.5], &[0.5, 0.0]])).frob() < 1e-14);
        let h = sm(&[&[0.0, 2.0], &[2.0, -1.0]]);
        let d = proj_dir1(&SymMat::zeros(2), &h).unwrap();
        assert!((&d - &proj_psd(&h).unwrap()).frob() < 1e-14);
        let d = proj_dir1(&SymMat::diag(&[1.0, 2.0]), &h).unwrap();
        assert!((&d - &h).frob() < 1e-14);
    }

    #[test]
    fn dir2_trivial_regions() {
        let mut rng = rng_from(5);
        let h = random_sym(&mut rng, 3);
        let w = random_sym(&mut rng, 3);
        let pd = SymMat::diag(&[3.0, 1.0, 0.5]);
        assert!((&proj_dir2(&pd, &h, &w).unwrap() - &w).frob() < 1e-13);
        assert!(proj_dir2(&(-&pd), &h, &w).unwrap().frob() < 1e-13);
        assert!(proj_nsd_dir2(&pd, &h, &w).unwrap().frob() < 1e-13);
        assert!((&proj_nsd_dir2(&(-&pd), &h, &w).unwrap() - &w).frob() < 1e-13);
    }

    #[test]
    fn closed_form_matches_generic_engine() {
        let mut rng = rng_from(21);
        for trial in 0..200 {
            let n = 3 + trial % 6;
            let zeros = trial % 4;
            let (z, _, _) = random_clustered(&mut rng, &SpectrumShape { n, zeros: zeros.min(n), repeats: true });
            let h = random_sym(&mut rng, n);
            let w = random_sym(&mut rng, n);
            let spec = Spectral::new(&z).unwrap();
            let closed = proj_dir2_spec(&spec, &h, &w, Dir2Options::default()).unwrap();
            let generic = lowner_dir2(&spec, &MaxZero, &h, &w).unwrap().dir2;
            let err = (&closed - &generic).max_abs();
            assert!(err < 1e-10, "trial {trial}: {err}");
        }
    }

    #[test]
    fn nsd_identity_matches_min_engine() {
        let mut rng = rng_from(22);
        for trial in 0..50 {
            let n = 2 + trial % 5;
            let (z, _, _) = random_clustered(&mut rng, &SpectrumShape { n, zeros: trial % 3, repeats: true });
            let h = random_sym(&mut rng, n);
            let w = random_sym(&mut rng, n);
            let spec = Spectral::new(&z).unwrap();
            let nsd = proj_nsd_dir2(&z, &h, &w).unwrap();
            let generic = lowner_dir2(&spec, &MinZero, &h, &w).unwrap().dir2;
            assert!((&nsd - &generic).max_abs() < 1e-9);
        }
    }
}
