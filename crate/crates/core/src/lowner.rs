//! Generic Löwner operators `𝓕(Z) = P Diag(f(λ)) Pᵀ` and their first and
//! second directional derivatives for an arbitrary [`ScalarFun`].
//!
//! All formulas are assembled blockwise in the eigenbasis `P` of `Z`, with
//! blocks indexed by eigenvalue clusters. Diagonal blocks need a second
//! decomposition `H̃_{a_k a_k} = Q Diag(η) Qᵀ`, whose clusters `b_j` carry the
//! directional information.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::scalarfun::{phi1_table, GDividedTables, ScalarFun};
use crate::spectral::{block, set_block, Spectral, DEFAULT_CLUSTER_RTOL};
use crate::symmat::SymMat;

#[derive(Clone, Debug)]
pub struct LownerJet2 {
    pub value: SymMat,
    pub dir1: SymMat,
    pub dir2: SymMat,
    pub warnings: Vec<String>,
}

/// Eigendecomposition of a diagonal block `H̃_{a_k a_k}`.
#[derive(Clone, Debug)]
pub struct SubBlock {
    pub spec: Spectral,
}

impl SubBlock {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let s = SymMat::symmetrize(m.clone());
        let tol = DEFAULT_CLUSTER_RTOL * s.frob().max(1.0);
        Ok(SubBlock {
            spec: Spectral::with_tol(&s, tol)?,
        })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        self.spec.p()
    }

    /// Sub-cluster values `η_j`.
    pub fn eta(&self) -> Vec<f64> {
        self.spec.clusters().iter().map(|c| c.value).collect()
    }

    /// Sub-cluster index of each row of `Q`.
    pub fn owner(&self) -> Vec<usize> {
        let mut o = vec![0; self.spec.n()];
        for (j, c) in self.spec.clusters().iter().enumerate() {
            for i in c.range() {
                o[i] = j;
            }
        }
        o
    }

    /// `Q Diag(d_j) Qᵀ` where `d_j` is constant on sub-cluster `b_j`.
    pub fn spectral_fn(&self, d: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let diag: Vec<f64> = self.spec.snapped().into_iter().map(d).collect();
        let q = self.q();
        q * DMatrix::from_diagonal(&DVector::from_vec(diag)) * q.transpose()
    }
}

/// `𝓕(Z)` using the cluster values of `spec`.
pub fn lowner_apply(spec: &Spectral, f: &dyn ScalarFun) -> SymMat {
    let d: Vec<f64> = spec.snapped().into_iter().map(|t| f.eval(t)).collect();
    spec.unrotate(&DMatrix::from_diagonal(&DVector::from_vec(d)))
}

/// `Φ_k(H̃_{a_k a_k}) = Σ_j f′(μ_k; η_j) Q_{b_j} Q_{b_j}ᵀ`.
fn phi_block(f: &dyn ScalarFun, mu: f64, sub: &SubBlock) -> DMatrix<f64> {
    sub.spectral_fn(|eta| f.dir1(mu, eta))
}

fn sub_blocks(spec: &Spectral, htil: &DMatrix<f64>) -> Result<Vec<Option<SubBlock>>> {
    spec.clusters()
        .iter()
        .map(|c| {
            if c.is_empty() {
                Ok(None)
            } else {
                SubBlock::new(&block(htil, c.range(), c.range())).map(Some)
            }
        })
        .collect()
}

/// `𝓕′(Z; H)`.
pub fn lowner_dir1(spec: &Spectral, f: &dyn ScalarFun, h: &SymMat) -> Result<SymMat> {
    let htil = spec.rotate(h);
    let subs = sub_blocks(spec, &htil)?;
    let tables = GDividedTables::new(spec, f);
    Ok(spec.unrotate(&dir1_tilde(spec, f, &htil, &subs, &tables)))
}

fn dir1_tilde(
    spec: &Spectral,
    f: &dyn ScalarFun,
    htil: &DMatrix<f64>,
    subs: &[Option<SubBlock>],
    tables: &GDividedTables,
) -> DMatrix<f64> {
    let n = spec.n();
    let cl = spec.clusters();
    let mut m = DMatrix::zeros(n, n);
    for k in 0..cl.len() {
        let Some(sub) = &subs[k] else { continue };
        set_block(&mut m, cl[k].range(), cl[k].range(), &phi_block(f, cl[k].value, sub));
        for l in 0..cl.len() {
            if l == k || cl[l].is_empty() {
                continue;
            }
            let b = block(htil, cl[k].range(), cl[l].range()) * tables.g1(k, l);
            set_block(&mut m, cl[k].range(), cl[l].range(), &b);
        }
    }
    m
}

/// Value, first and second directional derivatives of the Löwner operator.
pub fn lowner_dir2(
    spec: &Spectral,
    f: &dyn ScalarFun,
    h: &SymMat,
    w: &SymMat,
) -> Result<LownerJet2> {
    let htil = spec.rotate(h);
    let wtil = spec.rotate(w);
    let subs = sub_blocks(spec, &htil)?;
    let tables = GDividedTables::new(spec, f);
    let cl = spec.clusters();
    let r = cl.len();
    let n = spec.n();
    let mut warnings: Vec<String> = spec.warnings().to_vec();

    let hb = |k: usize, l: usize| block(&htil, cl[k].range(), cl[l].range());
    let mut b = DMatrix::zeros(n, n);

    for k in 0..r {
        let Some(sub) = &subs[k] else { continue };
        let mu_k = cl[k].value;
        warnings.extend(sub.spec.warnings().iter().map(|s| format!("block {}: {s}", k + 1)));

        // Ṽ_k = P_kᵀ (W − 2H(Z − μ_k I)†H) P_k
        let mut vtil = block(&wtil, cl[k].range(), cl[k].range());
        for j in 0..r {
            if j == k || cl[j].is_empty() {
                continue;
            }
            vtil -= hb(k, j) * hb(j, k) * (2.0 / (cl[j].value - mu_k));
        }
        let q = sub.q();
        let vhat = q.transpose() * &vtil * q;

        let eta = sub.eta();
        let owner = sub.owner();
        let phi1 = phi1_table(f, mu_k, &eta);
        let m = cl[k].len;
        let mut inner = DMatrix::from_fn(m, m, |i, j| phi1[owner[i]][owner[j]] * vhat[(i, j)]);
        for (jj, c) in sub.spec.clusters().iter().enumerate() {
            if c.is_empty() {
                continue;
            }
            let vb = block(&vhat, c.range(), c.range());
            let psi = lowner_of(&vb, |x| f.dir2(mu_k, eta[jj], x))?;
            let cur = block(&inner, c.range(), c.range());
            set_block(&mut inner, c.range(), c.range(), &(cur + psi));
        }
        let mut bkk = q * inner * q.transpose();
        for j in 0..r {
            if cl[j].is_empty() {
                continue;
            }
            let g = tables.g2(k, j, k);
            if g != 0.0 {
                bkk += hb(k, j) * hb(j, k) * (2.0 * g);
            }
        }
        set_block(&mut b, cl[k].range(), cl[k].range(), &bkk);

        for l in k + 1..r {
            let Some(sub_l) = &subs[l] else { continue };
            let mu_l = cl[l].value;
            let mut bkl = block(&wtil, cl[k].range(), cl[l].range()) * tables.g1(k, l);
            for j in 0..r {
                if cl[j].is_empty() {
                    continue;
                }
                let g = tables.g2(k, j, l);
                if g != 0.0 {
                    bkl += hb(k, j) * hb(j, l) * (2.0 * g);
                }
            }
            let hkl = hb(k, l);
            bkl += phi_block(f, mu_k, sub) * &hkl * (2.0 / (mu_k - mu_l));
            bkl += &hkl * phi_block(f, mu_l, sub_l) * (2.0 / (mu_l - mu_k));
            set_block(&mut b, cl[k].range(), cl[l].range(), &bkl);
            set_block(&mut b, cl[l].range(), cl[k].range(), &bkl.transpose());
        }
    }

    Ok(LownerJet2 {
        value: lowner_apply(spec, f),
        dir1: spec.unrotate(&dir1_tilde(spec, f, &htil, &subs, &tables)),
        dir2: spec.unrotate(&b),
        warnings,
    })
}

/// Löwner operator of a scalar map applied to a small symmetric block.
fn lowner_of(m: &DMatrix<f64>, g: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    let (r, lam) = crate::spectral::eig_sorted(&((m + m.transpose()) * 0.5))?;
    let d: Vec<f64> = lam.into_iter().map(g).collect();
    Ok(&r * DMatrix::from_diagonal(&DVector::from_vec(d)) * r.transpose())
}
