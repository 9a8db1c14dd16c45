//! Symmetric eigendecomposition with eigenvalue clustering.
//!
//! Eigenvalues are sorted nonincreasingly and grouped into clusters of
//! numerically equal values `μ_1 > … > μ_r`. One cluster, at index `r0`, holds
//! the eigenvalues that are zero within `cluster_tol`; it is always present and
//! is empty when no eigenvalue is zero, so every case split on `k < r0`,
//! `k = r0`, `k > r0` is well defined.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::symmat::SymMat;

/// Relative factor used for the default clustering tolerance.
pub const DEFAULT_CLUSTER_RTOL: f64 = 1e-8;

/// Default clustering tolerance `1e-8 · max(1, ‖A‖_F)`.
pub fn default_cluster_tol(a: &SymMat) -> f64 {
    DEFAULT_CLUSTER_RTOL * a.frob().max(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    /// Common eigenvalue of the cluster; exactly `0.0` for the zero cluster.
    pub value: f64,
    pub start: usize,
    pub len: usize,
}

impl Cluster {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

#[derive(Clone, Debug)]
pub struct Spectral {
    p: DMatrix<f64>,
    lambda: Vec<f64>,
    clusters: Vec<Cluster>,
    r0: usize,
    cluster_tol: f64,
    warnings: Vec<String>,
}

/// Eigenpairs sorted by nonincreasing eigenvalue, without clustering.
pub fn eig_sorted(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), Vec::new()));
    }
    let fa = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]);
    let eig = fa.selfadjoint_eigendecomposition(faer::Side::Lower);
    let s = eig.s().column_vector();
    let u = eig.u();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s.read(j).total_cmp(&s.read(i)));
    let lambda: Vec<f64> = order.iter().map(|&i| s.read(i)).collect();
    if lambda.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen {
            n,
            norm: a.norm(),
            max_abs: a.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        });
    }
    let p = DMatrix::from_fn(n, n, |r, c| u.read(r, order[c]));
    Ok((p, lambda))
}

impl Spectral {
    /// Decomposes `a` with the default clustering tolerance.
    pub fn new(a: &SymMat) -> Result<Self> {
        Self::with_tol(a, default_cluster_tol(a))
    }

    /// Decomposes `a` with an explicit clustering tolerance.
    pub fn with_tol(a: &SymMat, cluster_tol: f64) -> Result<Self> {
        if !(cluster_tol > 0.0) {
            return Err(Error::Invalid(format!(
                "cluster_tol must be positive, got {cluster_tol}"
            )));
        }
        let (p, lambda) = eig_sorted(a.mat())?;
        Self::from_parts(p, lambda, cluster_tol)
    }

    /// Builds the clustered object from an eigenbasis and nonincreasing
    /// eigenvalues. The basis must be orthogonal.
    pub fn from_parts(p: DMatrix<f64>, lambda: Vec<f64>, cluster_tol: f64) -> Result<Self> {
        let n = lambda.len();
        if p.nrows() != n || p.ncols() != n {
            return Err(Error::Dimension(format!(
                "basis is {}x{} but {} eigenvalues were given",
                p.nrows(),
                p.ncols(),
                n
            )));
        }
        if lambda.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Invalid("eigenvalues must be nonincreasing".into()));
        }
        let orth = (p.transpose() * &p - DMatrix::<f64>::identity(n, n)).norm();
        if orth > 1e-10 * (n.max(1) as f64) {
            return Err(Error::Invalid(format!(
                "basis is not orthogonal (||PᵀP - I|| = {orth:.3e})"
            )));
        }

        let mut clusters = Vec::new();
        let mut warnings = Vec::new();
        let n_pos = lambda.iter().take_while(|&&l| l > cluster_tol).count();
        let n_zero = lambda[n_pos..]
            .iter()
            .take_while(|&&l| l >= -cluster_tol)
            .count();

        chain_clusters(&lambda, 0..n_pos, cluster_tol, &mut clusters, &mut warnings);
        let r0 = clusters.len();
        clusters.push(Cluster {
            value: 0.0,
            start: n_pos,
            len: n_zero,
        });
        chain_clusters(
            &lambda,
            n_pos + n_zero..n,
            cluster_tol,
            &mut clusters,
            &mut warnings,
        );

        let values: Vec<f64> = clusters
            .iter()
            .filter(|c| !c.is_empty() || c.value == 0.0)
            .map(|c| c.value)
            .collect();
        for w in values.windows(2) {
            if w[0] - w[1] < 10.0 * cluster_tol {
                warnings.push(format!(
                    "ill-conditioned spectral gap between {:.6e} and {:.6e} (cluster_tol {:.3e})",
                    w[0], w[1], cluster_tol
                ));
            }
        }

        Ok(Spectral {
            p,
            lambda,
            clusters,
            r0,
            cluster_tol,
            warnings,
        })
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    /// Number of clusters, counting the (possibly empty) zero cluster.
    pub fn r(&self) -> usize {
        self.clusters.len()
    }

    pub fn r0(&self) -> usize {
        self.r0
    }

    pub fn mu(&self, k: usize) -> f64 {
        self.clusters[k].value
    }

    pub fn cluster_tol(&self) -> f64 {
        self.cluster_tol
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn alpha(&self) -> Range<usize> {
        0..self.clusters[self.r0].start
    }

    pub fn beta(&self) -> Range<usize> {
        self.clusters[self.r0].range()
    }

    pub fn gamma(&self) -> Range<usize> {
        self.clusters[self.r0].range().end..self.n()
    }

    /// Columns `P_{a_k}`.
    pub fn cols(&self, k: usize) -> DMatrix<f64> {
        let c = &self.clusters[k];
        self.p.columns(c.start, c.len).into_owned()
    }

    /// `Pᵀ M P`.
    pub fn rotate(&self, m: &SymMat) -> DMatrix<f64> {
        let r = self.p.transpose() * m.mat() * &self.p;
        (&r + r.transpose()) * 0.5
    }

    /// `P M Pᵀ`.
    pub fn unrotate(&self, m: &DMatrix<f64>) -> SymMat {
        SymMat::symmetrize(&self.p * m * self.p.transpose())
    }

    /// Cluster values repeated per eigenvalue, i.e. the snapped spectrum.
    pub fn snapped(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for c in &self.clusters {
            for i in c.range() {
                out[i] = c.value;
            }
        }
        out
    }

    /// `P Diag(λ) Pᵀ` from the raw eigenvalues.
    pub fn reconstruct(&self) -> SymMat {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.lambda));
        self.unrotate(&d)
    }

    /// `(Z − μ_k I)† = Σ_{j≠k} (μ_j − μ_k)⁻¹ P_{a_j} P_{a_j}ᵀ`.
    pub fn pinv_shifted(&self, k: usize) -> SymMat {
        let mu_k = self.mu(k);
        let d: Vec<f64> = self
            .clusters
            .iter()
            .enumerate()
            .flat_map(|(j, c)| {
                let v = if j == k { 0.0 } else { 1.0 / (c.value - mu_k) };
                std::iter::repeat_n(v, c.len)
            })
            .collect();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d));
        self.unrotate(&d)
    }

    /// Same spectrum with each cluster basis `P_{a_k}` replaced by
    /// `P_{a_k} R_k`. Each `R_k` must be orthogonal of size `|a_k|`.
    pub fn with_cluster_rotations(&self, rotations: &[DMatrix<f64>]) -> Result<Self> {
        if rotations.len() != self.clusters.len() {
            return Err(Error::Dimension(format!(
                "{} rotations for {} clusters",
                rotations.len(),
                self.clusters.len()
            )));
        }
        let mut p = self.p.clone();
        for (c, r) in self.clusters.iter().zip(rotations) {
            if r.nrows() != c.len || r.ncols() != c.len {
                return Err(Error::Dimension("rotation size differs from cluster".into()));
            }
            if c.len == 0 {
                continue;
            }
            let block = self.p.columns(c.start, c.len) * r;
            p.columns_mut(c.start, c.len).copy_from(&block);
        }
        let mut out = Self::from_parts(p, self.lambda.clone(), self.cluster_tol)?;
        out.clusters = self.clusters.clone();
        out.r0 = self.r0;
        Ok(out)
    }
}

/// Sub-decomposition of a diagonal block `H̃_{a_k a_k}`; same contract as
/// [`Spectral::with_tol`].
pub fn sub_spectral(m: &SymMat, cluster_tol: f64) -> Result<Spectral> {
    Spectral::with_tol(m, cluster_tol)
}

fn chain_clusters(
    lambda: &[f64],
    idx: Range<usize>,
    tol: f64,
    out: &mut Vec<Cluster>,
    warnings: &mut Vec<String>,
) {
    let mut i = idx.start;
    while i < idx.end {
        let mut j = i + 1;
        while j < idx.end && lambda[j - 1] - lambda[j] <= tol {
            j += 1;
        }
        let vals = &lambda[i..j];
        let spread = vals[0] - vals[vals.len() - 1];
        if spread > tol {
            warnings.push(format!(
                "cluster at {:.6e} spans {:.3e} > cluster_tol {:.3e}",
                vals[0], spread, tol
            ));
        }
        out.push(Cluster {
            value: vals.iter().sum::<f64>() / vals.len() as f64,
            start: i,
            len: j - i,
        });
        i = j;
    }
}

/// Extracts the `(rows, cols)` sub-block of `m`.
pub fn block(m: &DMatrix<f64>, rows: Range<usize>, cols: Range<usize>) -> DMatrix<f64> {
    m.view((rows.start, cols.start), (rows.len(), cols.len()))
        .into_owned()
}

/// Writes `b` into the `(rows, cols)` sub-block of `m`.
pub fn set_block(m: &mut DMatrix<f64>, rows: Range<usize>, cols: Range<usize>, b: &DMatrix<f64>) {
    m.view_mut((rows.start, cols.start), (rows.len(), cols.len()))
        .copy_from(b);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{random_orthogonal, rng_from};

    fn sizes(s: &Spectral) -> Vec<usize> {
        s.clusters().iter().map(|c| c.len).collect()
    }

    #[test]
    fn diagonal_with_zero() {
        let s = Spectral::with_tol(&SymMat::diag(&[2.0, 0.0, -1.0]), 1e-8).unwrap();
        assert_eq!(sizes(&s), vec![1, 1, 1]);
        assert_eq!(s.r0(), 1);
        assert_eq!(s.mu(0), 2.0);
        assert_eq!(s.mu(1), 0.0);
        assert_eq!(s.mu(2), -1.0);
    }

    #[test]
    fn virtual_zero_cluster() {
        let s = Spectral::with_tol(&SymMat::diag(&[3.0, 3.0, -1.0]), 1e-8).unwrap();
        assert_eq!(sizes(&s), vec![2, 0, 1]);
        assert_eq!(s.r0(), 1);
        assert!(s.beta().is_empty());
        assert_eq!(s.alpha(), 0..2);
        assert_eq!(s.gamma(), 2..3);
    }

    #[test]
    fn recovers_engineered_clusters() {
        let mut rng = rng_from(7);
        let p = random_orthogonal(&mut rng, 6);
        let lam = [1.0, 1.0, 1e-12, 1e-12, -2.0, -2.0];
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&lam));
        let a = SymMat::symmetrize(&p * d * p.transpose());
        let s = Spectral::with_tol(&a, 1e-8).unwrap();
        assert_eq!(sizes(&s), vec![2, 2, 2]);
        assert_eq!(s.r0(), 1);
        assert!((s.mu(0) - 1.0).abs() < 1e-12);
        assert!((s.mu(2) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn sub_spectral_examples() {
        let s = sub_spectral(&SymMat::diag(&[1.0, -1.0]), 1e-8).unwrap();
        assert_eq!(s.alpha(), 0..1);
        assert!(s.beta().is_empty());
        assert_eq!(s.gamma(), 1..2);

        let s = sub_spectral(&SymMat::zeros(2), 1e-8).unwrap();
        assert_eq!(s.r(), 1);
        assert_eq!(s.beta(), 0..2);

        let a = SymMat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let s = sub_spectral(&a, 1e-8).unwrap();
        assert!((s.lambda()[0] - 1.0).abs() < 1e-14);
        assert!((s.lambda()[1] + 1.0).abs() < 1e-14);
        let q0 = s.p().column(0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((q0[0].abs() - h).abs() < 1e-12 && (q0[0] - q0[1]).abs() < 1e-12);
    }

    #[test]
    fn pinv_shifted_examples() {
        let s = Spectral::with_tol(&SymMat::diag(&[2.0, 0.0]), 1e-8).unwrap();
        let r = s.pinv_shifted(0);
        assert!((&r - &SymMat::diag(&[0.0, -0.5])).frob() < 1e-15);
        let r = s.pinv_shifted(1);
        assert!((&r - &SymMat::diag(&[0.5, 0.0])).frob() < 1e-15);

        let s = Spectral::with_tol(&SymMat::diag(&[3.0, 1.0, -2.0]), 1e-8).unwrap();
        let r = s.pinv_shifted(1);
        assert!((&r - &SymMat::diag(&[0.5, 0.0, -1.0 / 3.0])).frob() < 1e-15);
    }

    #[test]
    fn gap_warning() {
        let s = Spectral::with_tol(&SymMat::diag(&[1.0, 1.0 - 5e-8]), 1e-8).unwrap();
        assert_eq!(s.r(), 3);
        assert!(!s.warnings().is_empty());
    }

    #[test]
    fn rotations_preserve_reconstruction() {
        let mut rng = rng_from(3);
        let p = random_orthogonal(&mut rng, 4);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[2.0, 2.0, 0.0, -1.0]));
        let a = SymMat::symmetrize(&p * d * p.transpose());
        let s = Spectral::new(&a).unwrap();
        let rots: Vec<_> = s
            .clusters()
            .iter()
            .map(|c| random_orthogonal(&mut rng, c.len))
            .collect();
        let t = s.with_cluster_rotations(&rots).unwrap();
        assert!((&t.reconstruct() - &a).frob() < 1e-12);
    }
}
