use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symmat::SymMat;

/// `c + lin·x + ½ xᵀ quad x`. Empty `lin` or `quad` stand for zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Poly2 {
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub lin: Vec<f64>,
    #[serde(default)]
    pub quad: Vec<Vec<f64>>,
}

impl Poly2 {
    pub fn constant(c: f64) -> Self {
        Poly2 {
            c,
            ..Default::default()
        }
    }

    pub fn linear(c: f64, lin: Vec<f64>) -> Self {
        Poly2 { c, lin, quad: Vec::new() }
    }

    pub(crate) fn check(&self, m: usize, what: &str) -> Result<()> {
        if !self.c.is_finite() {
            return Err(Error::Invalid(format!("{what}: non-finite constant")));
        }
        if !self.lin.is_empty() && self.lin.len() != m {
            return Err(Error::Dimension(format!("{what}: lin has length {}, expected {m}", self.lin.len())));
        }
        if self.lin.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("{what}: non-finite linear coefficient")));
        }
        if self.quad.is_empty() {
            return Ok(());
        }
        if self.quad.len() != m || self.quad.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension(format!("{what}: quad must be {m}x{m}")));
        }
        for i in 0..m {
            for j in 0..i {
                let (a, b) = (self.quad[i][j], self.quad[j][i]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::Invalid(format!("{what}: non-finite quadratic coefficient")));
                }
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::Invalid(format!("{what}: quad is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let mut v = self.c;
        if !self.lin.is_empty() {
            v += self.lin.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
        if !self.quad.is_empty() {
            v += 0.5 * x.dot(&(self.hessian(x.len()) * x));
        }
        v
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let m = x.len();
        let mut g = if self.lin.is_empty() {
            DVector::zeros(m)
        } else {
            DVector::from_column_slice(&self.lin)
        };
        if !self.quad.is_empty() {
            g += self.hessian(m) * x;
        }
        g
    }

    pub fn hessian(&self, m: usize) -> DMatrix<f64> {
        if self.quad.is_empty() {
            DMatrix::zeros(m, m)
        } else {
            DMatrix::from_fn(m, m, |i, j| 0.5 * (self.quad[i][j] + self.quad[j][i]))
        }
    }

    /// `dᵀ ∇² d`.
    pub fn second(&self, d: &DVector<f64>) -> f64 {
        if self.quad.is_empty() {
            0.0
        } else {
            d.dot(&(self.hessian(d.len()) * d))
        }
    }
}

/// One factor of the cone `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ConeFactor {
    Psd { dim: usize },
    Nonneg { dim: usize },
    Zero { dim: usize },
    Free { dim: usize },
}

impl ConeFactor {
    /// Number of scalar outputs of `h` for this factor; a PSD factor of size
    /// `p` uses its `p(p+1)/2` upper-triangular entries in row-major order.
    pub fn len(&self) -> usize {
        match *self {
            ConeFactor::Psd { dim } => dim * (dim + 1) / 2,
            ConeFactor::Nonneg { dim } | ConeFactor::Zero { dim } | ConeFactor::Free { dim } => dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Element of one cone factor's space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KPart {
    Mat(SymMat),
    Vec(Vec<f64>),
}

impl KPart {
    pub fn zero(f: &ConeFactor) -> KPart {
        match *f {
            ConeFactor::Psd { dim } => KPart::Mat(SymMat::zeros(dim)),
            other => KPart::Vec(vec![0.0; other.len()]),
        }
    }

    pub fn inner(&self, other: &KPart) -> f64 {
        match (self, other) {
            (KPart::Mat(a), KPart::Mat(b)) => a.inner(b),
            (KPart::Vec(a), KPart::Vec(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            _ => f64::NAN,
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            KPart::Mat(a) => a.frob(),
            KPart::Vec(a) => a.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    fn matches(&self, f: &ConeFactor) -> bool {
        match (self, f) {
            (KPart::Mat(a), ConeFactor::Psd { dim }) => a.n() == *dim,
            (KPart::Vec(v), ConeFactor::Nonneg { .. } | ConeFactor::Zero { .. } | ConeFactor::Free { .. }) => {
                v.len() == f.len()
            }
            _ => false,
        }
    }
}

/// Upper-triangular index pairs of an `n × n` matrix in row-major order.
pub fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}

fn mat_from_entries(n: usize, v: &[f64]) -> SymMat {
    let mut m = SymMat::zeros(n);
    for (k, (i, j)) in upper_pairs(n).into_iter().enumerate() {
        m.set(i, j, v[k]);
    }
    m
}

/// `min φ(x)  s.t.  h(x) ∈ K,  S₊ ∋ θ(x) ⊥ ζ(x) ∈ S₋` with degree-≤2
/// polynomial data. Matrix-valued maps list their upper-triangular entries
/// in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub m: usize,
    pub n: usize,
    #[serde(rename = "K", default)]
    pub cone: Vec<ConeFactor>,
    pub phi: Poly2,
    #[serde(default)]
    pub h: Vec<Poly2>,
    pub theta: Vec<Poly2>,
    pub zeta: Vec<Poly2>,
}

/// Values of `h`, `θ`, `ζ` (or of their derivatives) at a point.
#[derive(Clone, Debug)]
pub struct MapValues {
    pub k: Vec<KPart>,
    pub theta: SymMat,
    pub zeta: SymMat,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        let kl: usize = self.cone.iter().map(|f| f.len()).sum();
        if self.h.len() != kl {
            return Err(Error::Dimension(format!("h has {} entries, K needs {kl}", self.h.len())));
        }
        let tl = self.n * (self.n + 1) / 2;
        if self.theta.len() != tl || self.zeta.len() != tl {
            return Err(Error::Dimension(format!(
                "theta and zeta need {tl} entries each for n = {}, got {} and {}",
                self.n,
                self.theta.len(),
                self.zeta.len()
            )));
        }
        self.phi.check(self.m, "phi")?;
        for (name, list) in [("h", &self.h), ("theta", &self.theta), ("zeta", &self.zeta)] {
            for (i, p) in list.iter().enumerate() {
                p.check(self.m, &format!("{name}[{i}]"))?;
            }
        }
        Ok(())
    }

    pub fn check_point(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.m {
            return Err(Error::Dimension(format!("point has length {}, expected {}", x.len(), self.m)));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("point has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn check_multipliers(&self, mult: &Multipliers) -> Result<()> {
        if mult.xi.len() != self.cone.len() || !mult.xi.iter().zip(&self.cone).all(|(p, f)| p.matches(f)) {
            return Err(Error::Dimension("ξ does not match the cone factors".into()));
        }
        if mult.gamma1.n() != self.n || mult.gamma2.n() != self.n {
            return Err(Error::Dimension(format!("Γ¹ and Γ² must be {0}x{0}", self.n)));
        }
        Ok(())
    }

    fn assemble(&self, f: impl Fn(&Poly2) -> f64) -> MapValues {
        let mut k = Vec::with_capacity(self.cone.len());
        let mut off = 0;
        for fac in &self.cone {
            let vals: Vec<f64> = self.h[off..off + fac.len()].iter().map(&f).collect();
            off += fac.len();
            k.push(match *fac {
                ConeFactor::Psd { dim } => KPart::Mat(mat_from_entries(dim, &vals)),
                _ => KPart::Vec(vals),
            });
        }
        let tv: Vec<f64> = self.theta.iter().map(&f).collect();
        let zv: Vec<f64> = self.zeta.iter().map(&f).collect();
        MapValues {
            k,
            theta: mat_from_entries(self.n, &tv),
            zeta: mat_from_entries(self.n, &zv),
        }
    }

    /// `Υ(x) = (h(x); θ(x); ζ(x))`.
    pub fn eval(&self, x: &DVector<f64>) -> MapValues {
        self.assemble(|p| p.value(x))
    }

    /// `Υ′(x) d`.
    pub fn deriv(&self, x: &DVector<f64>, d: &DVector<f64>) -> MapValues {
        self.assemble(|p| p.gradient(x).dot(d))
    }

    /// `∇²Υ(x)(d, d)`.
    pub fn second(&self, d: &DVector<f64>) -> MapValues {
        self.assemble(|p| p.second(d))
    }

    /// Columns `Υ′(x) e_i` flattened into the order of the constraint
    /// outputs, one row per scalar output.
    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let rows: Vec<&Poly2> = self.h.iter().chain(&self.theta).chain(&self.zeta).collect();
        let mut j = DMatrix::zeros(rows.len(), self.m);
        for (r, p) in rows.iter().enumerate() {
            j.set_row(r, &p.gradient(x).transpose());
        }
        j
    }

    /// Flattens map values into the output order used by [`Self::jacobian`].
    pub fn flatten(&self, v: &MapValues) -> DVector<f64> {
        let mut out = Vec::new();
        for part in &v.k {
            match part {
                KPart::Mat(a) => out.extend(upper_pairs(a.n()).into_iter().map(|(i, j)| a.get(i, j))),
                KPart::Vec(a) => out.extend_from_slice(a),
            }
        }
        for m in [&v.theta, &v.zeta] {
            out.extend(upper_pairs(self.n).into_iter().map(|(i, j)| m.get(i, j)));
        }
        DVector::from_vec(out)
    }
}

/// Candidate multipliers `(ξ, Γ¹, Γ²)`; `ξ` has one part per cone factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Multipliers {
    #[serde(default)]
    pub xi: Vec<KPart>,
    pub gamma1: SymMat,
    pub gamma2: SymMat,
}

impl Multipliers {
    pub fn zeros(spec: &ProblemSpec) -> Self {
        Multipliers {
            xi: spec.cone.iter().map(KPart::zero).collect(),
            gamma1: SymMat::zeros(spec.n),
            gamma2: SymMat::zeros(spec.n),
        }
    }
}
