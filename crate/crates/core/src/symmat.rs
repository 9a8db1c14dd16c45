//! Dense symmetric matrices.
//!
//! `SymMat` stores the full square array and keeps it exactly symmetric: every
//! constructor either checks the input against the symmetry tolerance or
//! averages it with its transpose.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative symmetry tolerance applied when matrices enter the library.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SymMat(DMatrix<f64>);

impl SymMat {
    /// Validates symmetry and finiteness, then stores the symmetrized matrix.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        for j in 0..n {
            for i in 0..n {
                if !m[(i, j)].is_finite() {
                    return Err(Error::NonFinite(i, j));
                }
            }
        }
        let tol = SYMMETRY_TOL * m.norm().max(1.0);
        let asym = asymmetry(&m);
        if asym > tol {
            return Err(Error::NotSymmetric { asym, tol });
        }
        Ok(Self::symmetrize(m))
    }

    /// Averages `m` with its transpose. Used for matrices that are symmetric
    /// in exact arithmetic but were assembled from floating-point products.
    pub fn symmetrize(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymMat((m + t) * 0.5)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::Dimension(format!(
                "row {} has length {}, expected {}",
                bad,
                rows[bad].len(),
                n
            )));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn zeros(n: usize) -> Self {
        SymMat(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMat(DMatrix::identity(n, n))
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        SymMat(DMatrix::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 }))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn mat(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Sets entries (i,j) and (j,i).
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.0[(i, j)] = v;
        self.0[(j, i)] = v;
    }

    pub fn frob(&self) -> f64 {
        self.0.norm()
    }

    /// Trace inner product.
    pub fn inner(&self, other: &SymMat) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| (0..self.n()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    /// `Uᵀ A U` for a matrix `U` with orthonormal (or arbitrary) columns.
    pub fn congruence_t(&self, u: &DMatrix<f64>) -> SymMat {
        SymMat::symmetrize(u.transpose() * &self.0 * u)
    }

    /// `U A Uᵀ`.
    pub fn congruence(&self, u: &DMatrix<f64>) -> SymMat {
        SymMat::symmetrize(u * &self.0 * u.transpose())
    }

    pub fn scale(&self, s: f64) -> SymMat {
        SymMat(&self.0 * s)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

/// Largest entrywise deviation from symmetry.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Frobenius norm of a pair of matrices viewed as one vector.
pub fn pair_norm(a: &SymMat, b: &SymMat) -> f64 {
    (a.frob().powi(2) + b.frob().powi(2)).sqrt()
}

impl Add for &SymMat {
    type Output = SymMat;
    fn add(self, rhs: &SymMat) -> SymMat {
        SymMat(&self.0 + &rhs.0)
    }
}

impl Add for SymMat {
    type Output = SymMat;
    fn add(self, rhs: SymMat) -> SymMat {
        SymMat(self.0 + rhs.0)
    }
}

impl AddAssign<&SymMat> for SymMat {
    fn add_assign(&mut self, rhs: &SymMat) {
        self.0 += &rhs.0;
    }
}

impl Sub for &SymMat {
    type Output = SymMat;
    fn sub(self, rhs: &SymMat) -> SymMat {
        SymMat(&self.0 - &rhs.0)
    }
}

impl Sub for SymMat {
    type Output = SymMat;
    fn sub(self, rhs: SymMat) -> SymMat {
        SymMat(self.0 - rhs.0)
    }
}

impl Mul<f64> for &SymMat {
    type Output = SymMat;
    fn mul(self, s: f64) -> SymMat {
        SymMat(&self.0 * s)
    }
}

impl Mul<f64> for SymMat {
    type Output = SymMat;
    fn mul(self, s: f64) -> SymMat {
        SymMat(self.0 * s)
    }
}

impl Neg for &SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        SymMat(-&self.0)
    }
}

impl Neg for SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        SymMat(-self.0)
    }
}

/// Serialized as `{"n": n, "rows": [[...], ...]}`.
impl serde::Serialize for SymMat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("SymMat", 2)?;
        st.serialize_field("n", &self.n())?;
        st.serialize_field("rows", &self.rows())?;
        st.end()
    }
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObj {
    n: usize,
    rows: Vec<Vec<f64>>,
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum RawMat {
    Obj(RawObj),
    Rows(Vec<Vec<f64>>),
}

/// Accepts `{"n": n, "rows": [...]}` or a bare array of rows and validates
/// size, finiteness and symmetry.
impl<'de> serde::Deserialize<'de> for SymMat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rows = match RawMat::deserialize(d).map_err(|_| {
            D::Error::custom("expected a matrix: {\"n\", \"rows\"} or an array of rows")
        })? {
            RawMat::Obj(RawObj { n, rows }) if rows.len() != n => {
                return Err(D::Error::custom(format!("\"n\" is {n} but {} rows given", rows.len())))
            }
            RawMat::Obj(RawObj { rows, .. }) | RawMat::Rows(rows) => rows,
        };
        SymMat::from_rows(&rows).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.1, 0.0]);
        assert!(matches!(SymMat::new(m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn symmetrizes_roundoff() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0 + 1e-15, 0.0]);
        let s = SymMat::new(m).unwrap();
        assert_eq!(s.get(0, 1), s.get(1, 0));
    }

    #[test]
    fn rejects_nan() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 0.0]);
        assert!(matches!(SymMat::new(m), Err(Error::NonFinite(..))));
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows = vec![vec![1.0, 0.0], vec![0.0]];
        assert!(SymMat::from_rows(&rows).is_err());
    }

    #[test]
    fn inner_is_trace_product() {
        let a = SymMat::from_rows(&[vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let b = SymMat::from_rows(&[vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(a.inner(&b), 2.0 + 2.0 + 3.0);
    }
}

