use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric: max |A_ij - A_ji| = {asym:.3e} exceeds {tol:.3e}")]
    NotSymmetric { asym: f64, tol: f64 },

    #[error("non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),

    #[error("symmetric eigensolver did not converge (n = {n}, ||A||_F = {norm:.3e}, max |A_ij| = {max_abs:.3e})")]
    Eigen { n: usize, norm: f64, max_abs: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("direction is not tangent to the complementarity set (residual {0:.3e})")]
    NotTangent(f64),

    #[error("point is infeasible: {0}")]
    Infeasible(String),

    #[error("no multipliers supplied; run stationarity_residual on a candidate first")]
    EmptyMultiplierSet,

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
