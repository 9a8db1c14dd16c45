//! Membership tests and structural data for the complementarity set
//! `Ω = {(X, Y) : S₊ ∋ X ⊥ Y ∈ S₋}`: the set itself, its tangent cone, the
//! Clarke tangent cone and its polar, normal cones, the second-order tangent
//! set in both derivative and block-structural form, a distance-curve oracle
//! and support functions over second-order tangent sets.

mod cases;
mod clarke;
mod curve;
mod membership;
mod sigma;
mod tangent2;

pub use cases::{special_case, Case, CaseInstance};
pub use clarke::{
    clarke_polar_test, clarke_tangent_test, limiting_normal_test, regular_normal_test,
    sample_clarke_polar, sample_clarke_tangent, sample_tangent, sigma_table,
};
pub use curve::{curve_to_omega, CurvePoint};
pub use membership::{
    in_omega, tangent_test, CCPair, MembershipReport, Verdict, Violation, DEFAULT_TOL,
};
pub use sigma::{
    break_multipliers, finite_multipliers, recession_ray, sigma_tangent2_nsd, sigma_tangent2_omega, sigma_tangent2_psd,
    SigmaValue,
};
pub use tangent2::{
    tangent2_agree, tangent2_structural, tangent2_test, Agreement, Basis, BlockKind, BlockRule,
    Coords, Tangent2Data,
};
