//! Stationarity and second-order conditions for programs over `K × Ω`.

mod cone;
mod lagrangian;
mod problem;
mod sonc;

pub use cone::{feasibility_deficit, normal_deficit, sigma_factor, tangent_deficit, tangent_repair};
pub use lagrangian::{
    critical_cone_test, feasibility, jet_report, lagrangian_jet, stationarity_residual,
    FeasibilityReport, Flavor, LagrangianJet, StationarityOptions, StationarityReport, CQ_BANNER,
};
pub use problem::{upper_pairs, ConeFactor, KPart, MapValues, Multipliers, Poly2, ProblemSpec};
pub use sonc::{
    sonc_check, sonc_margin, sosc_check, ConditionReport, ConditionVerdict, SampledCheck, SamplerConfig,
    SecondOrderTol, Strategy, Variant,
};
