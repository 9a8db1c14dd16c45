use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    sigma_tangent2_nsd, sigma_tangent2_omega, sigma_tangent2_psd, tangent2_structural, CCPair, MembershipReport,
    SigmaValue,
};
use crate::instances::{normal, rng_for, Rng64, DEFAULT_SEED};
use crate::projpsd::proj_dir1_spec;

use super::cone::{sigma_factor, tangent_repair};
use super::lagrangian::{
    critical_cone_at, lagrangian_jet, require_feasible, stationarity_residual, Flavor, StationarityOptions, CQ_BANNER,
};
use super::problem::{MapValues, Multipliers, ProblemSpec};

/// Which second-order tangent set the complementarity part of `σ` uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `T²_Ω`.
    Tight,
    /// `T²_{S₊} × T²_{S₋}` of the convex relaxation `S₊ × S₋ ⊇ Ω`.
    Relaxed,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tight" => Ok(Variant::Tight),
            "relaxed" => Ok(Variant::Relaxed),
            other => Err(Error::Invalid(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionVerdict {
    Satisfied,
    Violated,
    /// `σ = +∞`: the inequality carries no information for this direction.
    Vacuous,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    pub direction: Vec<f64>,
    pub variant: Variant,
    pub gradient_norm: f64,
    /// Raw multiplier-set residuals for the Clarke and regular flavors.
    pub residual_c: f64,
    pub residual_regular: f64,
    pub critical: MembershipReport,
    /// `⟨d, ∇²ₓₓL d⟩`.
    pub quadratic: f64,
    pub sigma_k: SigmaValue,
    pub sigma_omega: SigmaValue,
    pub sigma: SigmaValue,
    /// `quadratic − sigma`, present only when `sigma` is finite.
    pub margin: Option<f64>,
    pub verdict: ConditionVerdict,
    pub warnings: Vec<String>,
    pub banner: &'static str,
}

fn add_sigma(a: SigmaValue, b: SigmaValue) -> SigmaValue {
    if a.is_finite() && b.is_finite() {
        SigmaValue::finite(a.value + b.value)
    } else {
        let mut notes = a.notes;
        notes.extend(b.notes);
        SigmaValue::infinite(notes)
    }
}

/// Tolerances used by the second-order evaluations.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SecondOrderTol {
    /// Membership and `σ` finiteness tests.
    pub tol: f64,
    /// A margin below `−margin_tol` counts as a violation.
    pub margin_tol: f64,
}

impl Default for SecondOrderTol {
    fn default() -> Self {
        SecondOrderTol {
            tol: 1e-8,
            margin_tol: 1e-6,
        }
    }
}

struct Prepared<'a> {
    spec: &'a ProblemSpec,
    x: &'a DVector<f64>,
    base: CCPair,
    at: MapValues,
}

impl<'a> Prepared<'a> {
    fn new(spec: &'a ProblemSpec, x: &'a DVector<f64>, tol: f64) -> Result<Self> {
        spec.validate()?;
        let (_, base) = require_feasible(spec, x, tol)?;
        let at = spec.eval(x);
        Ok(Prepared { spec, x, base, at })
    }

    fn sigma(&self, mult: &Multipliers, dv: &MapValues, variant: Variant, tol: f64) -> Result<(SigmaValue, SigmaValue)> {
        let mut sk = SigmaValue::finite(0.0);
        for (((f, a), v), xi) in self.spec.cone.iter().zip(&self.at.k).zip(&dv.k).zip(&mult.xi) {
            sk = add_sigma(sk, sigma_factor(f, a, v, xi, tol)?);
        }
        let so = match variant {
            Variant::Tight => {
                let data = tangent2_structural(&self.base, &dv.theta, &dv.zeta)?;
                sigma_tangent2_omega(&mult.gamma1, &mult.gamma2, &data, tol)?
            }
            Variant::Relaxed => add_sigma(
                sigma_tangent2_psd(&mult.gamma1, self.base.x(), &dv.theta, tol)?,
                sigma_tangent2_nsd(&mult.gamma2, self.base.y(), &dv.zeta, tol)?,
            ),
        };
        Ok((sk, so))
    }

    fn margin(&self, mult: &Multipliers, d: &DVector<f64>, variant: Variant, t: SecondOrderTol) -> Result<ConditionReport> {
        self.spec.check_point(d)?;
        let (_, grad, hess) = lagrangian_jet(self.spec, self.x, mult)?;
        let sopts = StationarityOptions {
            tol: t.tol,
            ..Default::default()
        };
        let rc = stationarity_residual(self.spec, self.x, mult, Flavor::C, &sopts)?;
        let rr = stationarity_residual(self.spec, self.x, mult, Flavor::Regular, &sopts)?;
        let critical = critical_cone_at(self.spec, self.x, &self.base, d, t.tol)?;
        let mut warnings = Vec::new();
        if !critical.is_in() {
            warnings.push(format!("direction is not critical (residual {:.3e})", critical.residual));
        }
        if !rc.omega.is_in() && !rr.omega.is_in() || rc.gradient_norm > t.tol {
            warnings.push("multipliers do not satisfy the stationarity system".into());
        }
        let quadratic = d.dot(&(&hess * d));
        let dv = self.spec.deriv(self.x, d);
        let (sigma_k, sigma_omega) = self.sigma(mult, &dv, variant, t.tol)?;
        let sigma = add_sigma(sigma_k.clone(), sigma_omega.clone());
        let margin = sigma.is_finite().then_some(quadratic - sigma.value);
        let verdict = match margin {
            None => ConditionVerdict::Vacuous,
            Some(m) if m < -t.margin_tol => ConditionVerdict::Violated,
            Some(_) => ConditionVerdict::Satisfied,
        };
        Ok(ConditionReport {
            direction: d.iter().copied().collect(),
            variant,
            gradient_norm: grad.norm(),
            residual_c: rc.residual,
            residual_regular: rr.residual,
            critical,
            quadratic,
            sigma_k,
            sigma_omega,
            sigma,
            margin,
            verdict,
            warnings,
            banner: CQ_BANNER,
        })
    }
}

/// `⟨d, ∇²ₓₓL d⟩ − σ((ξ, Γ) | T²(Υ(x); Υ′(x)d))`. The Hessian of `L`
/// already carries the curvature `∇²Υ(x)(d, d)`, so `σ` is taken over the
/// second-order tangent set itself.
pub fn sonc_margin(
    spec: &ProblemSpec,
    x: &DVector<f64>,
    mult: &Multipliers,
    d: &DVector<f64>,
    variant: Variant,
    tol: SecondOrderTol,
) -> Result<ConditionReport> {
    Prepared::new(spec, x, tol.tol)?.margin(mult, d, variant, tol)
}

/// How critical directions are drawn.
#[derive(Clone, Debug)]
pub enum Strategy {
    /// Gaussian directions kept when they pass the critical-cone test.
    Rejection,
    /// Gaussian directions pushed onto the linearized constraints: the image
    /// `Υ′(x)d` is replaced by a nearby tangent vector, lifted back by least
    /// squares, and the objective slope is cut to `≤ 0`; a few rounds, then
    /// the critical-cone test.
    Projected,
    /// Random combinations of the given vectors (nonnegative ones when
    /// `nonneg`), kept when they pass the critical-cone test.
    Generators { vectors: Vec<DVector<f64>>, nonneg: bool },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Rejection => "rejection",
            Strategy::Projected => "projected",
            Strategy::Generators { .. } => "generators",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SamplerConfig {
    pub samples: usize,
    pub seed: u64,
    pub strategy: Strategy,
    /// Draws per sample before giving up on it.
    pub attempts: usize,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    pub tol: SecondOrderTol,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            samples: 1000,
            seed: DEFAULT_SEED,
            strategy: Strategy::Projected,
            attempts: 20,
            jobs: None,
            tol: SecondOrderTol::default(),
        }
    }
}

fn gaussian(rng: &mut Rng64, m: usize) -> DVector<f64> {
    DVector::from_fn(m, |_, _| normal(rng))
}

fn unit(d: DVector<f64>) -> Option<DVector<f64>> {
    let n = d.norm();
    (n > 1e-12).then(|| d / n)
}

struct Projector {
    jac: nalgebra::DMatrix<f64>,
    pinv: nalgebra::DMatrix<f64>,
    gphi: DVector<f64>,
}

impl Projector {
    fn new(p: &Prepared) -> Result<Self> {
        let jac = p.spec.jacobian(p.x);
        let pinv = if jac.nrows() == 0 {
            nalgebra::DMatrix::zeros(p.spec.m, 0)
        } else {
            jac.clone()
                .pseudo_inverse(1e-12 * jac.norm().max(1.0))
                .map_err(|e| Error::Invalid(e.to_string()))?
        };
        Ok(Projector {
            jac,
            pinv,
            gphi: p.spec.phi.gradient(p.x),
        })
    }

    fn round(&self, p: &Prepared, d: &DVector<f64>) -> Result<DVector<f64>> {
        let dv = p.spec.deriv(p.x, d);
        let mut k = Vec::with_capacity(dv.k.len());
        for ((f, a), v) in p.spec.cone.iter().zip(&p.at.k).zip(&dv.k) {
            k.push(tangent_repair(f, a, v)?);
        }
        let h = &dv.theta + &dv.zeta;
        let f = proj_dir1_spec(p.base.spec(), &h)?;
        let g = &h - &f;
        let target = p.spec.flatten(&MapValues { k, theta: f, zeta: g });
        let mut out = d + &self.pinv * (target - &self.jac * d);
        let slope = self.gphi.dot(&out);
        let gg = self.gphi.norm_squared();
        if slope > 0.0 && gg > 0.0 {
            out -= &self.gphi * (slope / gg);
        }
        Ok(out)
    }
}

/// Alternating repairs converge linearly at a rate set by the angle between
/// the tangent pieces and the `φ`-slope cut; the candidate is tested every
/// eight rounds.
const PROJECTION_ROUNDS: usize = 256;

fn draw(
    p: &Prepared,
    proj: Option<&Projector>,
    cfg: &SamplerConfig,
    index: usize,
) -> Result<Option<(DVector<f64>, usize)>> {
    use rand::Rng;
    let mut rng = rng_for(cfg.seed, index as u64);
    for attempt in 1..=cfg.attempts.max(1) {
        let cand = match &cfg.strategy {
            Strategy::Rejection => gaussian(&mut rng, p.spec.m),
            Strategy::Projected => {
                let mut d = gaussian(&mut rng, p.spec.m);
                let proj = proj.expect("projector is built for this strategy");
                for round in 0..PROJECTION_ROUNDS {
                    d = proj.round(p, &d)?;
                    if round % 8 == 7 {
                        if let Some(u) = unit(d.clone()) {
                            if critical_cone_at(p.spec, p.x, &p.base, &u, cfg.tol.tol)?.is_in() {
                                return Ok(Some((u, attempt)));
                            }
                        }
                    }
                }
                d
            }
            Strategy::Generators { vectors, nonneg } => {
                let mut d = DVector::zeros(p.spec.m);
                for v in vectors {
                    let c = if *nonneg { rng.gen::<f64>() } else { normal(&mut rng) };
                    d += v * c;
                }
                d
            }
        };
        let Some(d) = unit(cand) else { continue };
        if critical_cone_at(p.spec, p.x, &p.base, &d, cfg.tol.tol)?.is_in() {
            return Ok(Some((d, attempt)));
        }
    }
    Ok(None)
}

fn in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::Invalid(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SampledCheck {
    pub kind: &'static str,
    pub variant: Variant,
    pub strategy: &'static str,
    pub seed: u64,
    pub requested: usize,
    pub accepted: usize,
    pub vacuous: usize,
    /// Smallest margin over accepted directions, each direction taking the
    /// best margin over the supplied multipliers.
    pub min_margin: Option<f64>,
    pub worst_index: Option<usize>,
    pub worst: Option<ConditionReport>,
    pub verdict: String,
    pub note: &'static str,
    pub banner: &'static str,
}

/// Per-direction best margin over the multipliers, `None` when every
/// multiplier gives `σ = +∞`.
fn best_over(
    p: &Prepared,
    mults: &[Multipliers],
    d: &DVector<f64>,
    variant: Variant,
    tol: SecondOrderTol,
) -> Result<(Option<f64>, ConditionReport)> {
    let mut best: Option<(f64, ConditionReport)> = None;
    let mut first = None;
    for m in mults {
        let r = p.margin(m, d, variant, tol)?;
        match r.margin {
            Some(v) if best.as_ref().is_none_or(|(b, _)| v > *b) => best = Some((v, r)),
            _ => {
                if first.is_none() {
                    first = Some(r);
                }
            }
        }
    }
    Ok(match best {
        Some((v, r)) => (Some(v), r),
        None => (None, first.expect("at least one multiplier")),
    })
}

fn sampled(
    kind: &'static str,
    spec: &ProblemSpec,
    x: &DVector<f64>,
    mults: &[Multipliers],
    cfg: &SamplerConfig,
    variant: Variant,
) -> Result<SampledCheck> {
    if mults.is_empty() {
        return Err(Error::EmptyMultiplierSet);
    }
    for m in mults {
        spec.check_multipliers(m)?;
    }
    let p = Prepared::new(spec, x, cfg.tol.tol)?;
    let proj = match cfg.strategy {
        Strategy::Projected => Some(Projector::new(&p)?),
        _ => None,
    };
    let results: Vec<Result<Option<(Option<f64>, ConditionReport)>>> = in_pool(cfg.jobs, || {
        (0..cfg.samples)
            .into_par_iter()
            .map(|i| match draw(&p, proj.as_ref(), cfg, i)? {
                None => Ok(None),
                Some((d, _)) => best_over(&p, mults, &d, variant, cfg.tol).map(Some),
            })
            .collect()
    })?;
    let mut accepted = 0;
    let mut vacuous = 0;
    let mut worst: Option<(f64, usize, ConditionReport)> = None;
    for (i, r) in results.into_iter().enumerate() {
        let Some((m, rep)) = r? else { continue };
        accepted += 1;
        match m {
            None => vacuous += 1,
            Some(v) => {
                if worst.as_ref().is_none_or(|(w, _, _)| v < *w) {
                    worst = Some((v, i, rep));
                }
            }
        }
    }
    let min_margin = worst.as_ref().map(|w| w.0);
    let verdict = match (kind, min_margin) {
        (_, None) => "no finite margin sampled".to_string(),
        ("sonc", Some(v)) if v < -cfg.tol.margin_tol => "necessary condition violated".to_string(),
        ("sonc", Some(_)) => "no violation found".to_string(),
        (_, Some(v)) if v > cfg.tol.margin_tol => "sufficient condition holds on samples".to_string(),
        (_, Some(_)) => "sufficient condition not established".to_string(),
    };
    Ok(SampledCheck {
        kind,
        variant,
        strategy: cfg.strategy.name(),
        seed: cfg.seed,
        requested: cfg.samples,
        accepted,
        vacuous,
        min_margin,
        worst_index: worst.as_ref().map(|w| w.1),
        worst: worst.map(|w| w.2),
        verdict,
        note: "sampled check over critical directions, not a proof",
        banner: CQ_BANNER,
    })
}

/// Smallest second-order necessary-condition margin over sampled unit
/// critical directions.
pub fn sonc_check(spec: &ProblemSpec, x: &DVector<f64>, mults: &[Multipliers], cfg: &SamplerConfig) -> Result<SampledCheck> {
    sampled("sonc", spec, x, mults, cfg, Variant::Tight)
}

/// Sampled estimate of `inf_d sup_{(ξ,Γ)} {⟨d, ∇²L d⟩ − σ}` over unit
/// critical directions.
pub fn sosc_check(
    spec: &ProblemSpec,
    x: &DVector<f64>,
    mults: &[Multipliers],
    cfg: &SamplerConfig,
    variant: Variant,
) -> Result<SampledCheck> {
    sampled("sosc", spec, x, mults, cfg, variant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimality::problem::{ConeFactor, KPart, Poly2};
    use crate::symmat::SymMat;

    /// `0 ≤ x₁ ⊥ x₂ ≤ 0`, `φ = ½ a x₁² + ½ b x₂²`.
    fn scalar(a: f64, b: f64) -> ProblemSpec {
        ProblemSpec {
            m: 2,
            n: 1,
            cone: vec![],
            phi: Poly2 {
                c: 0.0,
                lin: vec![],
                quad: vec![vec![a, 0.0], vec![0.0, b]],
            },
            h: vec![],
            theta: vec![Poly2::linear(0.0, vec![1.0, 0.0])],
            zeta: vec![Poly2::linear(0.0, vec![0.0, 1.0])],
        }
    }

    #[test]
    fn detects_descent_along_the_set() {
        let spec = scalar(-1.0, 1.0);
        let x = DVector::zeros(2);
        let m = Multipliers::zeros(&spec);
        let r = sonc_margin(&spec, &x, &m, &DVector::from_vec(vec![1.0, 0.0]), Variant::Tight, Default::default()).unwrap();
        assert_eq!(r.margin, Some(-1.0));
        assert_eq!(r.verdict, ConditionVerdict::Violated);
        let cfg = SamplerConfig {
            samples: 64,
            ..Default::default()
        };
        let c = sonc_check(&spec, &x, &[m], &cfg).unwrap();
        assert_eq!(c.verdict, "necessary condition violated");
        assert!(c.accepted > 0 && c.min_margin.unwrap() < -0.5);
    }

    #[test]
    fn convex_instance_has_positive_margins() {
        let spec = scalar(1.0, 2.0);
        let x = DVector::zeros(2);
        let m = Multipliers::zeros(&spec);
        let cfg = SamplerConfig {
            samples: 64,
            ..Default::default()
        };
        let c = sosc_check(&spec, &x, std::slice::from_ref(&m), &cfg, Variant::Tight).unwrap();
        assert!(c.min_margin.unwrap() >= 1.0 - 1e-12, "{c:?}");
        let r = sosc_check(&spec, &x, &[m], &cfg, Variant::Relaxed).unwrap();
        assert!(r.min_margin.unwrap() <= c.min_margin.unwrap() + 1e-12);
    }

    #[test]
    fn zero_direction_and_scaling() {
        let spec = scalar(-1.0, 3.0);
        let x = DVector::zeros(2);
        let m = Multipliers::zeros(&spec);
        let r = sonc_margin(&spec, &x, &m, &DVector::zeros(2), Variant::Tight, Default::default()).unwrap();
        assert_eq!(r.margin, Some(0.0));
        let d = DVector::from_vec(vec![0.0, -1.0]);
        let a = sonc_margin(&spec, &x, &m, &d, Variant::Tight, Default::default()).unwrap();
        let b = sonc_margin(&spec, &x, &m, &(&d * 2.0), Variant::Tight, Default::default()).unwrap();
        assert!((b.margin.unwrap() - 4.0 * a.margin.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn empty_multiplier_set() {
        let spec = scalar(1.0, 1.0);
        let cfg = SamplerConfig::default();
        assert!(matches!(sonc_check(&spec, &DVector::zeros(2), &[], &cfg), Err(Error::EmptyMultiplierSet)));
    }

    #[test]
    fn psd_factor_curvature_enters_sigma() {
        // min x₁ s.t. [[x₁, x₂], [x₂, 1]] ⪰ 0, i.e. x₁ ≥ x₂². At 0 with
        // ξ = Diag(−1, 0) the critical cone is the x₂ axis and the curvature
        // 2 comes entirely from σ_K = 2⟨ξ, H A† H⟩ = −2.
        let spec = ProblemSpec {
            m: 2,
            n: 1,
            cone: vec![ConeFactor::Psd { dim: 2 }],
            phi: Poly2::linear(0.0, vec![1.0, 0.0]),
            h: vec![
                Poly2::linear(0.0, vec![1.0, 0.0]),
                Poly2::linear(0.0, vec![0.0, 1.0]),
                Poly2::constant(1.0),
            ],
            theta: vec![Poly2::constant(1.0)],
            zeta: vec![Poly2::constant(0.0)],
        };
        let x = DVector::zeros(2);
        let m = Multipliers {
            xi: vec![KPart::Mat(SymMat::diag(&[-1.0, 0.0]))],
            gamma1: SymMat::zeros(1),
            gamma2: SymMat::zeros(1),
        };
        let d = DVector::from_vec(vec![0.0, 1.0]);
        let r = sonc_margin(&spec, &x, &m, &d, Variant::Tight, Default::default()).unwrap();
        assert_eq!(r.gradient_norm, 0.0);
        assert!(r.critical.is_in());
        assert!((r.sigma_k.value + 2.0).abs() < 1e-12, "{r:?}");
        assert!((r.margin.unwrap() - 2.0).abs() < 1e-12);
        let cfg = SamplerConfig {
            samples: 32,
            ..Default::default()
        };
        let c = sosc_check(&spec, &x, &[m], &cfg, Variant::Tight).unwrap();
        assert!(c.accepted > 0 && (c.min_margin.unwrap() - 2.0).abs() < 1e-9, "{c:?}");
    }
}
