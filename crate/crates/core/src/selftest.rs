//! Install check: the oracle suites at reduced sample counts.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::{curve_to_omega, special_case, tangent2_agree, tangent2_structural, Case, DEFAULT_TOL};
use crate::instances::{deriv_triple, rng_for, DerivTriple};
use crate::lowner::lowner_dir2;
use crate::oracle::{decays, dir2_roundoff, fd_dir2, residual_ladder};
use crate::projpsd::{proj_dir1_spec, proj_dir2_spec, Dir2Options, Fault};
use crate::rank::example1;
use crate::scalarfun::{MaxZero, MinZero};
use crate::spectral::Spectral;

#[derive(Clone, Copy, Debug, Default)]
pub struct SelftestConfig {
    pub seed: u64,
    pub quick: bool,
    #[doc(hidden)]
    pub fault: Option<Fault>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub checked: usize,
    pub failures: usize,
    pub worst: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub quick: bool,
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

const LADDER: [f64; 3] = [1e-2, 1e-3, 1e-4];

fn suite(name: &'static str, outcomes: Vec<Result<(bool, f64)>>, detail: impl Fn(usize, f64) -> String) -> SuiteResult {
    let checked = outcomes.len();
    let mut failures = 0;
    let mut worst = 0.0f64;
    for o in outcomes {
        match o {
            Ok((ok, w)) => {
                failures += usize::from(!ok);
                worst = worst.max(w);
            }
            Err(_) => failures += 1,
        }
    }
    SuiteResult {
        name,
        passed: failures == 0,
        checked,
        failures,
        worst,
        detail: detail(failures, worst),
    }
}

fn triple(seed: u64, i: usize) -> DerivTriple {
    let mut rng = rng_for(seed, i as u64);
    deriv_triple(&mut rng, 3 + i % 6, i % 4)
}

/// Finite differences of `Π″`: linear decay on the step ladder and a final
/// residual within `1e−4(1 + ‖W‖)`.
fn fd_suite(cfg: &SelftestConfig, count: usize) -> SuiteResult {
    let opts = Dir2Options { fault: cfg.fault };
    let out = (0..count)
        .into_par_iter()
        .map(|i| {
            let DerivTriple { z, h, w } = triple(cfg.seed, i);
            let spec = Spectral::new(&z)?;
            let d1 = proj_dir1_spec(&spec, &h)?;
            let d2 = proj_dir2_spec(&spec, &h, &w, opts)?;
            let res = residual_ladder(&LADDER, |t| fd_dir2(&MaxZero, &z, &h, &w, &d1, t), &d2)?;
            let floor: Vec<f64> = LADDER.iter().map(|&t| dir2_roundoff(z.frob(), t)).collect();
            let rel = res[2] / (1e-4 * (1.0 + w.frob()));
            Ok((rel <= 1.0 && decays(&res, 0.2, &floor), rel))
        })
        .collect();
    suite("fd-second-derivative", out, |f, w| {
        format!("{f} instances failed; worst final residual {w:.3} x bound")
    })
}

/// Closed-form `Π″` against the generic Löwner engine, and
/// `Π₊″ + Π₋″ = W` with `Π₋″` from the engine for `min(0, t)`.
fn engine_suite(cfg: &SelftestConfig, count: usize) -> SuiteResult {
    let out = (0..count)
        .into_par_iter()
        .map(|i| {
            let DerivTriple { z, h, w } = triple(cfg.seed ^ 0xE1, i);
            let spec = Spectral::new(&z)?;
            let closed = proj_dir2_spec(&spec, &h, &w, Dir2Options::default())?;
            let generic = lowner_dir2(&spec, &MaxZero, &h, &w)?.dir2;
            let minus = lowner_dir2(&spec, &MinZero, &h, &w)?.dir2;
            let e1 = (&closed - &generic).max_abs() / 1e-10;
            let e2 = (&(&closed + &minus) - &w).max_abs() / (1e-12 * (1.0 + w.frob()));
            Ok((e1 <= 1.0 && e2 <= 1.0, e1.max(e2)))
        })
        .collect();
    suite("engine-equivalence", out, |f, w| format!("{f} instances failed; worst error {w:.3} x bound"))
}

fn case_instance(seed: u64, i: usize) -> Result<crate::geometry::CaseInstance> {
    let mut rng = rng_for(seed, i as u64);
    let case = Case::ALL[i % Case::ALL.len()];
    special_case(case, 2 + (i / Case::ALL.len()) % 5, &mut rng)
}

/// Structural and derivative membership tests agree on members and on
/// single-violation non-members.
fn dual_suite(cfg: &SelftestConfig, count: usize) -> SuiteResult {
    let out = (0..count)
        .into_par_iter()
        .map(|i| {
            let ci = case_instance(cfg.seed ^ 0xD0, i)?;
            let mut rng = rng_for(cfg.seed ^ 0xD1, i as u64);
            let data = tangent2_structural(&ci.base, &ci.f, &ci.g)?;
            let (s, t) = data.sample_member(&mut rng);
            let a = tangent2_agree(&ci.base, &ci.f, &ci.g, &s, &t, DEFAULT_TOL)?;
            let mut ok = a.agree && a.derivative.is_in();
            if !data.rules().is_empty() {
                let (s, t, _) = data.sample_nonmember(&mut rng, 1e-2)?;
                let b = tangent2_agree(&ci.base, &ci.f, &ci.g, &s, &t, DEFAULT_TOL)?;
                ok &= b.agree && b.derivative.is_out();
            }
            Ok((ok, if ok { 0.0 } else { 1.0 }))
        })
        .collect();
    suite("tangent2-dual-oracle", out, |f, _| format!("{f} disagreements"))
}

/// Along the parabola through a member, `bound(t)/t²` falls by at least 5×
/// per decade (or sits at roundoff), the observable form of `o(t²)`. Steps
/// start at `1e−2`; at `0.1` large directions are still pre-asymptotic.
fn curve_suite(cfg: &SelftestConfig, count: usize) -> SuiteResult {
    let ts = LADDER;
    let out = (0..count)
        .into_par_iter()
        .map(|i| {
            let ci = case_instance(cfg.seed ^ 0xC0, i)?;
            let mut rng = rng_for(cfg.seed ^ 0xC1, i as u64);
            let (s, t) = tangent2_structural(&ci.base, &ci.f, &ci.g)?.sample_member(&mut rng);
            let scale = ci.base.z().frob() + (&ci.f + &ci.g).frob() + (&s + &t).frob();
            let mut r = Vec::with_capacity(ts.len());
            for &tt in &ts {
                r.push(curve_to_omega(&ci.base, &ci.f, &ci.g, &s, &t, tt)?.bound / (tt * tt));
            }
            let floor: Vec<f64> = ts.iter().map(|&tt| dir2_roundoff(scale, tt)).collect();
            let worst = (1..r.len())
                .filter(|&k| r[k] > floor[k] && r[k - 1] > 0.0)
                .map(|k| r[k] / r[k - 1])
                .fold(0.0f64, f64::max);
            Ok((decays(&r, 0.2, &floor), worst))
        })
        .collect();
    suite("curve-second-order", out, |f, w| format!("{f} curves failed; worst decade ratio {w:.4}"))
}

/// The worked example through the engine. The displayed multipliers,
/// critical cone and second-order template must check out, and the computed
/// σ, quadratic form and margin must match their closed forms
/// `−2G₁₃²`, `G₁₁² + 4G₁₂²` and their difference. The displayed scalar
/// values are listed separately.
fn example_suite() -> SuiteResult {
    let outcome = example1(20).map(|r| {
        let structural = r.clauses.iter().take(3).all(|c| c.passed);
        let mut worst = 0.0f64;
        for row in &r.grid {
            let [g11, g12, g13] = row.g;
            let sigma = -2.0 * g13 * g13;
            let quad = g11 * g11 + 4.0 * g12 * g12;
            let es = row.sigma_computed.map_or(f64::INFINITY, |s| (s - sigma).abs());
            let eq = (row.quadratic_computed - quad).abs();
            let em = row.margin_computed.map_or(f64::INFINITY, |m| (m - (quad - sigma)).abs());
            worst = worst.max(es).max(eq).max(em);
        }
        let failed: Vec<char> = r.clauses.iter().filter(|c| !c.passed).map(|c| c.id).collect();
        (structural && worst <= 1e-9, worst, failed)
    });
    let (ok, worst, failed) = match outcome {
        Ok(v) => v,
        Err(_) => (false, f64::INFINITY, Vec::new()),
    };
    SuiteResult {
        name: "worked-example",
        passed: ok,
        checked: 27,
        failures: usize::from(!ok),
        worst,
        detail: format!(
            "engine closed forms max error {worst:.3e}; displayed clauses not reproduced: {}",
            if failed.is_empty() { "none".to_string() } else { failed.iter().collect::<String>() }
        ),
    }
}

pub fn selftest(cfg: &SelftestConfig) -> SelftestReport {
    let (fd, dual, curve) = if cfg.quick { (24, 60, 36) } else { (200, 600, 300) };
    let suites = vec![
        fd_suite(cfg, fd),
        engine_suite(cfg, fd),
        dual_suite(cfg, dual),
        curve_suite(cfg, curve),
        example_suite(),
    ];
    SelftestReport {
        seed: cfg.seed,
        quick: cfg.quick,
        passed: suites.iter().all(|s| s.passed),
        suites,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::DEFAULT_SEED;

    #[test]
    fn quick_passes_and_fault_is_caught() {
        let cfg = SelftestConfig {
            seed: DEFAULT_SEED,
            quick: true,
            fault: None,
        };
        let r = selftest(&cfg);
        assert!(r.passed, "{r:#?}");
        let bad = selftest(&SelftestConfig {
            fault: Some(Fault::FlipPositivePairSign),
            ..cfg
        });
        assert!(!bad.suites[0].passed);
        assert!(bad.suites[1..].iter().all(|s| s.passed));
    }
}
