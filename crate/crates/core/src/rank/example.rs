//! The three-by-three worked example: `ϑ(X) = ½(X₁₁ − 1)² + X₃₃ + 2X₁₂²`
//! at `X* = W* = Diag(1, 0, 0)`. Every displayed quantity is compared with
//! what the engine computes.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::{tangent2_test, CCPair};
use crate::instances::{normal, rng_from, DEFAULT_SEED};
use crate::optimality::{
    critical_cone_test, sonc_margin, stationarity_residual, Flavor, KPart, Multipliers, Poly2, ProblemSpec,
    SecondOrderTol, StationarityOptions, Variant, CQ_BANNER,
};
use crate::symmat::SymMat;

use super::{build_mpec, lift_point, lift_multipliers, mpec_point, RankInstance};

const TOL: f64 = 1e-9;

pub struct ExampleSetup {
    pub instance: RankInstance,
    pub spec: ProblemSpec,
    pub point: DVector<f64>,
    pub x: SymMat,
    pub w: SymMat,
}

impl ExampleSetup {
    pub fn new() -> Result<Self> {
        // upper entries (X11, X12, X13, X22, X23, X33)
        let mut quad = vec![vec![0.0; 6]; 6];
        quad[0][0] = 1.0;
        quad[1][1] = 4.0;
        let instance = RankInstance {
            n: 3,
            loss: Poly2 {
                c: 0.5,
                lin: vec![-1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
                quad,
            },
        };
        let spec = build_mpec(&instance)?;
        let x = SymMat::diag(&[1.0, 0.0, 0.0]);
        let w = SymMat::diag(&[1.0, 0.0, 0.0]);
        Ok(ExampleSetup {
            point: mpec_point(&x, &w),
            instance,
            spec,
            x,
            w,
        })
    }

    /// `ξ = Diag(0, −1, −1)`, `Γ¹ = Diag(0, 0, −1)`, `Γ² = Diag(−1, 0, 0)`.
    pub fn displayed_multipliers() -> Multipliers {
        Multipliers {
            xi: vec![KPart::Mat(SymMat::diag(&[0.0, -1.0, -1.0]))],
            gamma1: SymMat::diag(&[0.0, 0.0, -1.0]),
            gamma2: SymMat::diag(&[-1.0, 0.0, 0.0]),
        }
    }

    /// The displayed critical direction `d = (G, H)`.
    pub fn direction(g11: f64, g12: f64, g13: f64) -> (SymMat, SymMat) {
        let g = SymMat::from_rows(&[vec![g11, g12, g13], vec![g12, 0.0, 0.0], vec![g13, 0.0, 0.0]]).unwrap();
        let h = SymMat::from_rows(&[vec![0.0, g12, g13], vec![g12, 0.0, 0.0], vec![g13, 0.0, 0.0]]).unwrap();
        (g, h)
    }

    /// The displayed `(S, T)` template; `free = [S₁₁, T₁₂, T₁₃, T₂₂, T₂₃, T₃₃]`.
    pub fn template(g11: f64, g12: f64, g13: f64, free: [f64; 6]) -> (SymMat, SymMat) {
        let [s11, t12, t13, t22, t23, t33] = free;
        let s = SymMat::from_rows(&[
            vec![s11, t12 + 2.0 * g11 * g12, t13 + 2.0 * g11 * g13],
            vec![t12 + 2.0 * g11 * g12, 2.0 * g12 * g12, 2.0 * g12 * g13],
            vec![t13 + 2.0 * g11 * g13, 2.0 * g12 * g13, 2.0 * g13 * g13],
        ])
        .unwrap();
        let t = SymMat::from_rows(&[
            vec![-2.0 * (g12 * g12 + g13 * g13), t12, t13],
            vec![t12, t22, t23],
            vec![t13, t23, t33],
        ])
        .unwrap();
        (s, t)
    }

    pub fn displayed_sigma(g: [f64; 3]) -> f64 {
        2.0 + 2.0 * g[2] * g[2]
    }

    pub fn displayed_quadratic(g: [f64; 3]) -> f64 {
        g[0] * g[0] + 8.0 * g[1] * g[1]
    }

    pub fn displayed_margin(g: [f64; 3]) -> f64 {
        Self::displayed_quadratic(g) - Self::displayed_sigma(g)
    }

    pub fn decision(g: [f64; 3]) -> DVector<f64> {
        let (gg, hh) = Self::direction(g[0], g[1], g[2]);
        mpec_point(&gg, &hh)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Clause {
    pub id: char,
    pub claim: &'static str,
    pub passed: bool,
    pub checked: usize,
    pub max_error: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridRow {
    pub g: [f64; 3],
    pub sigma_displayed: f64,
    pub sigma_computed: Option<f64>,
    pub quadratic_displayed: f64,
    pub quadratic_computed: f64,
    pub margin_displayed: f64,
    pub margin_computed: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExampleReport {
    pub passed: bool,
    pub first_failure: Option<char>,
    pub clauses: Vec<Clause>,
    pub stationarity_lift_multipliers: f64,
    pub grid: Vec<GridRow>,
    pub banner: &'static str,
}

fn grid() -> Vec<[f64; 3]> {
    let v = [-1.0, 0.0, 1.0];
    let mut out = Vec::with_capacity(27);
    for &a in &v {
        for &b in &v {
            for &c in &v {
                out.push([a, b, c]);
            }
        }
    }
    out
}

fn clause(id: char, claim: &'static str, errors: &[(String, f64)], bound: f64) -> Clause {
    let (mut worst, mut at) = (0.0f64, String::new());
    for (label, e) in errors {
        if !(*e <= worst) {
            worst = *e;
            at = label.clone();
        }
    }
    let passed = worst <= bound;
    Clause {
        id,
        claim,
        passed,
        checked: errors.len(),
        max_error: worst,
        detail: if passed {
            format!("max error {worst:.3e}")
        } else {
            format!("max error {worst:.3e} at {at}")
        },
    }
}

fn gap(a: f64, b: Option<f64>) -> f64 {
    b.map_or(f64::INFINITY, |b| (a - b).abs())
}

/// Runs all six clauses. Clauses (c) uses `samples` random parameter draws.
pub fn example1(samples: usize) -> Result<ExampleReport> {
    let ex = ExampleSetup::new()?;
    let mult = ExampleSetup::displayed_multipliers();
    let opts = StationarityOptions::default();
    let mut rng = rng_from(DEFAULT_SEED);

    let lift = lift_point(&ex.x, None)?;
    let lifted = lift_multipliers(&ex.instance, &lift);
    let lift_res = stationarity_residual(&ex.spec, &lift.point(), &lifted, Flavor::C, &opts)?.residual;

    let mut a = Vec::new();
    for fl in [Flavor::C, Flavor::Regular] {
        let r = stationarity_residual(&ex.spec, &ex.point, &mult, fl, &opts)?;
        a.push((format!("{fl:?} flavor"), r.residual));
    }

    let mut b = Vec::new();
    let mut params: Vec<[f64; 3]> = grid();
    params.extend((0..samples).map(|_| [normal(&mut rng), normal(&mut rng), normal(&mut rng)]));
    for g in &params {
        let d = ExampleSetup::decision(*g);
        let r = critical_cone_test(&ex.spec, &ex.point, &d, 1e-8)?;
        b.push((format!("G = {g:?}"), if r.is_in() { r.residual } else { f64::INFINITY }));
    }

    let base = CCPair::new(ex.x.clone(), &ex.w - &SymMat::identity(3))?;
    let mut c = Vec::new();
    for g in params.iter().skip(27) {
        let free = std::array::from_fn(|_| normal(&mut rng));
        let (gg, hh) = ExampleSetup::direction(g[0], g[1], g[2]);
        let (s, t) = ExampleSetup::template(g[0], g[1], g[2], free);
        let r = tangent2_test(&base, &gg, &hh, &s, &t, 1e-8)?;
        c.push((format!("G = {g:?}, free = {free:?}"), if r.is_in() { r.residual } else { f64::INFINITY }));
    }

    let (mut d, mut e, mut f) = (Vec::new(), Vec::new(), Vec::new());
    let mut rows = Vec::new();
    for g in grid() {
        let dir = ExampleSetup::decision(g);
        let r = sonc_margin(&ex.spec, &ex.point, &mult, &dir, Variant::Tight, SecondOrderTol::default())?;
        let sigma = r.sigma.is_finite().then_some(r.sigma.value);
        let label = format!("G = {g:?}");
        d.push((label.clone(), gap(ExampleSetup::displayed_sigma(g), sigma)));
        e.push((label.clone(), (ExampleSetup::displayed_quadratic(g) - r.quadratic).abs()));
        f.push((label, gap(ExampleSetup::displayed_margin(g), r.margin)));
        rows.push(GridRow {
            g,
            sigma_displayed: ExampleSetup::displayed_sigma(g),
            sigma_computed: sigma,
            quadratic_displayed: ExampleSetup::displayed_quadratic(g),
            quadratic_computed: r.quadratic,
            margin_displayed: ExampleSetup::displayed_margin(g),
            margin_computed: r.margin,
        });
    }

    let clauses = vec![
        clause('a', "displayed multipliers are stationary (residual <= 1e-10)", &a, 1e-10),
        clause('b', "displayed directions are critical", &b, 1e-8),
        clause('c', "displayed (S, T) template lies in the second-order tangent set", &c, 1e-8),
        clause('d', "sigma = 2 + 2 G13^2", &d, TOL),
        clause('e', "quadratic form = G11^2 + 8 G12^2", &e, TOL),
        clause('f', "margin = G11^2 + 8 G12^2 - 2 - 2 G13^2", &f, TOL),
    ];
    let first_failure = clauses.iter().find(|c| !c.passed).map(|c| c.id);
    Ok(ExampleReport {
        passed: first_failure.is_none(),
        first_failure,
        clauses,
        stationarity_lift_multipliers: lift_res,
        grid: rows,
        banner: CQ_BANNER,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setup_is_feasible_and_lift_agrees() {
        let ex = ExampleSetup::new().unwrap();
        let feas = crate::optimality::feasibility(&ex.spec, &ex.point, 1e-12).unwrap();
        assert!(feas.feasible);
        let lift = lift_point(&ex.x, None).unwrap();
        assert_eq!(lift.w, ex.w);
        let m = lift_multipliers(&ex.instance, &lift);
        let shown = ExampleSetup::displayed_multipliers();
        assert_eq!(m.gamma1, shown.gamma1);
        assert_eq!(m.gamma2, shown.gamma2);
        assert_eq!(m.xi, shown.xi);
    }

    #[test]
    fn report_runs() {
        let r = example1(20).unwrap();
        for c in &r.clauses {
            eprintln!("{} {} {}", c.id, c.passed, c.detail);
        }
        for row in &r.grid {
            eprintln!("{row:?}");
        }
        assert!(r.clauses[0].passed && r.clauses[1].passed);
    }
}
