use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use sdcc::geometry::{
    break_multipliers, finite_multipliers, sample_clarke_tangent, sigma_tangent2_omega, special_case, tangent2_structural,
    tangent2_test, Case, CaseInstance,
};
use sdcc::instances::{gaussian_matrix, random_orthogonal, random_sym, rng_for, with_spectrum, Rng64};
use sdcc::io::{parse_matrix, parse_multipliers, parse_problem, to_json};
use sdcc::optimality::{
    lagrangian_jet, sonc_check, sonc_margin, stationarity_residual, Flavor, KPart, Multipliers, Poly2, ProblemSpec,
    SamplerConfig, SecondOrderTol, StationarityOptions, Variant,
};
use sdcc::rank::{build_mpec, lift_multipliers, lift_point, mpec_point, srcq_check, svec, upper_len, RankInstance};
use sdcc::SymMat;

fn case_instance(seed: u64, k: usize, n: usize) -> CaseInstance {
    special_case(Case::ALL[k % Case::ALL.len()], n, &mut rng_for(seed, 0)).unwrap()
}

fn case_args() -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 0usize..6, 2usize..6)
}

/// `θ = X₀ + smat(a)`, `ζ = Y₀ + smat(b)` over `x = (a, b)`, objective `½xᵀQx`.
fn chart(ci: &CaseInstance, q: Vec<Vec<f64>>) -> ProblemSpec {
    let n = ci.base.n();
    let len = upper_len(n);
    let m = 2 * len;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let map = |base: &SymMat, off: usize| {
        pairs
            .iter()
            .enumerate()
            .map(|(k, &(i, j))| {
                let mut lin = vec![0.0; m];
                lin[off + k] = if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
                Poly2::linear(base.get(i, j), lin)
            })
            .collect()
    };
    ProblemSpec {
        m,
        n,
        cone: vec![],
        phi: Poly2 { c: 0.0, lin: vec![], quad: q },
        h: vec![],
        theta: map(ci.base.x(), 0),
        zeta: map(ci.base.y(), len),
    }
}

fn random_quad(rng: &mut Rng64, m: usize) -> Vec<Vec<f64>> {
    let a = gaussian_matrix(rng, m, m);
    let q = (&a + a.transpose()) * 0.5;
    (0..m).map(|i| (0..m).map(|j| q[(i, j)]).collect()).collect()
}

fn chart_direction(ci: &CaseInstance) -> DVector<f64> {
    DVector::from_iterator(2 * upper_len(ci.base.n()), svec(&ci.f).into_iter().chain(svec(&ci.g)))
}

fn omega_mults(g1: SymMat, g2: SymMat) -> Multipliers {
    Multipliers { xi: vec![], gamma1: g1, gamma2: g2 }
}

/// Convex quadratic loss in raw upper entries with nonnegative minimum.
fn convex_instance(rng: &mut Rng64, n: usize) -> RankInstance {
    let len = upper_len(n);
    let b = gaussian_matrix(rng, len, len);
    let q = b.transpose() * &b + DMatrix::identity(len, len) * 0.1;
    let lin = gaussian_matrix(rng, len, 1).column(0).into_owned() * 2.0;
    let c = 0.5 * lin.dot(&(q.clone().try_inverse().unwrap() * &lin));
    RankInstance {
        n,
        loss: Poly2 {
            c,
            lin: lin.iter().copied().collect(),
            quad: (0..len).map(|i| (0..len).map(|j| q[(i, j)]).collect()).collect(),
        },
    }
}

/// Keeps the `r` largest positive eigenvalues.
fn truncate(a: &SymMat, r: usize) -> SymMat {
    let (p, lam) = sdcc::spectral::eig_sorted(a.mat()).unwrap();
    let d: Vec<f64> = lam.iter().enumerate().map(|(i, &v)| if i < r { v.max(0.0) } else { 0.0 }).collect();
    with_spectrum(&p, &d)
}

/// Projected gradient on PSD matrices of rank at most `r`.
fn projected_gradient(inst: &RankInstance, r: usize) -> SymMat {
    let len = upper_len(inst.n);
    let (_, ev) = sdcc::spectral::eig_sorted(&inst.loss.hessian(len)).unwrap();
    let step = 0.5 / ev[0];
    let mut x = SymMat::identity(inst.n);
    for _ in 0..20_000 {
        let next = truncate(&(&x - &inst.loss_gradient(&x).scale(step)), r);
        let change = (&next - &x).frob();
        x = next;
        if change < 1e-15 {
            break;
        }
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tangent2_is_stable_under_clarke_translations((seed, k, n) in case_args()) {
        let ci = case_instance(seed, k, n);
        let mut rng = rng_for(seed, 1);
        let data = tangent2_structural(&ci.base, &ci.f, &ci.g).unwrap();
        let (s, t) = data.sample_member(&mut rng);
        let (fc, gc) = sample_clarke_tangent(&ci.base, &mut rng);
        let r = tangent2_test(&ci.base, &ci.f, &ci.g, &(&s + &fc.scale(2.0)), &(&t + &gc.scale(2.0)), 1e-8).unwrap();
        prop_assert!(r.is_in(), "{r:?}");
    }

    #[test]
    fn sigma_is_positively_homogeneous((seed, k, n) in case_args(), s in 0.01f64..100.0) {
        let ci = case_instance(seed, k, n);
        let mut rng = rng_for(seed, 1);
        let data = tangent2_structural(&ci.base, &ci.f, &ci.g).unwrap();
        let (g1, g2) = finite_multipliers(&data, &mut rng);
        let a = sigma_tangent2_omega(&g1, &g2, &data, 1e-8).unwrap();
        let b = sigma_tangent2_omega(&g1.scale(s), &g2.scale(s), &data, 1e-8).unwrap();
        prop_assert!(a.is_finite() && b.is_finite());
        prop_assert!((b.value - s * a.value).abs() <= 1e-10 * (1.0 + s * a.value.abs()));
        if !data.rules().is_empty() {
            let (h1, h2, _) = break_multipliers(&data, &g1, &g2, &mut rng, 0.5).unwrap();
            prop_assert!(!sigma_tangent2_omega(&h1.scale(s), &h2.scale(s), &data, 1e-8).unwrap().is_finite());
        }
    }

    #[test]
    fn lagrangian_is_affine_in_multipliers(seed: u64, n in 1usize..4, a in -3.0f64..3.0) {
        let mut rng = rng_for(seed, 0);
        let spec = build_mpec(&convex_instance(&mut rng, n)).unwrap();
        let x = DVector::from_iterator(spec.m, (0..spec.m).map(|_| sdcc::instances::normal(&mut rng)));
        let mut draw = || {
            omega_mults(random_sym(&mut rng, n), random_sym(&mut rng, n))
        };
        let (mut m1, mut m2) = (draw(), draw());
        let (x1, x2) = (random_sym(&mut rng, n), random_sym(&mut rng, n));
        m1.xi = vec![KPart::Mat(x1.clone())];
        m2.xi = vec![KPart::Mat(x2.clone())];
        let mix = |p: &SymMat, q: &SymMat| &p.scale(a) + &q.scale(1.0 - a);
        let m3 = Multipliers {
            xi: vec![KPart::Mat(mix(&x1, &x2))],
            gamma1: mix(&m1.gamma1, &m2.gamma1),
            gamma2: mix(&m1.gamma2, &m2.gamma2),
        };
        let j = |m: &Multipliers| lagrangian_jet(&spec, &x, m).unwrap();
        let ((v1, g1, h1), (v2, g2, h2), (v3, g3, h3)) = (j(&m1), j(&m2), j(&m3));
        let tol = 1e-10 * (1.0 + a.abs()) * (1.0 + x.norm()).powi(2);
        prop_assert!((v3 - (a * v1 + (1.0 - a) * v2)).abs() <= tol * (1.0 + v1.abs() + v2.abs()));
        prop_assert!((&g3 - (&g1 * a + &g2 * (1.0 - a))).norm() <= tol * (1.0 + g1.norm() + g2.norm()));
        prop_assert!((&h3 - (&h1 * a + &h2 * (1.0 - a))).norm() <= tol * (1.0 + h1.norm() + h2.norm()));
    }

    #[test]
    fn relaxed_margin_never_exceeds_tight((seed, k, n) in case_args(), finite: bool) {
        let ci = case_instance(seed, k, n);
        let mut rng = rng_for(seed, 1);
        let m = 2 * upper_len(n);
        let spec = chart(&ci, random_quad(&mut rng, m));
        let (g1, g2) = if finite {
            finite_multipliers(&tangent2_structural(&ci.base, &ci.f, &ci.g).unwrap(), &mut rng)
        } else {
            (random_sym(&mut rng, n), random_sym(&mut rng, n))
        };
        let mult = omega_mults(g1, g2);
        let (x, d) = (DVector::zeros(m), chart_direction(&ci));
        let tol = SecondOrderTol::default();
        let tight = sonc_margin(&spec, &x, &mult, &d, Variant::Tight, tol).unwrap();
        let relaxed = sonc_margin(&spec, &x, &mult, &d, Variant::Relaxed, tol).unwrap();
        match (tight.margin, relaxed.margin) {
            (Some(a), Some(b)) => prop_assert!(b <= a + 1e-9 * (1.0 + a.abs()), "relaxed {b} > tight {a}"),
            (None, Some(b)) => prop_assert!(false, "tight σ infinite but relaxed margin {b}"),
            _ => {}
        }
    }

    #[test]
    fn margin_scales_quadratically((seed, k, n) in case_args()) {
        let ci = case_instance(seed, k, n);
        let mut rng = rng_for(seed, 1);
        let m = 2 * upper_len(n);
        let spec = chart(&ci, random_quad(&mut rng, m));
        let (g1, g2) = finite_multipliers(&tangent2_structural(&ci.base, &ci.f, &ci.g).unwrap(), &mut rng);
        let mult = omega_mults(g1, g2);
        let (x, d) = (DVector::zeros(m), chart_direction(&ci));
        let tol = SecondOrderTol::default();
        for variant in [Variant::Tight, Variant::Relaxed] {
            let base = sonc_margin(&spec, &x, &mult, &d, variant, tol).unwrap();
            for s in [0.5, 2.0] {
                let r = sonc_margin(&spec, &x, &mult, &(&d * s), variant, tol).unwrap();
                prop_assert!((r.quadratic - s * s * base.quadratic).abs() <= 1e-9 * s * s * (1.0 + base.quadratic.abs()));
                prop_assert_eq!(r.sigma.is_finite(), base.sigma.is_finite());
                if let (Some(a), Some(b)) = (base.margin, r.margin) {
                    prop_assert!((b - s * s * a).abs() <= 1e-8 * s * s * (1.0 + a.abs()));
                    prop_assert_eq!(r.verdict, base.verdict);
                }
            }
        }
    }

    #[test]
    fn lift_lands_in_omega(seed: u64, n in 1usize..7, rank_frac in 0.0f64..1.0) {
        let mut rng = rng_for(seed, 0);
        let r = ((n as f64 + 1.0) * rank_frac) as usize;
        let p = random_orthogonal(&mut rng, n);
        let lam: Vec<f64> = (0..n).map(|i| if i < r { 0.1 + 5.0 * rand::Rng::gen::<f64>(&mut rng) } else { 0.0 }).collect();
        let lift = lift_point(&with_spectrum(&p, &lam), None).unwrap();
        prop_assert_eq!(lift.rank, r);
        prop_assert!(lift.omega.is_in() && lift.omega.residual <= 1e-10, "{:?}", lift.omega);
        prop_assert!(srcq_check(&lift).unwrap().holds);
    }

    #[test]
    fn rank_roundtrip_through_json(seed: u64, n in 1usize..5) {
        let mut rng = rng_for(seed, 0);
        let inst = convex_instance(&mut rng, n);
        let spec = build_mpec(&inst).unwrap();
        prop_assert_eq!(parse_problem(&to_json(&spec)).unwrap(), spec);
        let a = random_sym(&mut rng, n);
        prop_assert_eq!(parse_matrix(&to_json(&a)).unwrap(), a.clone());
        let mult = omega_mults(a.clone(), a.scale(-1.0 / 3.0));
        prop_assert_eq!(parse_multipliers(&to_json(&mult)).unwrap(), vec![mult]);
    }
}

#[test]
fn mpec_gradient_is_the_loss_gradient() {
    let n = 4;
    let len = upper_len(n);
    for i in 0..100 {
        let mut rng = rng_for(0xB1, i);
        let inst = convex_instance(&mut rng, n);
        let spec = build_mpec(&inst).unwrap();
        let (x, w) = (random_sym(&mut rng, n), random_sym(&mut rng, n));
        let grad = spec.phi.gradient(&mpec_point(&x, &w));
        let want = svec(&inst.loss_gradient(&x));
        for k in 0..len {
            assert!((grad[k] - want[k]).abs() <= 1e-10 * (1.0 + want[k].abs()), "point {i}, entry {k}");
        }
        let diag: Vec<f64> = (0..n).flat_map(|a| (a..n).map(move |b| if a == b { 1.0 } else { 0.0 })).collect();
        for k in 0..len {
            assert_eq!(grad[len + k], diag[k]);
        }
    }
}

/// Candidate minimizers from projected gradient on small instances: the lift
/// multipliers solve the stationarity system and no sampled critical
/// direction has a negative margin.
#[test]
fn projected_gradient_minimizers_satisfy_the_rank_conditions() {
    let cfg = SamplerConfig { samples: 24, ..Default::default() };
    let mut checked = 0;
    for i in 0..12u64 {
        let mut rng = rng_for(0xB2, i);
        let n = 2 + (i as usize) % 3;
        let inst = convex_instance(&mut rng, n);
        let x = projected_gradient(&inst, 1 + (i as usize) % (n - 1));
        let lift = lift_point(&x, Some(1e-9)).unwrap();
        if lift.rank == 0 {
            continue;
        }
        let spec = build_mpec(&inst).unwrap();
        let mult = lift_multipliers(&inst, &lift);
        let st = stationarity_residual(&spec, &lift.point(), &mult, Flavor::C, &StationarityOptions::default()).unwrap();
        assert!(st.residual <= 1e-6, "instance {i}: stationarity {st:?}");
        let r = sonc_check(&spec, &lift.point(), &[mult], &cfg).unwrap();
        assert!(r.accepted > 0, "instance {i}: no critical direction sampled");
        if let Some(v) = r.min_margin {
            assert!(v >= -1e-6, "instance {i}: margin {v:e}");
        }
        checked += 1;
    }
    assert!(checked >= 8);
}
