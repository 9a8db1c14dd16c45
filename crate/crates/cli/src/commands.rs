use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

use sdcc::geometry::{tangent2_structural, tangent2_test, tangent_test, CCPair, Verdict};
use sdcc::io::{parse_matrix, parse_multipliers, parse_point, parse_problem, to_json};
use sdcc::optimality::{
    sonc_check, sonc_margin, sosc_check, stationarity_residual, Flavor, Multipliers, ProblemSpec, SamplerConfig,
    SecondOrderTol, StationarityOptions, Strategy, Variant,
};
use sdcc::projpsd::{proj_dir1, proj_dir2_spec, proj_nsd, proj_psd, Dir2Options, Fault};
use sdcc::rank::{example1, lift_multipliers, lift_point, srcq_check, RankInstance};
use sdcc::selftest::{selftest, SelftestConfig};
use sdcc::{Error, Spectral, SymMat};

use crate::{render, Cli, Command, Format, Membership, Outcome, SecondOrderArgs};

const VERDICT_FAILED: u8 = 1;
const INPUT_ERROR: u8 = 2;

enum Failure {
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Run = std::result::Result<(Value, u8), Failure>;

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn matrix(path: &Path) -> std::result::Result<SymMat, Failure> {
    parse_matrix(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn membership_code(v: Verdict, expect: Option<Membership>) -> u8 {
    let got = match v {
        Verdict::In => Some(Membership::In),
        Verdict::Out => Some(Membership::Out),
        Verdict::Borderline => None,
    };
    if got == Some(expect.unwrap_or(Membership::In)) {
        0
    } else {
        VERDICT_FAILED
    }
}

fn fault(cli: &Cli) -> Option<Fault> {
    cli.inject_fault.then_some(Fault::FlipPositivePairSign)
}

pub fn run(cli: &Cli) -> u8 {
    let outcome = match &cli.command {
        Command::Project { input, nsd } => project(input, *nsd),
        Command::Dderiv { z, h } => dderiv(z, h),
        Command::Dderiv2 { z, h, w } => dderiv2(cli, z, h, w),
        Command::TangentTest {
            x,
            y,
            f,
            g,
            tol,
            expect,
        } => tangent(x, y, f, g, *tol, *expect),
        Command::Tangent2Test {
            x,
            y,
            f,
            g,
            s,
            t,
            tol,
            expect,
        } => tangent2(x, y, f, g, s, t, *tol, *expect),
        Command::CheckStationarity {
            problem,
            point,
            multipliers,
            flavor,
            tol,
            samples,
            expect,
        } => stationarity(cli, problem, point, multipliers, flavor, *tol, *samples, *expect),
        Command::CheckSonc(a) => second_order(cli, a, true),
        Command::CheckSosc(a) => second_order(cli, a, false),
        Command::RankLift { input, tol, instance } => rank_lift(input, *tol, instance.as_deref()),
        Command::Example1 { samples } => example(*samples),
        Command::Selftest { quick } => self_check(cli, *quick),
    };
    match outcome {
        Ok((result, code)) => match emit(cli, result) {
            Ok(()) => code,
            Err(e) => {
                eprintln!("error: {e}");
                INPUT_ERROR
            }
        },
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            INPUT_ERROR
        }
    }
}

fn emit(cli: &Cli, result: Value) -> std::io::Result<()> {
    let report = json!({
        "command": command_name(&cli.command),
        "config": {
            "seed": cli.seed,
            "jobs": cli.jobs,
            "format": cli.format,
            "inject_fault": cli.inject_fault,
            "args": value(&cli.command),
        },
        "result": result,
    });
    let text = match cli.format {
        Format::Json => to_json(&report),
        Format::Text => render::text(&report),
    };
    match &cli.output {
        Some(p) => fs::write(p, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Project { .. } => "project",
        Command::Dderiv { .. } => "dderiv",
        Command::Dderiv2 { .. } => "dderiv2",
        Command::TangentTest { .. } => "tangent-test",
        Command::Tangent2Test { .. } => "tangent2-test",
        Command::CheckStationarity { .. } => "check-stationarity",
        Command::CheckSonc(_) => "check-sonc",
        Command::CheckSosc(_) => "check-sosc",
        Command::RankLift { .. } => "rank-lift",
        Command::Example1 { .. } => "example1",
        Command::Selftest { .. } => "selftest",
    }
}

fn project(input: &Path, nsd: bool) -> Run {
    let a = matrix(input)?;
    let p = if nsd { proj_nsd(&a)? } else { proj_psd(&a)? };
    Ok((json!({ "matrix": p }), 0))
}

fn dderiv(z: &Path, h: &Path) -> Run {
    let d = proj_dir1(&matrix(z)?, &matrix(h)?)?;
    Ok((json!({ "matrix": d }), 0))
}

fn dderiv2(cli: &Cli, z: &Path, h: &Path, w: &Path) -> Run {
    let z = matrix(z)?;
    let spec = Spectral::new(&z)?;
    let d = proj_dir2_spec(&spec, &matrix(h)?, &matrix(w)?, Dir2Options { fault: fault(cli) })?;
    Ok((json!({ "matrix": d, "warnings": spec.warnings() }), 0))
}

fn base(x: &Path, y: &Path) -> std::result::Result<CCPair, Failure> {
    Ok(CCPair::new(matrix(x)?, matrix(y)?)?)
}

fn tangent(x: &Path, y: &Path, f: &Path, g: &Path, tol: f64, expect: Option<Membership>) -> Run {
    let b = base(x, y)?;
    let r = tangent_test(&b, &matrix(f)?, &matrix(g)?, tol)?;
    let code = membership_code(r.verdict, expect);
    Ok((value(&r), code))
}

#[allow(clippy::too_many_arguments)]
fn tangent2(x: &Path, y: &Path, f: &Path, g: &Path, s: &Path, t: &Path, tol: f64, expect: Option<Membership>) -> Run {
    let b = base(x, y)?;
    let (f, g, s, t) = (matrix(f)?, matrix(g)?, matrix(s)?, matrix(t)?);
    let derivative = tangent2_test(&b, &f, &g, &s, &t, tol)?;
    let structural = tangent2_structural(&b, &f, &g)?.check(&s, &t, tol)?;
    let code = membership_code(derivative.verdict, expect);
    Ok((json!({ "verdict": derivative.verdict, "derivative": derivative, "structural": structural }), code))
}

struct Loaded {
    spec: ProblemSpec,
    x: DVector<f64>,
    mults: Vec<Multipliers>,
}

fn load(problem: &Path, point: &Path, multipliers: &Path) -> std::result::Result<Loaded, Failure> {
    let at = |p: &Path, e: Error| Failure::Input(format!("{}: {e}", p.display()));
    let spec = parse_problem(&read(problem)?).map_err(|e| at(problem, e))?;
    let x = DVector::from_vec(parse_point(&read(point)?).map_err(|e| at(point, e))?);
    spec.check_point(&x).map_err(|e| at(point, e))?;
    let mults = parse_multipliers(&read(multipliers)?).map_err(|e| at(multipliers, e))?;
    if mults.is_empty() {
        return Err(Error::EmptyMultiplierSet.into());
    }
    for m in &mults {
        spec.check_multipliers(m).map_err(|e| at(multipliers, e))?;
    }
    Ok(Loaded { spec, x, mults })
}

#[allow(clippy::too_many_arguments)]
fn stationarity(
    cli: &Cli,
    problem: &Path,
    point: &Path,
    multipliers: &Path,
    flavor: &str,
    tol: f64,
    samples: usize,
    expect: Option<Membership>,
) -> Run {
    let l = load(problem, point, multipliers)?;
    let flavor: Flavor = flavor.parse()?;
    let opts = StationarityOptions {
        tol,
        seed: cli.seed,
        samples,
    };
    let mut reports = Vec::new();
    for m in &l.mults {
        reports.push(stationarity_residual(&l.spec, &l.x, m, flavor, &opts)?);
    }
    let verdict = if reports.iter().any(|r| r.verdict == Verdict::In) {
        Verdict::In
    } else if reports.iter().any(|r| r.verdict == Verdict::Borderline) {
        Verdict::Borderline
    } else {
        Verdict::Out
    };
    Ok((json!({ "verdict": verdict, "reports": reports }), membership_code(verdict, expect)))
}

fn outcome_code(got: Option<Outcome>, expect: Option<Outcome>) -> u8 {
    if got == Some(expect.unwrap_or(Outcome::Satisfied)) {
        0
    } else {
        VERDICT_FAILED
    }
}

fn second_order(cli: &Cli, a: &SecondOrderArgs, necessary: bool) -> Run {
    let l = load(&a.problem, &a.point, &a.multipliers)?;
    let variant: Variant = a.variant.parse()?;
    let tol = SecondOrderTol {
        tol: a.tol,
        margin_tol: a.margin_tol,
    };
    if let Some(dp) = &a.direction {
        let d = DVector::from_vec(parse_point(&read(dp)?).map_err(|e| Failure::Input(format!("{}: {e}", dp.display())))?);
        let mut reports = Vec::new();
        for m in &l.mults {
            reports.push(sonc_margin(&l.spec, &l.x, m, &d, variant, tol)?);
        }
        let best = reports.iter().filter_map(|r| r.margin).fold(None, |b: Option<f64>, m| Some(b.map_or(m, |b| b.max(m))));
        let got = match best {
            None => None,
            Some(m) if necessary && m < -a.margin_tol => Some(Outcome::Violated),
            Some(m) if !necessary && m <= a.margin_tol => Some(Outcome::Violated),
            Some(_) => Some(Outcome::Satisfied),
        };
        return Ok((json!({ "outcome": got, "best_margin": best, "reports": reports }), outcome_code(got, a.expect)));
    }
    let strategy = match a.strategy.as_str() {
        "rejection" => Strategy::Rejection,
        "projected" => Strategy::Projected,
        other => return Err(Failure::Input(format!("unknown strategy {other:?}"))),
    };
    let cfg = SamplerConfig {
        samples: a.samples,
        seed: cli.seed,
        strategy,
        jobs: cli.jobs,
        tol,
        ..Default::default()
    };
    let r = if necessary {
        sonc_check(&l.spec, &l.x, &l.mults, &cfg)?
    } else {
        sosc_check(&l.spec, &l.x, &l.mults, &cfg, variant)?
    };
    let got = match r.min_margin {
        None => None,
        Some(m) if necessary && m < -a.margin_tol => Some(Outcome::Violated),
        Some(m) if !necessary && m <= a.margin_tol => Some(Outcome::Violated),
        Some(_) => Some(Outcome::Satisfied),
    };
    Ok((json!({ "outcome": got, "check": r }), outcome_code(got, a.expect)))
}

fn rank_lift(input: &Path, tol: Option<f64>, instance: Option<&Path>) -> Run {
    let x = matrix(input)?;
    let lift = lift_point(&x, tol)?;
    let srcq = srcq_check(&lift)?;
    let point: Vec<f64> = lift.point().iter().copied().collect();
    let mut out = json!({ "lift": lift, "point": point, "srcq": srcq });
    let mut code = if lift.omega.is_in() { 0 } else { VERDICT_FAILED };
    if let Some(p) = instance {
        let inst: RankInstance =
            sdcc::io::parse(&read(p)?, "rank instance").map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
        if inst.n != x.n() {
            return Err(Failure::Input(format!("instance has n = {} but X is {}x{}", inst.n, x.n(), x.n())));
        }
        let spec = sdcc::rank::build_mpec(&inst)?;
        let mult = lift_multipliers(&inst, &lift);
        let st = stationarity_residual(&spec, &lift.point(), &mult, Flavor::C, &StationarityOptions::default())?;
        if st.verdict != Verdict::In {
            code = VERDICT_FAILED;
        }
        out["loss_warnings"] = value(&inst.warnings());
        out["multipliers"] = value(&mult);
        out["stationarity"] = value(&st);
    }
    Ok((out, code))
}

fn example(samples: usize) -> Run {
    let r = example1(samples)?;
    if let Some(id) = r.first_failure {
        let c = r.clauses.iter().find(|c| c.id == id).expect("failing clause is listed");
        eprintln!("example1: clause ({id}) failed: {}: {}", c.claim, c.detail);
    }
    let code = if r.passed { 0 } else { VERDICT_FAILED };
    Ok((value(&r), code))
}

fn self_check(cli: &Cli, quick: bool) -> Run {
    let r = selftest(&SelftestConfig {
        seed: cli.seed,
        quick,
        fault: fault(cli),
    });
    let code = if r.passed { 0 } else { VERDICT_FAILED };
    Ok((value(&r), code))
}

