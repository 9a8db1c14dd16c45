mod commands;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "sdcc", version, about = "Second-order analysis of the semidefinite complementarity set")]
pub struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Seed for every sampler.
    #[arg(long, global = true, env = "SDCC_SEED", default_value_t = sdcc::instances::DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads for sampling loops.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, hide = true)]
    pub inject_fault: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Membership {
    In,
    Out,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Satisfied,
    Violated,
}

#[derive(Subcommand, Debug, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Projection onto the PSD cone (or the NSD cone).
    Project {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        nsd: bool,
    },
    /// First directional derivative Π′(Z; H).
    Dderiv {
        #[arg(long)]
        z: PathBuf,
        #[arg(long)]
        h: PathBuf,
    },
    /// Second directional derivative Π″(Z; H, W).
    Dderiv2 {
        #[arg(long)]
        z: PathBuf,
        #[arg(long)]
        h: PathBuf,
        #[arg(long)]
        w: PathBuf,
    },
    /// Membership of (F, G) in the tangent cone of Ω at (X, Y).
    TangentTest {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, value_enum)]
        expect: Option<Membership>,
    },
    /// Membership of (S, T) in the second-order tangent set of Ω.
    Tangent2Test {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        s: PathBuf,
        #[arg(long)]
        t: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, value_enum)]
        expect: Option<Membership>,
    },
    /// Residual of the multiplier system at a point.
    CheckStationarity {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        point: PathBuf,
        #[arg(long)]
        multipliers: PathBuf,
        /// c | regular | limiting
        #[arg(long, default_value = "c")]
        flavor: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Candidate bases for the limiting flavor.
        #[arg(long, default_value_t = 16)]
        samples: usize,
        #[arg(long, value_enum)]
        expect: Option<Membership>,
    },
    /// Second-order necessary condition over sampled critical directions.
    CheckSonc(SecondOrderArgs),
    /// Second-order sufficient condition estimate over sampled critical directions.
    CheckSosc(SecondOrderArgs),
    /// Lift a PSD matrix to the rank MPEC point (X*, W*).
    RankLift {
        #[arg(long)]
        input: PathBuf,
        /// Rank tolerance; default 1e-8·‖X‖₂.
        #[arg(long)]
        tol: Option<f64>,
        /// Rank instance {"n", "loss"}; adds multipliers and stationarity.
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Reproduce the worked three-by-three example.
    Example1 {
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Run the oracle suites.
    Selftest {
        #[arg(long)]
        quick: bool,
    },
}

#[derive(clap::Args, Debug, serde::Serialize)]
pub struct SecondOrderArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub point: PathBuf,
    #[arg(long)]
    pub multipliers: PathBuf,
    /// Evaluate this direction only instead of sampling.
    #[arg(long)]
    pub direction: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// tight | relaxed
    #[arg(long, default_value = "tight")]
    pub variant: String,
    /// rejection | projected
    #[arg(long, default_value = "projected")]
    pub strategy: String,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub margin_tol: f64,
    #[arg(long, value_enum)]
    pub expect: Option<Outcome>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(commands::run(&cli))
}
