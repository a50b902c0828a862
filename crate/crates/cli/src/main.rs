//! `ossslab`: batch front end for the exact checks, samplers and finite-size
//! diagnostics.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
//! checked inequality or identity is found to fail.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod selftest;
mod specs;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ossslab::measure::{set_enumeration_cap, ENUMERATION_CAP};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "ossslab",
    version,
    about = "OSSS inequality and random-cluster sharpness toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, env = "OSSSLAB_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Largest edge count for exact enumeration.
    #[arg(long, global = true, default_value_t = ENUMERATION_CAP)]
    pub max_exact_edges: usize,
    /// Acknowledge the memory and time cost of raising --max-exact-edges.
    #[arg(long, global = true)]
    pub allow_large_exact: bool,
    /// Proceed when a hypothesis (monotonicity, increasing f) fails.
    #[arg(long, global = true)]
    pub force: bool,
    /// Run the command's built-in small-case suite instead.
    #[arg(long, global = true)]
    pub selftest: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact check of an OSSS-type inequality.
    VerifyOsss(commands::VerifyOsssArgs),
    /// Revealment of each edge for a tree and function.
    Revealment(commands::RevealmentArgs),
    /// Draw configurations with the sequential sampler or heat bath.
    Sample(commands::SampleArgs),
    /// Enumerate a measure.
    ExactLaw(commands::ExactLawArgs),
    /// Monte Carlo estimate of the origin-to-sphere connection probability.
    EstimateTheta(commands::ThetaArgs),
    /// Crossing probability of a rectangle.
    Crossing(commands::CrossingArgs),
    /// Connection probabilities on a grid, with the differential inequality
    /// and the β₁ estimate.
    SharpnessScan(commands::ScanArgs),
    /// Critical point of a planar lattice.
    PcSolve(commands::PcArgs),
    /// Dual parameter and the wired/free duality of laws.
    DualityCheck(commands::DualityArgs),
    /// Abstract-lemma diagnostics on a synthetic family.
    Lemma31(commands::Lemma31Args),
    /// Potts / random-cluster identity for the origin spin.
    PottsIdentity(commands::PottsArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::VerifyOsss(_) => "verify-osss",
            Command::Revealment(_) => "revealment",
            Command::Sample(_) => "sample",
            Command::ExactLaw(_) => "exact-law",
            Command::EstimateTheta(_) => "estimate-theta",
            Command::Crossing(_) => "crossing",
            Command::SharpnessScan(_) => "sharpness-scan",
            Command::PcSolve(_) => "pc-solve",
            Command::DualityCheck(_) => "duality-check",
            Command::Lemma31(_) => "lemma31",
            Command::PottsIdentity(_) => "potts-identity",
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Library(ossslab::Error),
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }
}

impl From<ossslab::Error> for Failure {
    fn from(e: ossslab::Error) -> Self {
        Failure::Library(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Library(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Library(e.into())
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Library(e) => write!(f, "{e}"),
        }
    }
}

/// A finished command: its serialised output and whether a violation was found.
pub struct Outcome {
    pub body: Vec<u8>,
    pub violation: bool,
}

impl Outcome {
    pub fn json(value: &impl Serialize, violation: bool) -> Result<Self, Failure> {
        let mut body = serde_json::to_vec_pretty(value)?;
        body.push(b'\n');
        Ok(Outcome { body, violation })
    }

    pub fn csv(body: Vec<u8>, violation: bool) -> Self {
        Outcome { body, violation }
    }
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let g = &cli.global;
    if g.max_exact_edges > ENUMERATION_CAP && !g.allow_large_exact {
        return Err(Failure::usage(format!(
            "--max-exact-edges above {ENUMERATION_CAP} needs --allow-large-exact"
        )));
    }
    set_enumeration_cap(g.max_exact_edges)?;
    if let Some(t) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot configure threads: {e}")))?;
    }
    if g.selftest {
        return selftest::run(&cli.command, g);
    }
    commands::dispatch(&cli.command, g)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            let written = match &cli.global.out {
                Some(path) => fs::write(path, &outcome.body),
                None => io::stdout().write_all(&outcome.body),
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            ExitCode::from(if outcome.violation { 2 } else { 0 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
