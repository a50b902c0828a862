use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, ValueEnum};
use ossslab::dtree::{
    revealment, revealment_from_samples, sample_with, BoolFn, DecisionTree, RevealmentReport,
    StoppingRule,
};
use ossslab::graph::LatticeFamily;
use ossslab::mcmc::{
    chain_rng, dual_sample_law_check, estimate_crossing, estimate_theta, exact_crossing,
    sample_chains, BoxConvention, ChainSettings, Orientation,
};
use ossslab::measure::{
    enumeration_cap, monotonicity_audit, potts_rc_identity_check, BoundaryCondition, Config,
    Measure, RandomCluster, TableMeasure,
};
use ossslab::osss::{check_osss_stopped, check_variant, CheckOptions, OsssVariant};
use ossslab::sharpness::{
    beta1_estimate, beta_range, check_differential_inequality, duality_relation_check,
    exact_theta_grid, lemma31_hypothesis, lemma31_synthetic_check, mean_field_scan,
    monte_carlo_theta_grid, p_of_beta, pc_solve, SyntheticFamily,
};
use serde::Serialize;
use serde_json::json;

use crate::specs::{parse_function, parse_graph, parse_tree, GraphArg};
use crate::{Command, Failure, Format, GlobalArgs, Outcome};

#[derive(Args, Debug, Clone)]
pub struct MeasureArgs {
    /// `box:FAMILY:N`, `rect:WxH` or `file:PATH`.
    #[arg(long, default_value = "box:square:1")]
    pub graph: String,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// Edge probability (default 0.5).
    #[arg(long, conflicts_with = "beta")]
    pub p: Option<f64>,
    /// Inverse temperature with unit couplings scaled by the graph's `J`.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value = "free")]
    pub boundary: BoundaryCondition,
    /// Explicit measure table `{configs, probs}`; overrides the graph measure.
    #[arg(long)]
    pub measure_file: Option<PathBuf>,
    /// Box size used by `connect` and exploration trees.
    #[arg(long)]
    pub n: Option<usize>,
}

pub struct BuiltMeasure {
    pub measure: Measure,
    pub graph: Option<GraphArg>,
    pub n: Option<usize>,
}

impl MeasureArgs {
    pub fn build(&self) -> Result<BuiltMeasure, Failure> {
        let graph = parse_graph(&self.graph)?;
        let n = self.n.or(graph.radius);
        if let Some(path) = &self.measure_file {
            let table = TableMeasure::from_json(&fs::read_to_string(path)?)?;
            return Ok(BuiltMeasure {
                measure: table.into(),
                graph: Some(graph),
                n,
            });
        }
        let rc = match self.beta {
            Some(beta) => RandomCluster::new(graph.graph.clone(), self.q, beta, self.boundary)?,
            None => RandomCluster::with_p(
                graph.graph.clone(),
                self.q,
                self.p.unwrap_or(0.5),
                self.boundary,
            )?,
        };
        Ok(BuiltMeasure {
            measure: rc.into(),
            graph: Some(graph),
            n,
        })
    }
}

#[derive(Args, Debug, Clone)]
pub struct ChainArgs {
    /// Recorded samples per chain.
    #[arg(long, default_value_t = 1000)]
    pub sweeps: u64,
    #[arg(long, default_value_t = 1000)]
    pub burnin: u64,
    /// Sweeps between recorded samples.
    #[arg(long, default_value_t = 10)]
    pub thin: u64,
    #[arg(long, default_value_t = 8)]
    pub chains: u64,
}

impl ChainArgs {
    pub fn settings(&self, seed: u64) -> ChainSettings {
        ChainSettings {
            burnin: self.burnin,
            thin: self.thin,
            samples: self.sweeps,
            chains: self.chains,
            seed,
        }
    }
}

fn edge_probability(p: Option<f64>, beta: Option<f64>) -> f64 {
    match beta {
        Some(b) => p_of_beta(b, 1.0),
        None => p.unwrap_or(0.5),
    }
}

fn csv_only_for(name: &str, global: &GlobalArgs) -> Result<(), Failure> {
    if global.format == Format::Csv {
        return Err(Failure::usage(format!("{name} has no CSV output")));
    }
    Ok(())
}

fn parse_stop(spec: &str) -> Result<StoppingRule, Failure> {
    match spec.split_once(':') {
        None if spec == "determined" => Ok(StoppingRule::Determined),
        None if spec == "full" => Ok(StoppingRule::Full),
        Some(("after", k)) => {
            Ok(StoppingRule::AfterQueries(k.parse().map_err(|_| {
                Failure::usage(format!("bad stopping rule `{spec}`"))
            })?))
        }
        _ => Err(Failure::usage(format!(
            "unrecognised stopping rule `{spec}`"
        ))),
    }
}

struct Problem {
    measure: Measure,
    graph: Option<Arc<ossslab::graph::FiniteGraph>>,
    tree: DecisionTree,
    f: BoolFn,
}

fn problem(m: &MeasureArgs, tree: &str, f: &str, seed: u64) -> Result<Problem, Failure> {
    let built = m.build()?;
    let graph = built.graph.as_ref().map(|g| g.graph.clone());
    let n_edges = built.measure.n_edges();
    let g = graph
        .clone()
        .ok_or_else(|| Failure::usage("a graph is required"))?;
    let f = parse_function(f, &g, built.n)?;
    let tree = parse_tree(tree, graph.as_ref(), n_edges, built.n, seed)?;
    Ok(Problem {
        measure: built.measure,
        graph,
        tree,
        f,
    })
}

// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct VerifyOsssArgs {
    #[command(flatten)]
    pub measure: MeasureArgs,
    /// `fixed`, `reverse`, `exploration:K[:N]`, `random` or `file:PATH`.
    #[arg(long, default_value = "fixed")]
    pub tree: String,
    /// `connect[:N]`, `and`, `or`, `majority`, `dictator:E` or `table:PATH`.
    #[arg(long = "f", default_value = "connect")]
    pub function: String,
    #[arg(long, default_value = "covariance")]
    pub variant: OsssVariant,
    /// Stopping rule for the stopped variant: `determined`, `full` or `after:K`.
    #[arg(long, default_value = "determined")]
    pub stop: String,
}

fn verify_osss(a: &VerifyOsssArgs, global: &GlobalArgs) -> Result<Outcome, Failure> {
    let p = problem(&a.measure, &a.tree, &a.function, global.seed)?;
    let opts = CheckOptions {
        force: global.force,
    };
    let report = match a.variant {
        OsssVariant::Stopped => {
            check_osss_stopped(&p.measure, &p.tree, &parse_stop(&a.stop)?, &p.f, opts)?
        }
        v => check_variant(v, &p.measure, &p.tree, &p.f, opts)?,
    };
    let _ = p.graph;
    match global.format {
        Format::Json => Outcome::json(&report, !report.holds),
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            Ok(Outcome::csv(buf, !report.holds))
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RevealmentMode {
    Exact,
    MonteCarlo,
}

#[derive(Args, Debug)]
pub struct RevealmentArgs {
    #[command(flatten)]
    pub measure: MeasureArgs,
    #[arg(long, default_value = "fixed")]
    pub tree: String,
    #[arg(long = "f", default_value = "connect")]
    pub function: String,
    #[arg(long, value_enum, default_value_t = RevealmentMode::Exact)]
    pub method: RevealmentMode,
    #[command(flatten)]
    pub chain: ChainArgs,
}

fn revealment_cmd(a: &RevealmentArgs, global: &GlobalArgs) -> Result<Outcome, Failure> {
    let p = problem(&a.measure, &a.tree, &a.function, global.seed)?;
    let report: RevealmentReport = match a.method {
        RevealmentMode::Exact => {
            revealment(&p.measure.exact_law(enumeration_cap())?, &p.tree, &p.f)?
        }
        RevealmentMode::MonteCarlo => {
            let Measure::RandomCluster(rc) = &p.measure else {
                return Err(Failure::usage(
                    "Monte Carlo revealment needs a random-cluster measure",
                ));
            };
            let chains = sample_chains(rc, &a.chain.settings(global.seed))?;
            revealment_from_samples(&p.tree, &p.f, &chains)?
        }
    };
    match global.format {
        Format::Json => Outcome::json(&report, false),
        Format::Csv => {
            let mut out = String::from("edge,revealment\n");
            for (e, d) in report.delta.iter().enumerate() {
                out.push_str(&format!("{e},{d}\n"));
            }
            Ok(Outcome::csv(out.into_bytes(), false))
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleMethod {
    /// Sequential sampler along a decision tree (exact law).
    Sequential,
    /// Heat-bath chains (random-cluster measures with q ≥ 1).
    HeatBath,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub measure: MeasureArgs,
    #[arg(long, default_value = "fixed")]
    pub tree: String,
    /// Number of configurations for the sequential sampler.
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = SampleMethod::Sequential)]
    pub method: SampleMethod,
    #[command(flatten)]
    pub chain: ChainArgs,
}

fn sample_cmd(a: &SampleArgs, global: &GlobalArgs) -> Result<Outcome, Failure> {
    let built = a.measure.build()?;
    let graph = built.graph.as_ref().map(|g| g.graph.clone());
    let configs: Vec<String> = match a.method {
        SampleMethod::Sequential => {
            let tree = parse_tree(
                &a.tree,
                graph.as_ref(),
                built.measure.n_edges(),
                built.n,
                global.seed,
            )?;
            let law = built.measure.exact_law(enumeration_cap())?;
            let mut rng = chain_rng(global.seed, 0);
            (0..a.samples)
                .map(|_| sample_with(&law, &tree, &mut rng).map(|c| c.to_bitstring()))
                .collect::<Result<_, _>>()?
        }
        SampleMethod::HeatBath => {
            let Measure::RandomCluster(rc) = &built.measure else {
                return Err(Failure::usage(
                    "heat-bath sampling needs a random-cluster measure",
                ));
            };
            sample_chains(rc, &a.chain.settings(global.seed))?
                .into_iter()
                .flatten()
                .map(|c| c.to_bitstring())
                .collect()
        }
    };
    match global.format {
        Format::Json => Outcome::json(
            &json!({ "measure": built.measure.label(), "configs": configs }),
            false,
        ),
        Format::Csv => {
            let mut out = String::from("config\n");
            for c in &configs {
                out.push_str(c);
                out.push('\n');
            }
            Ok(Outcome::csv(out.into_bytes(), false))
        }
    }
}

#[derive(Args, Debug)]
pub struct ExactLawArgs {
    #[command(flatten)]
    pub measure: MeasureArgs,
    /// Also run the exhaustive monotonicity audit.
    #[arg(long)]
    pub audit: bool,
}

fn exact_law_cmd(a: &ExactLawArgs, global: &GlobalArgs) -> Result<Outcome, Failure> {
    let built = a.measure.build()?;
    let law = built.measure.exact_law(enumeration_cap())?;
    let n = law.n_edges();
    let configs: Vec<String> = (0..1u64 << n)
        .map(|m| Config::from_mask(m, n).to_bitstring())
        .collect();
    let audit = if a.audit {
        Some(monotonicity_audit(&built.measure)?)
    } else {
        None
    };
    let violation = audit.as_ref().is_some_and(|r| !r.is_monotonic);
    match global.format {
        Format::Json => Outcome::json(
            &json!({
                "measure": built.measure.label(),
                "n_edges": n,
                "configs": configs,
                "probs": law.probs(),
                "audit": audit,
            }),
            violation,
        ),
        Format::Csv => {
            let mut out = String::from("config,prob\n");
            for (c, p) in configs.iter().zip(law.probs()) {
                out.push_str(&format!("{c},{p}\n"));
            }
            Ok(Outcome::csv(out.into_bytes(), violation))
        }
    }
}

#[derive(Args, Debug)]
pub struct ThetaArgs {
    #[arg(long, default_value = "square")]
    pub family: LatticeFamily,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    #[arg(long, conflicts_with = "beta")]
    pub p: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, value_enum, default_value_t = Convention::Doubled)]
    pub convention: Convention,
    #[command(flatten)]
    pub chain: ChainArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convention {
    /// Wired measure on `Λ_{2n}`.
    Doubled,
    /// Wired measure on `Λ_n`.
    Plain,
}

#[derive(Serialize)]
struct EstimateOutput<T: Serialize> {
    estimate: f64,
    half_width: f64,
    n_samples: u64,
    settings: ChainSettings,
    #[serde(flatten)]
    details: T,
}

fn theta_cmd(a: &ThetaArgs, global: &GlobalArgs) -> Result<Outcome, Failure> {
    csv_only_for("estimate-theta", global)?;
    let convention = match a.convention {
        Convention::Doubled => BoxConvention::Doubled,
        Convention::Plain => BoxConvention::Plain,
    };
    let settings = a.chain.settings(global.seed);
    let t = estimate_theta(
        a.family,
        a.n,
        a.q,
        edge_probability(a.p, a.beta),
        convention,
        &settings,
    )?;
    Outcome::json(
        &EstimateOutput {
            estimate: t.estimate.mean,
            half_width: t.estimate.half_width_95,
            n_samples: t.estimate.n_samples,
            settings,
            details: json!({ "family": a.family, "n": a.n, "q": a.q, "p": t.p, "convention": t.convention }),
        },
        false,
    )
}

#[derive(Args, Debug)]
pub struct CrossingArgs {
    #[arg(long, alias = "n", default_value_t = 2)]
    pub width: usize,
    /// Defaults to `width + 1`.
    #[arg(long, alias = "k")]
    pub height: Option<usize>,
    #[arg(long, default_value = "vertical")]
    pub orientation: Orientation,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    #[arg(long, conflicts_with = "beta")]
    pub p: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value = "free")]
    pub boundary: BoundaryCondition,
    /// Enumerate instead of sampling.
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    pub chain: ChainArgs,
}

fn crossing_cmd(a: &CrossingArgs, global: &GlobalArgs) -> Result<Outcome, Failure> {
    csv_only_for("crossing", global)?;
    let p = edge_probability(a.p, a.beta);
    let height = a.height.unwrap_or(a.width + 1);
    let details = json!({
        "width": a.width, "height": height, "orientation": a.orientation,
        "q": a.q, "p": p, "boundary": a.boundary,
    });
    if a.exact {
        let v = exact_crossing(a.width, height, a.orientation, a.q, p, a.boundary)?;
        return Outcome::json(&json!({ "exact": v, "details": details }), false);
    }
    let settings = a.chain.settings(global.seed);
    let c = estimate_crossing(
        a.width,
        height,
        a.orientation,
        a.q,
        p,
        a.boundary,
        &settings,
    )?;
    Outcome::json(
        &EstimateOutput {
            estimate: c.estimate.mean,
            half_width: c.estimate.half_width_95,
            n_samples: c.estimate.n_samples,
            settings,
            details,
        },
        false,
    )
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanMode {
    Exact,
    MonteCarlo,
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    #[arg(long, default_value = "square")]
    pub family: LatticeFamily,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// Box sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub beta_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta_max: f64,
    /// Grid spacing (default 0.01 exact, 0.05 Monte Carlo).
    #[arg(long)]
    pub beta_step: Option<f64>,
    #[arg(long, value_enum, default_value_t = ScanMode::Exact)]
    pub mode: ScanMode,
    /// Known critical point for the mean-field diagnostic.
    #[arg(long)]
    pub beta_c: Option<f64>,
    #[command(flatten)]
    pub chain: ChainArgs,
}

fn scan_cmd(a: &ScanArgs, global: &GlobalArgs) -> Result<Outcome, Failure> {
    let step = a.beta_step.unwrap_or(match a.mode {
        ScanMode::Exact => 0.01,
        ScanMode::MonteCarlo => 0.05,
    });
    if !(step > 0.0) || a.beta_max <= a.beta_min {
        return Err(Failure::usage(
            "need beta-min < beta-max and a positive step",
        ));
    }
    let betas = beta_range(a.beta_min, a.beta_max, step);
    let grid = match a.mode {
        ScanMode::Exact => exact_theta_grid(a.family, &a.sizes, a.q, &betas)?,
        ScanMode::MonteCarlo => monte_carlo_theta_grid(
            a.family,
            &a.sizes,
            a.q,
            &betas,
            &a.chain.settings(global.seed),
        )?,
    };
    let differential = check_differential_inequality(&grid, None).ok();
    let window: Vec<usize> = a.sizes.iter().copied().filter(|&n| n >= 1).collect();
    let beta1 = if window.len() >= 3 {
        beta1_estimate(&grid, Some(&window)).ok()
    } else {
        None
    };
    let mean_field = a.beta_c.map(|bc| mean_field_scan(&grid, bc)).transpose()?;
    let violation =
        a.mode == ScanMode::Exact && differential.as_ref().is_some_and(|d| d.violations > 0);
    match global.format {
        Format::Json => Outcome::json(
            &json!({
                "grid": grid,
                "monotone_in_n_violations": grid.monotonicity_in_n_violations(),
                "differential_inequality": differential,
                "beta1": beta1,
                "mean_field": mean_field,
            }),
            violation,
        ),
        Format::Csv => {
            let mut buf = Vec::new();
            grid.write_csv(&mut buf)?;
            Ok(Outcome::csv(buf, violation))
        }
    }
}

#[derive(Args, Debug)]
pub struct PcArgs {
    #[arg(long, default_value = "square")]
    pub family: LatticeFamily,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
}

fn pc_cmd(a: &PcArgs, global: &GlobalArgs) -> Result<Outcome, Failure> {
    csv_only_for("pc-solve", global)?;
    let r = pc_solve(a.family, a.q)?;
    Outcome::json(&r, r.residual > 1e-12)
}

#[derive(Args, Debug)]
pub struct DualityArgs {
    #[arg(long, default_value = "square")]
    pub family: LatticeFamily,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Also compare the wired law on this planar graph with the free dual law.
    #[arg(long)]
    pub graph: Option<String>,
}

fn duality_cmd(a: &DualityArgs, global: &GlobalArgs) -> Result<Outcome, Failure> {
    csv_only_for("duality-check", global)?;
    let rel = duality_relation_check(a.family, a.q, a.p)?;
    let law = match &a.graph {
        Some(spec) => Some(dual_sample_law_check(&parse_graph(spec)?.graph, a.q, a.p)?),
        None => None,
    };
    let violation = rel.relation_residual > 1e-12
        || rel.involution_error > 1e-14
        || rel.critical_pair_residual > 1e-12
        || law
            .as_ref()
            .is_some_and(|l| l.max_deviation > 1e-10 || !l.involution);
    Outcome::json(&json!({ "relation": rel, "law": law }), violation)
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyKind {
    Threshold,
    Smoothed,
    Linear,
    Constant,
}

#[derive(Args, Debug)]
pub struct Lemma31Args {
    #[arg(long, value_enum, default_value_t = FamilyKind::Smoothed)]
    pub family: FamilyKind,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    /// Right end of the parameter interval.
    #[arg(long, default_value_t = 1.0)]
    pub beta0: f64,
    #[arg(long, default_value_t = 400)]
    pub n_max: usize,
}

pub fn synthetic(kind: FamilyKind, epsilon: f64, kappa: f64, beta0: f64) -> SyntheticFamily {
    match kind {
        FamilyKind::Threshold => SyntheticFamily::Threshold,
        FamilyKind::Smoothed => SyntheticFamily::Smoothed { epsilon, kappa },
        FamilyKind::Linear => SyntheticFamily::Linear { beta0 },
        FamilyKind::Constant => SyntheticFamily::Constant,
    }
}

fn lemma31_cmd(a: &Lemma31Args, global: &GlobalArgs) -> Result<Outcome, Failure> {
    csv_only_for("lemma31", global)?;
    if a.n_max < 16 {
        return Err(Failure::usage("--n-max must be at least 16"));
    }
    let family = synthetic(a.family, a.epsilon, a.kappa, a.beta0);
    if let Some(w) = lemma31_hypothesis(&family, a.beta0, a.n_max, 1.0, 200) {
        return Outcome::json(
            &json!({ "family": family, "hypothesis_holds": false, "witness": w }),
            true,
        );
    }
    let r = lemma31_synthetic_check(&family, a.beta0, a.n_max)?;
    let ok = r.p1_holds && r.p2_holds;
    Outcome::json(&json!({ "hypothesis_holds": true, "report": r }), !ok)
}

#[derive(Args, Debug)]
pub struct PottsArgs {
    /// Outer graph `H`; the spins live on `H` minus its boundary.
    #[arg(long, default_value = "box:square:1")]
    pub graph: String,
    #[arg(long, default_value_t = 2)]
    pub q: u32,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
}

fn potts_cmd(a: &PottsArgs, global: &GlobalArgs) -> Result<Outcome, Failure> {
    csv_only_for("potts-identity", global)?;
    let g = parse_graph(&a.graph)?;
    let r = potts_rc_identity_check(&g.graph, a.q, a.beta)?;
    Outcome::json(&r, r.difference.abs() > 1e-10)
}

pub fn dispatch(cmd: &Command, global: &GlobalArgs) -> Result<Outcome, Failure> {
    match cmd {
        Command::VerifyOsss(a) => verify_osss(a, global),
        Command::Revealment(a) => revealment_cmd(a, global),
        Command::Sample(a) => sample_cmd(a, global),
        Command::ExactLaw(a) => exact_law_cmd(a, global),
        Command::EstimateTheta(a) => theta_cmd(a, global),
        Command::Crossing(a) => crossing_cmd(a, global),
        Command::SharpnessScan(a) => scan_cmd(a, global),
        Command::PcSolve(a) => pc_cmd(a, global),
        Command::DualityCheck(a) => duality_cmd(a, global),
        Command::Lemma31(a) => lemma31_cmd(a, global),
        Command::PottsIdentity(a) => potts_cmd(a, global),
    }
}
