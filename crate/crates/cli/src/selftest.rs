//! Small exhaustive suites behind `--selftest`.

use std::sync::Arc;

use ossslab::dtree::{revealment, revealment_by_runs, sampler_pushforward, BoolFn, DecisionTree};
use ossslab::graph::{build_box, rectangle, FiniteGraph, LatticeFamily, LatticeSpec};
use ossslab::mcmc::{
    dual_sample_law_check, estimate_crossing, estimate_theta, exact_crossing, BoxConvention,
    ChainSettings, Orientation,
};
use ossslab::measure::{
    monotonicity_audit, potts_rc_identity_check, BoundaryCondition, Measure, RandomCluster,
};
use ossslab::osss::{check_lemma32, check_osss, exploration_revealment_bound, CheckOptions};
use ossslab::sharpness::{
    beta_of_p, beta_range, check_derivative_formula, check_differential_inequality,
    duality_relation_check, exact_theta_grid, lemma31_synthetic_check, pc_solve, ExactTheta,
    SyntheticFamily,
};
use ossslab::Result;
use serde::Serialize;

use crate::{Command, Failure, GlobalArgs, Outcome};

#[derive(Serialize)]
struct Check {
    name: String,
    passed: bool,
    detail: String,
}

#[derive(Serialize)]
struct SelftestReport {
    command: &'static str,
    passed: bool,
    checks: Vec<Check>,
}

fn check(
    checks: &mut Vec<Check>,
    name: impl Into<String>,
    passed: bool,
    detail: impl Into<String>,
) {
    checks.push(Check {
        name: name.into(),
        passed,
        detail: detail.into(),
    });
}

fn square(n: usize) -> Result<Arc<FiniteGraph>> {
    Ok(Arc::new(build_box(&LatticeSpec::new(
        LatticeFamily::Square,
        n,
    ))?))
}

fn rc(g: &Arc<FiniteGraph>, q: f64, p: f64, bc: BoundaryCondition) -> Result<Measure> {
    Ok(RandomCluster::with_p(g.clone(), q, p, bc)?.into())
}

fn four_cycle() -> Result<Arc<FiniteGraph>> {
    Ok(Arc::new(FiniteGraph::new(
        vec![0, 1, 2, 3],
        vec![[0, 1], [1, 2], [2, 3], [0, 3]],
        vec![1.0; 4],
        vec![],
        0,
    )?))
}

fn verify_osss(c: &mut Vec<Check>) -> Result<()> {
    let g = square(1)?;
    let n = g.n_edges();
    let edges: Vec<usize> = (0..n).collect();
    for q in [1.0, 2.0] {
        for p in [0.3, 0.5, 0.7] {
            let m = rc(&g, q, p, BoundaryCondition::Free)?;
            let fs = [
                BoolFn::connect(g.clone(), vec![g.origin()], g.boundary().to_vec())?,
                BoolFn::and(n, &edges)?,
                BoolFn::or(n, &edges)?,
                BoolFn::majority(n, &edges)?,
            ];
            let trees = [
                DecisionTree::identity(n),
                DecisionTree::reversed(n),
                DecisionTree::exploration(g.clone(), 1, 1)?,
            ];
            let mut min_slack = f64::INFINITY;
            for f in &fs {
                for t in &trees {
                    min_slack = min_slack.min(check_osss(&m, t, f, CheckOptions::default())?.slack);
                }
            }
            check(
                c,
                format!("osss q={q} p={p}"),
                min_slack >= -1e-12,
                format!("min slack {min_slack:e}"),
            );
        }
    }
    Ok(())
}

fn revealment_suite(c: &mut Vec<Check>) -> Result<()> {
    for n in [1, 2] {
        let g = square(n)?;
        let m = rc(&g, 2.0, 0.5, BoundaryCondition::Wired)?;
        for k in 1..=n {
            let rows = exploration_revealment_bound(&m, k, n)?;
            let worst = rows
                .iter()
                .map(|r| r.revealment - r.bound)
                .fold(f64::NEG_INFINITY, f64::max);
            check(
                c,
                format!("exploration bound n={n} k={k}"),
                worst <= 1e-12,
                format!("max excess {worst:e}"),
            );
        }
    }
    let g = square(1)?;
    let law = rc(&g, 2.0, 0.4, BoundaryCondition::Free)?.exact_law(20)?;
    let f = BoolFn::connect(g.clone(), vec![g.origin()], g.boundary().to_vec())?;
    let t = DecisionTree::exploration(g.clone(), 1, 1)?;
    let a = revealment(&law, &t, &f)?.delta;
    let b = revealment_by_runs(&law, &t, &f)?;
    let diff = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    check(
        c,
        "walk agrees with per-run enumeration",
        diff <= 1e-12,
        format!("{diff:e}"),
    );
    Ok(())
}

fn sample_suite(c: &mut Vec<Check>) -> Result<()> {
    let g = four_cycle()?;
    let law = rc(&g, 2.0, 0.5, BoundaryCondition::Free)?.exact_law(20)?;
    for t in [DecisionTree::identity(4), DecisionTree::reversed(4)] {
        let push = sampler_pushforward(&law, &t)?;
        let diff = push
            .iter()
            .zip(law.probs())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        check(
            c,
            format!("pushforward {}", t.label()),
            diff <= 1e-12,
            format!("{diff:e}"),
        );
    }
    Ok(())
}

fn exact_law_suite(c: &mut Vec<Check>) -> Result<()> {
    let g = four_cycle()?;
    let m = rc(&g, 2.0, 0.5, BoundaryCondition::Free)?;
    let law = m.exact_law(20)?;
    let total: f64 = law.probs().iter().sum();
    check(
        c,
        "normalised",
        (total - 1.0).abs() <= 1e-12,
        format!("{total}"),
    );
    // Weights 2^{k(ω)}/16 on the 4-cycle sum to 82/16.
    let p_empty = law.prob(0);
    check(
        c,
        "empty configuration weight 16/82",
        (p_empty - 16.0 / 82.0).abs() <= 1e-14,
        format!("{p_empty}"),
    );
    let audit = monotonicity_audit(&m)?;
    check(
        c,
        "q=2 is monotonic",
        audit.is_monotonic,
        format!("{} pairs", audit.checked_pairs),
    );
    Ok(())
}

fn theta_suite(c: &mut Vec<Check>) -> Result<()> {
    let s = ChainSettings {
        burnin: 200,
        thin: 1,
        samples: 4000,
        chains: 4,
        seed: 7,
    };
    for p in [0.0, 1.0] {
        let t = estimate_theta(LatticeFamily::Square, 1, 2.0, p, BoxConvention::Doubled, &s)?;
        check(
            c,
            format!("p={p} is exact"),
            t.estimate.mean == p,
            format!("{}", t.estimate.mean),
        );
    }
    let exact =
        ExactTheta::doubled_box(LatticeFamily::Square, 1)?.value(2.0, beta_of_p(0.5, 1.0))?;
    let t = estimate_theta(
        LatticeFamily::Square,
        1,
        2.0,
        0.5,
        BoxConvention::Doubled,
        &s,
    )?;
    let err = (t.estimate.mean - exact).abs();
    let ok = err <= 4.0 * t.estimate.half_width_95.max(1e-3);
    check(
        c,
        "Monte Carlo matches enumeration on Λ_2",
        ok,
        format!("mc {} exact {exact}", t.estimate.mean),
    );
    Ok(())
}

fn crossing_suite(c: &mut Vec<Check>) -> Result<()> {
    let v = exact_crossing(
        1,
        2,
        Orientation::Vertical,
        1.0,
        0.5,
        BoundaryCondition::Free,
    )?;
    check(
        c,
        "2×1 crossing is ½",
        (v - 0.5).abs() <= 1e-12,
        format!("{v}"),
    );
    let exact = exact_crossing(
        3,
        2,
        Orientation::Vertical,
        1.0,
        0.5,
        BoundaryCondition::Free,
    )?;
    let s = ChainSettings {
        burnin: 0,
        thin: 1,
        samples: 20_000,
        chains: 4,
        seed: 11,
    };
    let mc = estimate_crossing(
        3,
        2,
        Orientation::Vertical,
        1.0,
        0.5,
        BoundaryCondition::Free,
        &s,
    )?;
    let ok = (mc.estimate.mean - exact).abs() <= 4.0 * mc.estimate.half_width_95;
    check(
        c,
        "Monte Carlo 3×2 crossing",
        ok,
        format!("mc {} exact {exact}", mc.estimate.mean),
    );
    Ok(())
}

fn scan_suite(c: &mut Vec<Check>) -> Result<()> {
    let ev = ExactTheta::doubled_box(LatticeFamily::Square, 1)?;
    for q in [1.0, 2.0] {
        let r = check_derivative_formula(&ev, q, 0.7, 1e-2)?;
        check(
            c,
            format!("derivative formula q={q}"),
            r.second_order,
            format!("ratio {}", r.halving_ratio),
        );
    }
    for q in [1.0, 2.0] {
        let grid = exact_theta_grid(LatticeFamily::Square, &[1], q, &beta_range(0.05, 1.0, 0.05))?;
        let r = check_differential_inequality(&grid, None)?;
        check(
            c,
            format!("differential inequality q={q}"),
            r.violations == 0,
            format!("min margin {:e}", r.min_margin),
        );
    }
    let m = rc(&square(2)?, 2.0, 0.5, BoundaryCondition::Wired)?;
    let l = check_lemma32(&m, 2)?;
    check(
        c,
        "covariance lower bound on Λ_2",
        l.holds,
        format!("slack {:e}", l.slack),
    );
    Ok(())
}

fn pc_suite(c: &mut Vec<Check>) -> Result<()> {
    for q in [1.0, 1.5, 2.0, 3.0, 4.0] {
        let r = pc_solve(LatticeFamily::Square, q)?;
        let want = q.sqrt() / (1.0 + q.sqrt());
        check(
            c,
            format!("square q={q}"),
            (r.p_c - want).abs() <= 1e-12,
            format!("{}", r.p_c),
        );
    }
    let t = pc_solve(LatticeFamily::Triangular, 1.0)?;
    let h = pc_solve(LatticeFamily::Hexagonal, 1.0)?;
    check(
        c,
        "triangular q=1",
        (t.p_c - 0.3472963553).abs() <= 1e-9,
        format!("{}", t.p_c),
    );
    check(
        c,
        "hexagonal q=1",
        (h.p_c - 0.6527036447).abs() <= 1e-9,
        format!("{}", h.p_c),
    );
    Ok(())
}

fn duality_suite(c: &mut Vec<Check>) -> Result<()> {
    for (w, h) in [(1, 1), (2, 2)] {
        let g = Arc::new(rectangle(w, h, 1.0)?);
        for q in [1.0, 2.0] {
            let r = dual_sample_law_check(&g, q, 0.4)?;
            check(
                c,
                format!("wired {w}×{h} q={q} maps to free dual"),
                r.max_deviation <= 1e-10 && r.involution,
                format!("{:e}", r.max_deviation),
            );
        }
    }
    for q in [1.0, 2.0, 3.0] {
        let r = duality_relation_check(LatticeFamily::Triangular, q, 0.3)?;
        check(
            c,
            format!("relation q={q}"),
            r.involution_error <= 1e-14 && r.critical_pair_residual <= 1e-12,
            format!("{:e}", r.critical_pair_residual),
        );
    }
    Ok(())
}

fn lemma31_suite(c: &mut Vec<Check>) -> Result<()> {
    let r = lemma31_synthetic_check(
        &SyntheticFamily::Smoothed {
            epsilon: 0.1,
            kappa: 1.0,
        },
        1.0,
        400,
    )?;
    check(
        c,
        "smoothed family: P1 and P2",
        r.p1_holds && r.p2_holds,
        format!("β₁ = {}", r.beta1),
    );
    for f in [SyntheticFamily::Constant, SyntheticFamily::Threshold] {
        let refused = lemma31_synthetic_check(&f, 1.0, 100).is_err();
        check(c, format!("{} refused", f.label()), refused, "");
    }
    Ok(())
}

fn potts_suite(c: &mut Vec<Check>) -> Result<()> {
    for (n, q) in [(1, 2), (1, 3), (2, 2)] {
        let r = potts_rc_identity_check(&*square(n)?, q, 0.6)?;
        check(
            c,
            format!("Λ_{n} q={q}"),
            r.difference.abs() <= 1e-10,
            format!("{:e}", r.difference),
        );
    }
    Ok(())
}

pub fn run(cmd: &Command, _global: &GlobalArgs) -> std::result::Result<Outcome, Failure> {
    let mut checks = Vec::new();
    match cmd {
        Command::VerifyOsss(_) => verify_osss(&mut checks),
        Command::Revealment(_) => revealment_suite(&mut checks),
        Command::Sample(_) => sample_suite(&mut checks),
        Command::ExactLaw(_) => exact_law_suite(&mut checks),
        Command::EstimateTheta(_) => theta_suite(&mut checks),
        Command::Crossing(_) => crossing_suite(&mut checks),
        Command::SharpnessScan(_) => scan_suite(&mut checks),
        Command::PcSolve(_) => pc_suite(&mut checks),
        Command::DualityCheck(_) => duality_suite(&mut checks),
        Command::Lemma31(_) => lemma31_suite(&mut checks),
        Command::PottsIdentity(_) => potts_suite(&mut checks),
    }?;
    let passed = checks.iter().all(|c| c.passed);
    Outcome::json(
        &SelftestReport {
            command: cmd.name(),
            passed,
            checks,
        },
        !passed,
    )
}
