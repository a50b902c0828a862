//! Variance, covariance and influence under an exact law, and exact checks
//! of the OSSS-type inequalities for monotonic measures.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dtree::{
    conditional_expectation_at_stop, revealment, BoolFn, ConnectFn, DecisionTree, StoppingRule,
};
use crate::graph::FiniteGraph;
use crate::measure::{enumeration_cap, monotonicity_audit, ExactLaw, Measure, AUDIT_CAP};
use crate::unionfind::UnionFind;
use crate::{Error, Result, EXACT_TOL};

pub fn mean(law: &ExactLaw, f: &BoolFn) -> f64 {
    law.expectation(|m| f.eval_mask(m))
}

pub fn variance(law: &ExactLaw, f: &BoolFn) -> f64 {
    let mu = mean(law, f);
    law.expectation(|m| (f.eval_mask(m) - mu).powi(2))
}

/// `Cov(f, ω_e) = μ[f ω_e] - μ[f] μ[ω_e]`.
pub fn covariance(law: &ExactLaw, f: &BoolFn, e: usize) -> f64 {
    let mu = mean(law, f);
    let pe = law.marginal(e);
    law.expectation(|m| (f.eval_mask(m) - mu) * ((m >> e & 1) as f64 - pe))
}

/// `I_e[f] = μ[f | ω_e = 1] - μ[f | ω_e = 0]`; errors on degenerate edges.
pub fn influence(law: &ExactLaw, f: &BoolFn, e: usize) -> Result<f64> {
    let pe = law.marginal(e);
    if pe <= 0.0 || pe >= 1.0 {
        return Err(Error::ZeroProbability);
    }
    let on = law.expectation(|m| if m >> e & 1 == 1 { f.eval_mask(m) } else { 0.0 }) / pe;
    let off = law.expectation(|m| if m >> e & 1 == 0 { f.eval_mask(m) } else { 0.0 }) / (1.0 - pe);
    Ok(on - off)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OsssVariant {
    /// `Var f ≤ Σ δ_e Cov(f, ω_e)`.
    Covariance,
    /// `Var f ≤ Σ δ_e I_e[f]`.
    Influence,
    /// `Var f ≤ Σ Cov(f, ω_e)` (every revealment equal to 1).
    Poincare,
    /// `Var f ≤ Σ δ_e Cov(f, ω_e) + μ|f - μ[f|𝓕_τ]|` for a stopping time `τ`.
    Stopped,
}

impl std::str::FromStr for OsssVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "covariance" => Ok(OsssVariant::Covariance),
            "influence" => Ok(OsssVariant::Influence),
            "poincare" => Ok(OsssVariant::Poincare),
            "stopped" => Ok(OsssVariant::Stopped),
            other => Err(Error::InvalidParameter(format!(
                "unknown variant `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub edge: usize,
    pub revealment: f64,
    pub covariance: f64,
    /// `None` when `μ[ω_e = 1] ∈ {0, 1}`.
    pub influence: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OsssReport {
    pub variant: OsssVariant,
    pub measure: String,
    pub tree: String,
    pub function: String,
    pub variance: f64,
    pub edges: Vec<EdgeRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    pub rhs: f64,
    /// `rhs - variance`.
    pub slack: f64,
    pub holds: bool,
    pub warnings: Vec<String>,
}

impl OsssReport {
    /// One row per edge: `e, δ_e, Cov, I_e`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["edge", "revealment", "covariance", "influence"])?;
        for row in &self.edges {
            w.write_record([
                row.edge.to_string(),
                row.revealment.to_string(),
                row.covariance.to_string(),
                row.influence.map_or_else(String::new, |i| i.to_string()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CheckOptions {
    /// Run even when a hypothesis of the inequality fails.
    pub force: bool,
}

/// Verifies the hypotheses (increasing `f` into `[0,1]`, monotonic measure)
/// and returns the law and the function to use, rescaled if needed.
fn prepare(
    m: &Measure,
    f: &BoolFn,
    opts: CheckOptions,
    warnings: &mut Vec<String>,
) -> Result<(ExactLaw, BoolFn)> {
    let n = m.n_edges();
    if f.n_edges() != n {
        return Err(Error::InvalidParameter(
            "function and measure sizes differ".into(),
        ));
    }
    let law = m.exact_law(enumeration_cap())?;
    if !f.is_increasing() {
        let msg = format!("{} is not increasing", f.name());
        if !opts.force {
            return Err(Error::Hypothesis(msg));
        }
        warnings.push(msg);
    }
    if !m.known_monotonic() {
        if n > AUDIT_CAP {
            let msg = format!("monotonicity cannot be audited above {AUDIT_CAP} edges");
            if !opts.force {
                return Err(Error::Hypothesis(msg));
            }
            warnings.push(msg);
        } else {
            let audit = monotonicity_audit(m)?;
            if let Some(w) = audit.witness {
                let msg = format!(
                    "measure is not monotonic: edge {} on {:?}, conditional {} at {:?} > {} at {:?}",
                    w.edge, w.conditioned_on, w.cond_xi, w.xi, w.cond_zeta, w.zeta
                );
                if !opts.force {
                    return Err(Error::Hypothesis(msg));
                }
                warnings.push(msg);
            }
        }
    }
    let f = normalise(f, warnings)?;
    Ok((law, f))
}

/// Affinely maps a function with range outside `[0,1]` onto `[0,1]`.
fn normalise(f: &BoolFn, warnings: &mut Vec<String>) -> Result<BoolFn> {
    let (lo, hi) = f.range().unwrap_or((0.0, 1.0));
    if lo >= 0.0 && hi <= 1.0 {
        return Ok(f.clone());
    }
    let t = f.to_table()?;
    let span = hi - lo;
    warnings.push(format!(
        "{} has range [{lo}, {hi}]; rescaled to [0, 1]",
        f.name()
    ));
    BoolFn::table(
        format!("{} (rescaled)", f.name()),
        f.n_edges(),
        t.values().iter().map(|v| (v - lo) / span).collect(),
    )
}

fn edge_rows(law: &ExactLaw, f: &BoolFn, delta: &[f64]) -> Vec<EdgeRow> {
    (0..law.n_edges())
        .map(|e| EdgeRow {
            edge: e,
            revealment: delta[e],
            covariance: covariance(law, f, e),
            influence: influence(law, f, e).ok(),
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn finish(
    variant: OsssVariant,
    m: &Measure,
    tree: &str,
    f: &BoolFn,
    variance: f64,
    edges: Vec<EdgeRow>,
    residual: Option<f64>,
    warnings: Vec<String>,
) -> OsssReport {
    let main: f64 = edges
        .iter()
        .map(|r| match variant {
            OsssVariant::Influence => r.revealment * r.influence.unwrap_or(0.0),
            _ => r.revealment * r.covariance,
        })
        .sum();
    let rhs = main + residual.unwrap_or(0.0);
    let slack = rhs - variance;
    OsssReport {
        variant,
        measure: m.label(),
        tree: tree.to_string(),
        function: f.name(),
        variance,
        edges,
        residual,
        rhs,
        slack,
        holds: slack >= -EXACT_TOL,
        warnings,
    }
}

/// `Var_μ(f) ≤ Σ_e δ_e(f,T) Cov_μ(f, ω_e)`, all terms exact.
pub fn check_osss(
    m: &Measure,
    tree: &DecisionTree,
    f: &BoolFn,
    opts: CheckOptions,
) -> Result<OsssReport> {
    check_variant(OsssVariant::Covariance, m, tree, f, opts)
}

pub fn check_variant(
    variant: OsssVariant,
    m: &Measure,
    tree: &DecisionTree,
    f: &BoolFn,
    opts: CheckOptions,
) -> Result<OsssReport> {
    if variant == OsssVariant::Stopped {
        return check_osss_stopped(m, tree, &StoppingRule::Determined, f, opts);
    }
    let mut warnings = Vec::new();
    let (law, f) = prepare(m, f, opts, &mut warnings)?;
    let n = law.n_edges();
    let (delta, tree_label) = match variant {
        OsssVariant::Poincare => (vec![1.0; n], "full-scan".to_string()),
        _ => (revealment(&law, tree, &f)?.delta, tree.label()),
    };
    let rows = edge_rows(&law, &f, &delta);
    if variant == OsssVariant::Influence {
        for r in rows.iter().filter(|r| r.influence.is_none()) {
            warnings.push(format!(
                "edge {} is degenerate; its influence term is dropped",
                r.edge
            ));
        }
    }
    Ok(finish(
        variant,
        m,
        &tree_label,
        &f,
        variance(&law, &f),
        rows,
        None,
        warnings,
    ))
}

/// `Var_μ(f) ≤ Σ_e δ_e Cov_μ(f, ω_e) + μ|f - μ[f|𝓕_τ]|` with `δ_e` the
/// probability that `e` is read by time `τ`.
pub fn check_osss_stopped(
    m: &Measure,
    tree: &DecisionTree,
    stop: &StoppingRule,
    f: &BoolFn,
    opts: CheckOptions,
) -> Result<OsssReport> {
    let mut warnings = Vec::new();
    let (law, f) = prepare(m, f, opts, &mut warnings)?;
    let stopped = conditional_expectation_at_stop(&law, tree, stop, &f)?;
    let rows = edge_rows(&law, &f, &stopped.delta);
    Ok(finish(
        OsssVariant::Stopped,
        m,
        &format!("{} stopped at {}", tree.label(), stop.label()),
        &f,
        variance(&law, &f),
        rows,
        Some(stopped.residual),
        warnings,
    ))
}

/// Both sides of the covariance lower bound for `1{0 ↔ ∂Λ_n}`:
/// `Σ_e Cov ≥ n θ(1-θ) / (4 max_x Σ_{k<n} μ[x ↔ ∂Λ_k(x)])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma32Report {
    pub n: usize,
    /// `Σ_e Cov(1{0↔∂Λ_n}, ω_e)`.
    pub lhs: f64,
    /// `μ[0 ↔ ∂Λ_n]`.
    pub theta: f64,
    /// `max_x Σ_{k<n} μ[x ↔ ∂Λ_k(x)]`.
    pub max_sum: f64,
    /// Vertex label attaining the maximum.
    pub argmax: u64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

pub fn check_lemma32(m: &Measure, n: usize) -> Result<Lemma32Report> {
    let g = m.graph().ok_or_else(|| {
        Error::InvalidParameter("the covariance bound needs a measure on a graph".into())
    })?;
    let g = Arc::new(g.clone());
    let law = m.exact_law(enumeration_cap())?;
    let f = BoolFn::Connect(ConnectFn::origin_to_sphere(g.clone(), n)?);
    let lhs: f64 = (0..law.n_edges()).map(|e| covariance(&law, &f, e)).sum();
    let theta = mean(&law, &f);

    let origin_dist = g.box_distances(g.origin());
    let xs: Vec<usize> = (0..g.n_vertices())
        .filter(|&x| matches!(origin_dist[x], Some(d) if d <= n))
        .collect();
    // spheres[i][k] = ∂Λ_k(x_i) inside the graph
    let spheres: Vec<Vec<Vec<usize>>> = xs
        .iter()
        .map(|&x| {
            let d = g.box_distances(x);
            (0..n)
                .map(|k| (0..g.n_vertices()).filter(|&y| d[y] == Some(k)).collect())
                .collect()
        })
        .collect();
    let mut sums = vec![0.0; xs.len()];
    let mut uf = UnionFind::new(g.n_vertices());
    for (mask, &p) in law.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        uf.reset();
        for (e, &[u, v]) in g.edges().iter().enumerate() {
            if mask >> e & 1 == 1 {
                uf.union(u, v);
            }
        }
        for (i, &x) in xs.iter().enumerate() {
            let rx = uf.find(x);
            let hits = spheres[i]
                .iter()
                .filter(|s| s.iter().any(|&y| uf.find(y) == rx))
                .count();
            sums[i] += p * hits as f64;
        }
    }
    let (best, &max_sum) = sums
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("box has vertices");
    let rhs = n as f64 / (4.0 * max_sum) * theta * (1.0 - theta);
    Ok(Lemma32Report {
        n,
        lhs,
        theta,
        max_sum,
        argmax: g.label(xs[best]),
        rhs,
        slack: lhs - rhs,
        holds: lhs >= rhs - EXACT_TOL,
    })
}

/// Per-edge comparison of the exploration-tree revealment with
/// `μ[u ↔ ∂Λ_k] + μ[v ↔ ∂Λ_k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevealmentBoundRow {
    pub edge: usize,
    pub revealment: f64,
    pub bound: f64,
}

pub fn exploration_revealment_bound(
    m: &Measure,
    k: usize,
    n: usize,
) -> Result<Vec<RevealmentBoundRow>> {
    let g = m.graph().ok_or_else(|| {
        Error::InvalidParameter("the revealment bound needs a measure on a graph".into())
    })?;
    let g = Arc::new(g.clone());
    let law = m.exact_law(enumeration_cap())?;
    let tree = DecisionTree::exploration(g.clone(), k, n)?;
    let f = BoolFn::Connect(ConnectFn::origin_to_sphere(g.clone(), n)?);
    let delta = revealment(&law, &tree, &f)?.delta;
    let seeds = g.sphere(g.origin(), k);
    let mut reach = vec![0.0; g.n_vertices()];
    let mut uf = UnionFind::new(g.n_vertices());
    for (mask, &p) in law.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        uf.reset();
        for (e, &[u, v]) in g.edges().iter().enumerate() {
            if mask >> e & 1 == 1 {
                uf.union(u, v);
            }
        }
        for &s in &seeds[1..] {
            uf.union(seeds[0], s);
        }
        let anchor = uf.find(seeds[0]);
        for (x, r) in reach.iter_mut().enumerate() {
            if uf.find(x) == anchor {
                *r += p;
            }
        }
    }
    Ok((0..g.n_edges())
        .map(|e| {
            let [u, v] = g.endpoints(e);
            RevealmentBoundRow {
                edge: e,
                revealment: delta[e],
                bound: reach[u] + reach[v],
            }
        })
        .collect())
}

/// Convenience for graph-based checks on a box.
pub fn origin_connection(graph: &Arc<FiniteGraph>, n: usize) -> Result<BoolFn> {
    Ok(BoolFn::Connect(ConnectFn::origin_to_sphere(
        graph.clone(),
        n,
    )?))
}
