//! Exact computations over the histories of a tree: revealments, stopped
//! conditional expectations and the law of the sequential sampler.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{run_tree, BoolFn, Cursor, DecisionTree};
use crate::measure::{Config, ExactLaw};
use crate::stats::Z95;
use crate::{Error, Result};

/// Predicate on the `(edge, value)` history read so far.
pub type StopPredicate = Arc<dyn Fn(&[(usize, bool)]) -> bool + Send + Sync>;

/// When to stop reading a tree. Stopping is only allowed after at least one
/// query, and always happens once every edge has been read.
#[derive(Clone)]
pub enum StoppingRule {
    /// The determination time `τ` of the function under study.
    Determined,
    /// After `k ≥ 1` queries.
    AfterQueries(usize),
    /// Read every edge.
    Full,
    /// Stop at the listed histories (sequences of `(edge, bit)`).
    Histories(Vec<Vec<(usize, bool)>>),
    /// Any history-measurable rule.
    Predicate(StopPredicate),
}

impl fmt::Debug for StoppingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoppingRule::Determined => write!(f, "Determined"),
            StoppingRule::AfterQueries(k) => write!(f, "AfterQueries({k})"),
            StoppingRule::Full => write!(f, "Full"),
            StoppingRule::Histories(h) => write!(f, "Histories({} entries)", h.len()),
            StoppingRule::Predicate(_) => write!(f, "Predicate"),
        }
    }
}

impl StoppingRule {
    pub fn label(&self) -> String {
        match self {
            StoppingRule::Determined => "determination".into(),
            StoppingRule::AfterQueries(k) => format!("after-{k}"),
            StoppingRule::Full => "full".into(),
            StoppingRule::Histories(_) => "history-table".into(),
            StoppingRule::Predicate(_) => "predicate".into(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let StoppingRule::AfterQueries(0) = self {
            return Err(Error::InvalidParameter(
                "stopping needs at least one query".into(),
            ));
        }
        if let StoppingRule::Histories(hs) = self {
            if hs.iter().any(Vec::is_empty) {
                return Err(Error::InvalidParameter(
                    "stopping needs at least one query".into(),
                ));
            }
        }
        Ok(())
    }

    fn stops(
        &self,
        history: &[(usize, bool)],
        f: &BoolFn,
        support: u64,
        values: u64,
        n: usize,
    ) -> bool {
        if history.len() == n {
            return true;
        }
        if history.is_empty() {
            return false;
        }
        match self {
            StoppingRule::Determined => f.determined_masks(support, values).is_some(),
            StoppingRule::AfterQueries(k) => history.len() >= *k,
            StoppingRule::Full => false,
            StoppingRule::Histories(hs) => hs.iter().any(|h| h.as_slice() == history),
            StoppingRule::Predicate(p) => p(history),
        }
    }
}

struct Walker<'a, F: FnMut(&[(usize, bool)], u64, u64, f64)> {
    law: &'a ExactLaw,
    f: &'a BoolFn,
    stop: &'a StoppingRule,
    delta: Vec<f64>,
    history: Vec<(usize, bool)>,
    leaf: F,
}

impl<F: FnMut(&[(usize, bool)], u64, u64, f64)> Walker<'_, F> {
    fn go(&mut self, cursor: Cursor<'_>, support: u64, values: u64) -> Result<()> {
        let prob = self.law.cylinder(support, values);
        if prob <= 0.0 {
            return Ok(());
        }
        let n = self.law.n_edges();
        if self.stop.stops(&self.history, self.f, support, values, n) {
            (self.leaf)(&self.history, support, values, prob);
            return Ok(());
        }
        let mut c = cursor;
        let e = c.next_edge().expect("unfinished history has a next edge");
        if support >> e & 1 == 1 {
            return Err(Error::InvalidTree(format!("edge {e} queried twice")));
        }
        self.delta[e] += prob;
        for bit in [false, true] {
            let mut child = c.clone();
            child.reveal(e, bit)?;
            self.history.push((e, bit));
            let r = self.go(child, support | 1 << e, values | (bit as u64) << e);
            self.history.pop();
            r?;
        }
        Ok(())
    }
}

fn walk<F: FnMut(&[(usize, bool)], u64, u64, f64)>(
    law: &ExactLaw,
    tree: &DecisionTree,
    f: &BoolFn,
    stop: &StoppingRule,
    leaf: F,
) -> Result<Vec<f64>> {
    let n = law.n_edges();
    if tree.n_edges() != n || f.n_edges() != n {
        return Err(Error::InvalidParameter(
            "tree, function and measure sizes differ".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("no edges".into()));
    }
    stop.validate()?;
    let mut w = Walker {
        law,
        f,
        stop,
        delta: vec![0.0; n],
        history: Vec::new(),
        leaf,
    };
    w.go(tree.cursor(), 0, 0)?;
    Ok(w.delta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum RevealmentMethod {
    Exact,
    MonteCarlo {
        samples: u64,
        half_width_95: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevealmentReport {
    /// `δ_e = μ[e is queried at some t ≤ τ]`.
    pub delta: Vec<f64>,
    #[serde(flatten)]
    pub method: RevealmentMethod,
}

/// Exact revealments `δ_e(f,T)`, summing cylinder probabilities over the
/// histories of the tree up to the determination time.
pub fn revealment(law: &ExactLaw, tree: &DecisionTree, f: &BoolFn) -> Result<RevealmentReport> {
    revealment_until(law, tree, f, &StoppingRule::Determined)
}

/// Exact `μ[e is queried at some t ≤ τ]` for a stopping rule `τ`.
pub fn revealment_until(
    law: &ExactLaw,
    tree: &DecisionTree,
    f: &BoolFn,
    stop: &StoppingRule,
) -> Result<RevealmentReport> {
    let delta = walk(law, tree, f, stop, |_, _, _, _| {})?;
    Ok(RevealmentReport {
        delta: delta.into_iter().map(|d| d.min(1.0)).collect(),
        method: RevealmentMethod::Exact,
    })
}

/// Revealments by running the tree on every configuration separately.
pub fn revealment_by_runs(law: &ExactLaw, tree: &DecisionTree, f: &BoolFn) -> Result<Vec<f64>> {
    let n = law.n_edges();
    let mut delta = vec![0.0; n];
    for (mask, &p) in law.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let omega = Config::from_mask(mask as u64, n);
        let tr = run_tree(tree, &omega.bits, f)?;
        for &e in &tr.order[..tr.tau] {
            delta[e] += p;
        }
    }
    Ok(delta)
}

/// Monte Carlo revealments from independent chains of samples.
pub fn revealment_from_samples(
    tree: &DecisionTree,
    f: &BoolFn,
    chains: &[Vec<Config>],
) -> Result<RevealmentReport> {
    let n = tree.n_edges();
    let mut per_chain: Vec<Vec<f64>> = Vec::with_capacity(chains.len());
    let mut total = 0u64;
    for chain in chains {
        let mut hits = vec![0.0; n];
        for omega in chain {
            let tr = run_tree(tree, &omega.bits, f)?;
            for &e in &tr.order[..tr.tau] {
                hits[e] += 1.0;
            }
        }
        total += chain.len() as u64;
        per_chain.push(hits);
    }
    if total == 0 {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    let delta: Vec<f64> = (0..n)
        .map(|e| per_chain.iter().map(|h| h[e]).sum::<f64>() / total as f64)
        .collect();
    let half_width_95 = (0..n)
        .map(|e| {
            let means: Vec<f64> = per_chain
                .iter()
                .zip(chains)
                .filter(|(_, c)| !c.is_empty())
                .map(|(h, c)| h[e] / c.len() as f64)
                .collect();
            if means.len() < 2 {
                return f64::INFINITY;
            }
            let m = means.iter().sum::<f64>() / means.len() as f64;
            let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
            Z95 * (var / means.len() as f64).sqrt()
        })
        .collect();
    Ok(RevealmentReport {
        delta,
        method: RevealmentMethod::MonteCarlo {
            samples: total,
            half_width_95,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppedHistory {
    pub history: Vec<(usize, bool)>,
    pub prob: f64,
    pub conditional_expectation: f64,
}

/// `μ[f | 𝓕_τ]` on each stopped history, with the residual `μ|f - μ[f|𝓕_τ]|`
/// and the revealments up to `τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppedExpectation {
    pub histories: Vec<StoppedHistory>,
    pub residual: f64,
    pub delta: Vec<f64>,
}

pub fn conditional_expectation_at_stop(
    law: &ExactLaw,
    tree: &DecisionTree,
    stop: &StoppingRule,
    f: &BoolFn,
) -> Result<StoppedExpectation> {
    let full = law.full_mask();
    let mut histories = Vec::new();
    let mut residual = 0.0;
    let delta = walk(law, tree, f, stop, |history, support, values, prob| {
        let free = full & !support;
        let completions = || {
            let mut sub = free;
            let mut out = Vec::new();
            loop {
                out.push(values | sub);
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & free;
            }
            out
        };
        let masks = completions();
        let mean = masks
            .iter()
            .map(|&m| law.prob(m) * f.eval_mask(m))
            .sum::<f64>()
            / prob;
        residual += masks
            .iter()
            .map(|&m| law.prob(m) * (f.eval_mask(m) - mean).abs())
            .sum::<f64>();
        histories.push(StoppedHistory {
            history: history.to_vec(),
            prob,
            conditional_expectation: mean,
        });
    })?;
    Ok(StoppedExpectation {
        histories,
        residual,
        delta: delta.into_iter().map(|d| d.min(1.0)).collect(),
    })
}

/// The sequential sampler: along the order chosen by `tree`, set
/// `x_{e_t} = 1` iff `u_t ≥ μ[ω_{e_t} = 0 | revealed past]`. Uniforms are
/// consumed strictly in query order.
pub fn sequential_sample(law: &ExactLaw, tree: &DecisionTree, u: &[f64]) -> Result<Config> {
    let n = law.n_edges();
    if u.len() != n || tree.n_edges() != n {
        return Err(Error::InvalidParameter("need one uniform per edge".into()));
    }
    let mut c = tree.cursor();
    let (mut support, mut values) = (0u64, 0u64);
    for &ut in u {
        let e = c.next_edge().expect("tree reads every edge");
        let past = law.cylinder(support, values);
        if past <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        let closed = law.cylinder(support | 1 << e, values) / past;
        let bit = ut >= closed;
        c.reveal(e, bit)?;
        support |= 1 << e;
        values |= (bit as u64) << e;
    }
    Ok(Config::from_mask(values, n))
}

pub fn sample_with<R: Rng>(law: &ExactLaw, tree: &DecisionTree, rng: &mut R) -> Result<Config> {
    let u: Vec<f64> = (0..law.n_edges()).map(|_| rng.random::<f64>()).collect();
    sequential_sample(law, tree, &u)
}

/// Law of the sequential sampler's output under i.i.d. uniform input,
/// obtained by integrating over the threshold cells of `[0,1]^n`.
pub fn sampler_pushforward(law: &ExactLaw, tree: &DecisionTree) -> Result<Vec<f64>> {
    let n = law.n_edges();
    let mut out = vec![0.0; 1 << n];
    fn go(
        law: &ExactLaw,
        c: Cursor<'_>,
        support: u64,
        values: u64,
        weight: f64,
        out: &mut [f64],
    ) -> Result<()> {
        if weight == 0.0 {
            return Ok(());
        }
        let mut c = c;
        let Some(e) = c.next_edge() else {
            out[values as usize] += weight;
            return Ok(());
        };
        let past = law.cylinder(support, values);
        if past <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        // The cell u_t < threshold has length `threshold`.
        let threshold = law.cylinder(support | 1 << e, values) / past;
        for (bit, len) in [(false, threshold), (true, 1.0 - threshold)] {
            let mut child = c.clone();
            child.reveal(e, bit)?;
            go(
                law,
                child,
                support | 1 << e,
                values | (bit as u64) << e,
                weight * len,
                out,
            )?;
        }
        Ok(())
    }
    go(law, tree.cursor(), 0, 0, 1.0, &mut out)?;
    Ok(out)
}
