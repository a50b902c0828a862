//! Single-bond heat-bath dynamics for random-cluster measures and Monte Carlo
//! estimators of connection and crossing probabilities.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{build_box, rectangle, wired_dual, FiniteGraph, LatticeFamily, LatticeSpec};
use crate::measure::{enumeration_cap, BoundaryCondition, Config, Measure, RandomCluster};
use crate::sharpness::dual_parameter;
use crate::stats::Estimate;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSettings {
    pub burnin: u64,
    /// Sweeps between recorded samples.
    pub thin: u64,
    /// Samples recorded per chain.
    pub samples: u64,
    pub chains: u64,
    pub seed: u64,
}

impl Default for ChainSettings {
    fn default() -> Self {
        ChainSettings {
            burnin: 1000,
            thin: 10,
            samples: 1000,
            chains: 8,
            seed: 0,
        }
    }
}

impl ChainSettings {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 || self.samples == 0 || self.chains == 0 {
            return Err(Error::InvalidParameter(
                "thinning, samples and chains must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// The RNG of chain `chain`: ChaCha8 seeded with `seed`, on stream `chain`.
pub fn chain_rng(seed: u64, chain: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

/// Heat-bath chain: each update resamples one edge from its conditional law
/// given all the others.
#[derive(Clone, Debug)]
pub struct HeatBath {
    graph: Arc<FiniteGraph>,
    q: f64,
    p: Vec<f64>,
    /// `p/(p + q(1-p))`, the open probability when the endpoints are not
    /// otherwise connected.
    p_cut: Vec<f64>,
    wired: bool,
    omega: Vec<bool>,
    mark_a: Vec<u32>,
    mark_b: Vec<u32>,
    generation: u32,
    queue_a: Vec<usize>,
    queue_b: Vec<usize>,
}

impl HeatBath {
    pub fn new(m: &RandomCluster, initial: Vec<bool>) -> Result<Self> {
        if m.q() < 1.0 {
            return Err(Error::InvalidParameter(
                "heat-bath dynamics need q ≥ 1".into(),
            ));
        }
        let g = m.graph_arc().clone();
        if initial.len() != g.n_edges() {
            return Err(Error::InvalidParameter(
                "initial configuration has the wrong length".into(),
            ));
        }
        let n = g.n_vertices();
        Ok(HeatBath {
            q: m.q(),
            p: m.edge_probs().to_vec(),
            p_cut: (0..g.n_edges())
                .map(|e| m.single_bond_conditional(e, false))
                .collect(),
            wired: m.boundary_condition() == BoundaryCondition::Wired,
            omega: initial,
            mark_a: vec![0; n],
            mark_b: vec![0; n],
            generation: 0,
            queue_a: Vec::new(),
            queue_b: Vec::new(),
            graph: g,
        })
    }

    pub fn config(&self) -> &[bool] {
        &self.omega
    }

    pub fn graph(&self) -> &FiniteGraph {
        &self.graph
    }

    pub fn set_config(&mut self, omega: Vec<bool>) {
        assert_eq!(omega.len(), self.omega.len());
        self.omega = omega;
    }

    /// Whether the endpoints of `e` are joined by open edges other than `e`
    /// (or both reach the boundary, in wired mode). Two breadth-first
    /// searches are grown alternately so that the cost is bounded by the
    /// smaller cluster.
    pub fn connected_off(&mut self, e: usize) -> bool {
        let [u, v] = self.graph.endpoints(e);
        let g = &*self.graph;
        let mut touched_a = self.wired && g.is_boundary(u);
        let mut touched_b = self.wired && g.is_boundary(v);
        if touched_a && touched_b {
            return true;
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.mark_a.iter_mut().for_each(|m| *m = 0);
            self.mark_b.iter_mut().for_each(|m| *m = 0);
            self.generation = 1;
        }
        let gen = self.generation;
        self.queue_a.clear();
        self.queue_b.clear();
        self.queue_a.push(u);
        self.queue_b.push(v);
        self.mark_a[u] = gen;
        self.mark_b[v] = gen;
        let (mut head_a, mut head_b) = (0, 0);
        loop {
            let done_a = head_a == self.queue_a.len();
            let done_b = head_b == self.queue_b.len();
            if (done_a && !touched_a) || (done_b && !touched_b) || (done_a && done_b) {
                return false;
            }
            if !done_a {
                let x = self.queue_a[head_a];
                head_a += 1;
                for &(w, f) in g.neighbors(x) {
                    if f == e || !self.omega[f] || self.mark_a[w] == gen {
                        continue;
                    }
                    if self.mark_b[w] == gen {
                        return true;
                    }
                    self.mark_a[w] = gen;
                    self.queue_a.push(w);
                    if self.wired && g.is_boundary(w) {
                        touched_a = true;
                        if touched_b {
                            return true;
                        }
                    }
                }
            }
            if !done_b {
                let x = self.queue_b[head_b];
                head_b += 1;
                for &(w, f) in g.neighbors(x) {
                    if f == e || !self.omega[f] || self.mark_b[w] == gen {
                        continue;
                    }
                    if self.mark_a[w] == gen {
                        return true;
                    }
                    self.mark_b[w] = gen;
                    self.queue_b.push(w);
                    if self.wired && g.is_boundary(w) {
                        touched_b = true;
                        if touched_a {
                            return true;
                        }
                    }
                }
            }
        }
    }

    /// Probability that `e` is open given the current state of the others.
    pub fn conditional(&mut self, e: usize) -> f64 {
        if self.q == 1.0 || self.connected_off(e) {
            self.p[e]
        } else {
            self.p_cut[e]
        }
    }

    pub fn step<R: Rng>(&mut self, e: usize, rng: &mut R) {
        let u: f64 = rng.random();
        // Skip the connectivity query when the answer cannot matter.
        self.omega[e] = if u < self.p_cut[e] {
            true
        } else if u >= self.p[e] {
            false
        } else {
            self.connected_off(e)
        };
    }

    /// One pass over all edges in their fixed order.
    pub fn sweep<R: Rng>(&mut self, rng: &mut R) {
        for e in 0..self.omega.len() {
            self.step(e, rng);
        }
    }
}

/// Runs independent chains and averages `observable` over the recorded
/// samples, with a between-chain confidence interval.
pub fn run_chains<F>(m: &RandomCluster, settings: &ChainSettings, observable: F) -> Result<Estimate>
where
    F: Fn(&[bool]) -> f64 + Sync,
{
    settings.validate()?;
    let n = m.graph().n_edges();
    let chains: Vec<(f64, u64)> = (0..settings.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = chain_rng(settings.seed, c);
            let mut hb = HeatBath::new(m, vec![false; n])?;
            for _ in 0..settings.burnin {
                hb.sweep(&mut rng);
            }
            let mut sum = 0.0;
            for _ in 0..settings.samples {
                for _ in 0..settings.thin {
                    hb.sweep(&mut rng);
                }
                sum += observable(hb.config());
            }
            Ok((sum, settings.samples))
        })
        .collect::<Result<_>>()?;
    Ok(Estimate::from_chains(&chains))
}

/// Recorded configurations of each chain.
pub fn sample_chains(m: &RandomCluster, settings: &ChainSettings) -> Result<Vec<Vec<Config>>> {
    settings.validate()?;
    let n = m.graph().n_edges();
    (0..settings.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = chain_rng(settings.seed, c);
            let mut hb = HeatBath::new(m, vec![false; n])?;
            for _ in 0..settings.burnin {
                hb.sweep(&mut rng);
            }
            let mut out = Vec::with_capacity(settings.samples as usize);
            for _ in 0..settings.samples {
                for _ in 0..settings.thin {
                    hb.sweep(&mut rng);
                }
                out.push(Config {
                    bits: hb.config().to_vec(),
                });
            }
            Ok(out)
        })
        .collect()
}

/// Breadth-first search from `source` over open edges; true once a vertex
/// satisfying `target` is reached.
pub fn reaches(
    g: &FiniteGraph,
    omega: &[bool],
    source: usize,
    target: impl Fn(usize) -> bool,
) -> bool {
    if target(source) {
        return true;
    }
    let mut seen = vec![false; g.n_vertices()];
    let mut queue = vec![source];
    seen[source] = true;
    let mut head = 0;
    while head < queue.len() {
        let x = queue[head];
        head += 1;
        for &(w, f) in g.neighbors(x) {
            if omega[f] && !seen[w] {
                if target(w) {
                    return true;
                }
                seen[w] = true;
                queue.push(w);
            }
        }
    }
    false
}

/// Which box the measure behind `θ_n` lives on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxConvention {
    /// Wired measure on `Λ_{2n}`.
    #[default]
    Doubled,
    /// Wired measure on `Λ_n`.
    Plain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub n: usize,
    pub q: f64,
    pub p: f64,
    pub estimate: Estimate,
    pub convention: BoxConvention,
    pub settings: ChainSettings,
}

/// `θ_n = φ^w_{Λ_{2n}}[0 ↔ ∂Λ_n]` (or on `Λ_n` with the plain convention).
pub fn estimate_theta(
    family: LatticeFamily,
    n: usize,
    q: f64,
    p: f64,
    convention: BoxConvention,
    settings: &ChainSettings,
) -> Result<ThetaEstimate> {
    let radius = match convention {
        BoxConvention::Doubled => 2 * n,
        BoxConvention::Plain => n,
    };
    let g = Arc::new(build_box(&LatticeSpec::new(family, radius.max(1)))?);
    let m = RandomCluster::with_p(g.clone(), q, p, BoundaryCondition::Wired)?;
    let dist = g.box_distances(g.origin());
    let estimate = if n == 0 {
        Estimate::exact(1.0)
    } else if p == 0.0 || p == 1.0 {
        Estimate::exact(p)
    } else {
        run_chains(&m, settings, |omega| {
            reaches(&g, omega, g.origin(), |x| dist[x] >= Some(n)) as u8 as f64
        })?
    };
    Ok(ThetaEstimate {
        n,
        q,
        p,
        estimate,
        convention,
        settings: *settings,
    })
}

/// Bernoulli percolation: `θ_k = P[0 ↔ ∂Λ_k]` for every `k ≤ n_max` from
/// independent explorations of the origin's cluster (the law of the cluster
/// inside `Λ_k` does not depend on the box). Each chain draws
/// `settings.samples` clusters; burn-in and thinning are ignored.
pub fn percolation_radius_profile(
    family: LatticeFamily,
    n_max: usize,
    p: f64,
    settings: &ChainSettings,
) -> Result<Vec<Estimate>> {
    settings.validate()?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p = {p} outside [0,1]")));
    }
    let g = build_box(&LatticeSpec::new(family, n_max.max(1)))?;
    let dist: Vec<usize> = g
        .box_distances(g.origin())
        .into_iter()
        .map(|d| d.unwrap())
        .collect();
    let chains: Vec<Vec<u64>> = (0..settings.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = chain_rng(settings.seed, c);
            // counts[r] = number of clusters whose radius is exactly r
            let mut counts = vec![0u64; n_max + 1];
            let mut edge_stamp = vec![0u64; g.n_edges()];
            let mut vertex_stamp = vec![0u64; g.n_vertices()];
            let mut queue = Vec::new();
            for s in 1..=settings.samples {
                queue.clear();
                queue.push(g.origin());
                vertex_stamp[g.origin()] = s;
                let mut radius = 0;
                let mut head = 0;
                'explore: while head < queue.len() {
                    let x = queue[head];
                    head += 1;
                    for &(w, f) in g.neighbors(x) {
                        if edge_stamp[f] == s {
                            continue;
                        }
                        edge_stamp[f] = s;
                        if vertex_stamp[w] == s || rng.random::<f64>() >= p {
                            continue;
                        }
                        vertex_stamp[w] = s;
                        radius = radius.max(dist[w]);
                        if radius >= n_max {
                            break 'explore;
                        }
                        queue.push(w);
                    }
                }
                counts[radius.min(n_max)] += 1;
            }
            counts
        })
        .collect();
    Ok((0..=n_max)
        .map(|k| {
            let per_chain: Vec<(f64, u64)> = chains
                .iter()
                .map(|counts| (counts[k..].iter().sum::<u64>() as f64, settings.samples))
                .collect();
            Estimate::from_chains(&per_chain)
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// `h(n,k)`: left side to right side.
    Horizontal,
    /// `v(n,k)`: bottom side to top side.
    Vertical,
}

impl std::str::FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "horizontal" | "h" => Ok(Orientation::Horizontal),
            "vertical" | "v" => Ok(Orientation::Vertical),
            other => Err(Error::InvalidParameter(format!(
                "unknown orientation `{other}`"
            ))),
        }
    }
}

/// The two sides of `[0,width] × [0,height]` joined by a crossing.
pub fn crossing_sides(
    g: &FiniteGraph,
    orientation: Orientation,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let emb = g
        .embedding()
        .ok_or_else(|| Error::InvalidGraph("crossings need a rectangle with coordinates".into()))?;
    let axis = match orientation {
        Orientation::Horizontal => 0,
        Orientation::Vertical => 1,
    };
    let lo = emb.coords.iter().map(|c| c[axis]).min().unwrap();
    let hi = emb.coords.iter().map(|c| c[axis]).max().unwrap();
    let side = |v: i64| {
        (0..g.n_vertices())
            .filter(|&x| emb.coords[x][axis] == v)
            .collect()
    };
    Ok((side(lo), side(hi)))
}

pub fn crosses(g: &FiniteGraph, omega: &[bool], from: &[usize], to: &[bool]) -> bool {
    let mut seen = vec![false; g.n_vertices()];
    let mut queue: Vec<usize> = from.to_vec();
    for &s in from {
        if to[s] {
            return true;
        }
        seen[s] = true;
    }
    let mut head = 0;
    while head < queue.len() {
        let x = queue[head];
        head += 1;
        for &(w, f) in g.neighbors(x) {
            if omega[f] && !seen[w] {
                if to[w] {
                    return true;
                }
                seen[w] = true;
                queue.push(w);
            }
        }
    }
    false
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingEstimate {
    pub width: usize,
    pub height: usize,
    pub orientation: Orientation,
    pub q: f64,
    pub p: f64,
    pub boundary: BoundaryCondition,
    pub estimate: Estimate,
    pub settings: ChainSettings,
}

/// `h(n,k)` or `v(n,k)` on the rectangle `[0,width] × [0,height]`. For
/// `q = 1` the samples are independent product configurations.
pub fn estimate_crossing(
    width: usize,
    height: usize,
    orientation: Orientation,
    q: f64,
    p: f64,
    bc: BoundaryCondition,
    settings: &ChainSettings,
) -> Result<CrossingEstimate> {
    settings.validate()?;
    let g = Arc::new(rectangle(width, height, 1.0)?);
    let m = RandomCluster::with_p(g.clone(), q, p, bc)?;
    let (from, to) = crossing_sides(&g, orientation)?;
    let mut target = vec![false; g.n_vertices()];
    for &t in &to {
        target[t] = true;
    }
    let observe = |omega: &[bool]| crosses(&g, omega, &from, &target) as u8 as f64;
    let estimate = if q == 1.0 {
        let chains: Vec<(f64, u64)> = (0..settings.chains)
            .into_par_iter()
            .map(|c| {
                let mut rng = chain_rng(settings.seed, c);
                let mut omega = vec![false; g.n_edges()];
                let mut sum = 0.0;
                for _ in 0..settings.samples {
                    omega.iter_mut().for_each(|b| *b = rng.random::<f64>() < p);
                    sum += observe(&omega);
                }
                (sum, settings.samples)
            })
            .collect();
        Estimate::from_chains(&chains)
    } else {
        run_chains(&m, settings, observe)?
    };
    Ok(CrossingEstimate {
        width,
        height,
        orientation,
        q,
        p,
        boundary: bc,
        estimate,
        settings: *settings,
    })
}

/// Exact crossing probability by enumeration.
pub fn exact_crossing(
    width: usize,
    height: usize,
    orientation: Orientation,
    q: f64,
    p: f64,
    bc: BoundaryCondition,
) -> Result<f64> {
    let g = Arc::new(rectangle(width, height, 1.0)?);
    let m: Measure = RandomCluster::with_p(g.clone(), q, p, bc)?.into();
    let law = m.exact_law(enumeration_cap())?;
    let (from, to) = crossing_sides(&g, orientation)?;
    let mut target = vec![false; g.n_vertices()];
    for &t in &to {
        target[t] = true;
    }
    let n = g.n_edges();
    Ok(law.expectation(|mask| {
        let omega = Config::from_mask(mask, n);
        crosses(&g, &omega.bits, &from, &target) as u8 as f64
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityLawReport {
    pub q: f64,
    pub p: f64,
    pub p_star: f64,
    pub n_edges: usize,
    pub dual_vertices: usize,
    /// `max_ω |φ^w_{G,p}[ω] - φ^f_{G*,p*}[ω*]|`.
    pub max_deviation: f64,
    /// `(ω*)* = ω` for every configuration.
    pub involution: bool,
}

/// Compares the image of the wired measure under `ω ↦ ω*` with the free
/// measure on the dual at the dual parameter.
pub fn dual_sample_law_check(g: &Arc<FiniteGraph>, q: f64, p: f64) -> Result<DualityLawReport> {
    let map = wired_dual(g)?;
    let primal: Measure = RandomCluster::with_p(g.clone(), q, p, BoundaryCondition::Wired)?.into();
    let p_star = vec![dual_parameter(p, q); g.n_edges()];
    let dual: Measure = RandomCluster::with_edge_probs(
        Arc::new(map.dual.clone()),
        q,
        p_star.clone(),
        BoundaryCondition::Free,
    )?
    .into();
    let a = primal.exact_law(enumeration_cap())?;
    let b = dual.exact_law(enumeration_cap())?;
    let mut max_deviation: f64 = 0.0;
    let mut involution = true;
    for mask in 0..1u64 << g.n_edges() {
        let star = map.dual_bits(mask);
        max_deviation = max_deviation.max((a.prob(mask) - b.prob(star)).abs());
        let omega = Config::from_mask(mask, g.n_edges());
        involution &= map.primal_config(&map.dual_config(&omega.bits)) == omega.bits;
    }
    Ok(DualityLawReport {
        q,
        p,
        p_star: p_star[0],
        n_edges: g.n_edges(),
        dual_vertices: map.dual.n_vertices(),
        max_deviation,
        involution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::PartialConfig;

    fn cycle() -> Arc<FiniteGraph> {
        Arc::new(
            FiniteGraph::new(
                vec![0, 1, 2, 3],
                vec![[0, 1], [1, 2], [2, 3], [0, 3]],
                vec![1.0; 4],
                vec![0, 2],
                0,
            )
            .unwrap(),
        )
    }

    #[test]
    fn heat_bath_conditionals_match_enumeration() {
        for bc in [BoundaryCondition::Free, BoundaryCondition::Wired] {
            let rc = RandomCluster::with_p(cycle(), 2.0, 0.5, bc).unwrap();
            let m: Measure = rc.clone().into();
            let mut hb = HeatBath::new(&rc, vec![false; 4]).unwrap();
            for mask in 0..16u64 {
                let omega = Config::from_mask(mask, 4);
                hb.set_config(omega.bits.clone());
                for e in 0..4 {
                    let part = PartialConfig::from_pairs(
                        (0..4).filter(|&f| f != e).map(|f| (f, omega[f])),
                    )
                    .unwrap();
                    let exact = m.cond_one_edge(e, &part).unwrap();
                    assert!(
                        (hb.conditional(e) - exact).abs() < 1e-14,
                        "{bc:?} {mask:b} {e}"
                    );
                }
            }
        }
    }

    #[test]
    fn chains_are_reproducible() {
        let rc = RandomCluster::with_p(cycle(), 2.0, 0.5, BoundaryCondition::Free).unwrap();
        let s = ChainSettings {
            burnin: 10,
            thin: 1,
            samples: 200,
            chains: 3,
            seed: 42,
        };
        let a = run_chains(&rc, &s, |w| w[0] as u8 as f64).unwrap();
        let b = run_chains(&rc, &s, |w| w[0] as u8 as f64).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn theta_extremes_are_exact() {
        let s = ChainSettings::default();
        for p in [0.0, 1.0] {
            let t = estimate_theta(LatticeFamily::Square, 2, 2.0, p, BoxConvention::Doubled, &s)
                .unwrap();
            assert_eq!(t.estimate.mean, p);
        }
    }

    #[test]
    fn crossing_of_two_by_one_is_one_half() {
        let v = exact_crossing(
            1,
            2,
            Orientation::Vertical,
            1.0,
            0.5,
            BoundaryCondition::Free,
        )
        .unwrap();
        assert!((v - 0.5).abs() < 1e-14);
        let h = exact_crossing(
            2,
            1,
            Orientation::Horizontal,
            1.0,
            0.5,
            BoundaryCondition::Free,
        )
        .unwrap();
        assert!((h - 0.5).abs() < 1e-14);
    }

    #[test]
    fn duality_law_on_single_cell() {
        let g = Arc::new(rectangle(1, 1, 1.0).unwrap());
        for q in [1.0, 2.0] {
            let r = dual_sample_law_check(&g, q, 0.4).unwrap();
            assert!(r.max_deviation < 1e-12 && r.involution);
        }
    }
}
