use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::graph::FiniteGraph;
use crate::unionfind::UnionFind;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryCondition {
    Free,
    Wired,
}

impl std::str::FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "free" => Ok(BoundaryCondition::Free),
            "wired" => Ok(BoundaryCondition::Wired),
            other => Err(Error::InvalidParameter(format!(
                "unknown boundary condition `{other}`"
            ))),
        }
    }
}

/// Loads the open edges of `mask` into `uf`, resizing it to the graph if
/// needed; in wired mode the boundary is first merged into one class.
pub(crate) fn load_clusters(
    g: &FiniteGraph,
    mask: impl Fn(usize) -> bool,
    bc: BoundaryCondition,
    uf: &mut UnionFind,
) {
    if uf.len() == g.n_vertices() {
        uf.reset();
    } else {
        *uf = UnionFind::new(g.n_vertices());
    }
    if bc == BoundaryCondition::Wired {
        if let Some((&first, rest)) = g.boundary().split_first() {
            for &b in rest {
                uf.union(first, b);
            }
        }
    }
    for (e, &[u, v]) in g.edges().iter().enumerate() {
        if mask(e) {
            uf.union(u, v);
        }
    }
}

/// Number of clusters of `omega`; wired mode counts the boundary as one vertex.
pub fn cluster_count(g: &FiniteGraph, omega: &[bool], bc: BoundaryCondition) -> usize {
    let mut uf = UnionFind::new(g.n_vertices());
    load_clusters(g, |e| omega[e], bc, &mut uf);
    uf.components()
}

/// The random-cluster measure `φ^{bc}_{G,β,q}` with `p_e = 1 - e^{-βJ_e}`.
#[derive(Clone, Debug)]
pub struct RandomCluster {
    graph: Arc<FiniteGraph>,
    q: f64,
    beta: Option<f64>,
    p: Vec<f64>,
    bc: BoundaryCondition,
}

impl RandomCluster {
    pub fn new(graph: Arc<FiniteGraph>, q: f64, beta: f64, bc: BoundaryCondition) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "β must be finite and ≥ 0, got {beta}"
            )));
        }
        let p = graph
            .couplings()
            .iter()
            .map(|&j| -(-beta * j).exp_m1())
            .collect();
        let mut m = Self::with_edge_probs(graph, q, p, bc)?;
        m.beta = Some(beta);
        Ok(m)
    }

    /// Same edge parameter on every edge, with `β` recovered from the
    /// coupling when the couplings are uniform.
    pub fn with_p(graph: Arc<FiniteGraph>, q: f64, p: f64, bc: BoundaryCondition) -> Result<Self> {
        let n = graph.n_edges();
        let beta = graph
            .uniform_coupling()
            .filter(|_| p < 1.0)
            .map(|j| -(-p).ln_1p() / j);
        let mut m = Self::with_edge_probs(graph, q, vec![p; n], bc)?;
        m.beta = beta;
        Ok(m)
    }

    pub fn with_edge_probs(
        graph: Arc<FiniteGraph>,
        q: f64,
        p: Vec<f64>,
        bc: BoundaryCondition,
    ) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "q must be positive, got {q}"
            )));
        }
        if p.len() != graph.n_edges() {
            return Err(Error::InvalidParameter(
                "one edge parameter per edge required".into(),
            ));
        }
        if let Some(x) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidParameter(format!(
                "edge parameter {x} outside [0,1]"
            )));
        }
        if bc == BoundaryCondition::Wired && graph.boundary().is_empty() {
            return Err(Error::InvalidParameter(
                "wired boundary condition needs a nonempty boundary".into(),
            ));
        }
        Ok(RandomCluster {
            graph,
            q,
            beta: None,
            p,
            bc,
        })
    }

    pub fn graph(&self) -> &FiniteGraph {
        &self.graph
    }

    pub fn graph_arc(&self) -> &Arc<FiniteGraph> {
        &self.graph
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn p(&self, e: usize) -> f64 {
        self.p[e]
    }

    pub fn edge_probs(&self) -> &[f64] {
        &self.p
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        self.bc
    }

    /// Log of the unnormalised weight `q^{k(ω)} Π p^ω (1-p)^{1-ω}`, which is
    /// proportional to `q^k Π (e^{βJ}-1)^ω`. `-inf` for impossible states.
    pub fn log_weight(&self, omega: impl Fn(usize) -> bool, uf: &mut UnionFind) -> f64 {
        load_clusters(&self.graph, &omega, self.bc, uf);
        let mut w = uf.components() as f64 * self.q.ln();
        for (e, &p) in self.p.iter().enumerate() {
            let factor = if omega(e) { p } else { 1.0 - p };
            if factor == 0.0 {
                return f64::NEG_INFINITY;
            }
            w += factor.ln();
        }
        w
    }

    /// Whether the endpoints of `e` are connected by open edges other than `e`
    /// (through the boundary in wired mode).
    pub fn connected_off(&self, e: usize, omega: &[bool], uf: &mut UnionFind) -> bool {
        load_clusters(&self.graph, |f| f != e && omega[f], self.bc, uf);
        let [u, v] = self.graph.endpoints(e);
        uf.same(u, v)
    }

    /// Conditional probability that `e` is open given all other edges:
    /// `p_e` if its endpoints are connected off `e`, else `p_e/(p_e + q(1-p_e))`.
    pub fn single_bond_conditional(&self, e: usize, connected_off: bool) -> f64 {
        let p = self.p[e];
        if connected_off {
            p
        } else {
            p / (p + self.q * (1.0 - p))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_box, LatticeFamily, LatticeSpec};

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
    fn cluster_counts() {
        let g = cycle();
        assert_eq!(cluster_count(&g, &[false; 4], BoundaryCondition::Free), 4);
        assert_eq!(cluster_count(&g, &[true; 4], BoundaryCondition::Free), 1);
        let b = build_box(&LatticeSpec::new(LatticeFamily::Square, 1)).unwrap();
        assert_eq!(cluster_count(&b, &[false; 4], BoundaryCondition::Wired), 2);
    }

    #[test]
    fn wired_needs_boundary() {
        let g = FiniteGraph::new(vec![0, 1], vec![[0, 1]], vec![1.0], vec![], 0).unwrap();
        let r = RandomCluster::with_p(Arc::new(g), 2.0, 0.5, BoundaryCondition::Wired);
        assert!(r.is_err());
    }

    #[test]
    fn beta_and_p_parametrisations_agree() {
        let beta = 0.7;
        let a = RandomCluster::new(cycle(), 2.0, beta, BoundaryCondition::Free).unwrap();
        let p = 1.0 - (-beta).exp();
        let b = RandomCluster::with_p(cycle(), 2.0, p, BoundaryCondition::Free).unwrap();
        assert!((a.p(0) - p).abs() < 1e-15);
        assert!((b.beta().unwrap() - beta).abs() < 1e-12);
    }
}
