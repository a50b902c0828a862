use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{enumeration_cap, load_clusters, BoundaryCondition, Measure, RandomCluster};
use crate::graph::FiniteGraph;
use crate::unionfind::UnionFind;
use crate::{Error, Result};

/// Largest number of spin configurations enumerated.
pub const POTTS_CAP: u64 = 2_000_000;

/// The `q`-state Potts measure on `G` with boundary spin `ν`:
/// `P[σ] ∝ exp(β Σ_{xy∈E} J_xy δ(σ_x,σ_y) + β Σ_x h_x δ(σ_x,ν))`, where `h_x`
/// is the total coupling from `x` to the frozen outside.
#[derive(Clone, Debug)]
pub struct PottsMeasure {
    graph: Arc<FiniteGraph>,
    q: u32,
    beta: f64,
    nu: u32,
    field: Vec<f64>,
}

impl PottsMeasure {
    pub fn new(
        graph: Arc<FiniteGraph>,
        q: u32,
        beta: f64,
        nu: u32,
        field: Vec<f64>,
    ) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidParameter(format!(
                "Potts needs q ≥ 2, got {q}"
            )));
        }
        if !(1..=q).contains(&nu) {
            return Err(Error::InvalidParameter(format!(
                "boundary spin {nu} outside 1..={q}"
            )));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "β must be finite and ≥ 0, got {beta}"
            )));
        }
        if field.len() != graph.n_vertices() || field.iter().any(|h| !(h.is_finite() && *h >= 0.0))
        {
            return Err(Error::InvalidParameter(
                "one nonnegative field value per vertex".into(),
            ));
        }
        Ok(PottsMeasure {
            graph,
            q,
            beta,
            nu,
            field,
        })
    }

    /// Potts measure on `outer` minus its boundary, with the boundary spins
    /// frozen to `ν`.
    pub fn inside(outer: &FiniteGraph, q: u32, beta: f64, nu: u32) -> Result<Self> {
        let inner: Vec<usize> = (0..outer.n_vertices())
            .filter(|&v| !outer.is_boundary(v))
            .collect();
        if outer.is_boundary(outer.origin()) {
            return Err(Error::InvalidGraph("origin lies on the boundary".into()));
        }
        let mut index = vec![usize::MAX; outer.n_vertices()];
        for (i, &v) in inner.iter().enumerate() {
            index[v] = i;
        }
        let mut field = vec![0.0; inner.len()];
        let mut edges = Vec::new();
        let mut couplings = Vec::new();
        for (e, &[u, v]) in outer.edges().iter().enumerate() {
            let j = outer.coupling(e);
            match (outer.is_boundary(u), outer.is_boundary(v)) {
                (false, false) => {
                    edges.push([index[u], index[v]]);
                    couplings.push(j);
                }
                (false, true) => field[index[u]] += j,
                (true, false) => field[index[v]] += j,
                (true, true) => {}
            }
        }
        let graph = FiniteGraph::new(
            inner.iter().map(|&v| outer.label(v)).collect(),
            edges,
            couplings,
            Vec::new(),
            index[outer.origin()],
        )?;
        Self::new(Arc::new(graph), q, beta, nu, field)
    }

    pub fn graph(&self) -> &FiniteGraph {
        &self.graph
    }

    fn n_states(&self) -> Result<u64> {
        let n = self.graph.n_vertices() as u32;
        match (self.q as u64).checked_pow(n) {
            Some(s) if s <= POTTS_CAP => Ok(s),
            _ => Err(Error::ExactUnavailable {
                size: n as usize,
                cap: (POTTS_CAP as f64).log(self.q as f64).floor() as usize,
            }),
        }
    }

    fn decode(&self, mut idx: u64, spins: &mut [u32]) {
        for s in spins.iter_mut() {
            *s = (idx % self.q as u64) as u32 + 1;
            idx /= self.q as u64;
        }
    }

    /// `-βH^ν(σ)`.
    pub fn log_weight(&self, spins: &[u32]) -> f64 {
        let bulk: f64 = self
            .graph
            .edges()
            .iter()
            .zip(self.graph.couplings())
            .filter(|(&[u, v], _)| spins[u] == spins[v])
            .map(|(_, j)| j)
            .sum();
        let boundary: f64 = spins
            .iter()
            .zip(&self.field)
            .filter(|(&s, _)| s == self.nu)
            .map(|(_, h)| h)
            .sum();
        self.beta * (bulk + boundary)
    }

    /// Exact probability of a spin configuration (spins in `1..=q`).
    pub fn prob(&self, spins: &[u32]) -> Result<f64> {
        if spins.len() != self.graph.n_vertices() || spins.iter().any(|s| !(1..=self.q).contains(s))
        {
            return Err(Error::InvalidParameter(
                "spin configuration does not match".into(),
            ));
        }
        let (logz, _) = self.log_partition_and_origin()?;
        Ok((self.log_weight(spins) - logz).exp())
    }

    /// `P[σ_origin = ν]`.
    pub fn origin_agrees(&self) -> Result<f64> {
        Ok(self.log_partition_and_origin()?.1)
    }

    fn log_partition_and_origin(&self) -> Result<(f64, f64)> {
        let states = self.n_states()?;
        let mut spins = vec![0u32; self.graph.n_vertices()];
        let logw: Vec<f64> = (0..states)
            .map(|i| {
                self.decode(i, &mut spins);
                self.log_weight(&spins)
            })
            .collect();
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        let mut agree = 0.0;
        for (i, &l) in logw.iter().enumerate() {
            let w = (l - max).exp();
            z += w;
            self.decode(i as u64, &mut spins);
            if spins[self.graph.origin()] == self.nu {
                agree += w;
            }
        }
        Ok((max + z.ln(), agree / z))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PottsIdentityReport {
    pub q: u32,
    pub beta: f64,
    /// `P^ν[σ_0 = ν] - 1/q` for the Potts model inside the outer graph.
    pub potts_side: f64,
    /// `((q-1)/q) φ^w[0 ↔ ∂]` on the outer graph.
    pub rc_side: f64,
    pub difference: f64,
}

/// Compares `P^ν_{inner}[σ_0=ν] - 1/q` with `((q-1)/q) φ^w_{outer}[0↔∂]`, where
/// the Potts model lives on `outer` minus its boundary.
pub fn potts_rc_identity_check(
    outer: &FiniteGraph,
    q: u32,
    beta: f64,
) -> Result<PottsIdentityReport> {
    let potts = PottsMeasure::inside(outer, q, beta, 1)?;
    let potts_side = potts.origin_agrees()? - 1.0 / q as f64;

    let g = Arc::new(outer.clone());
    let rc: Measure =
        RandomCluster::new(g.clone(), q as f64, beta, BoundaryCondition::Wired)?.into();
    let law = rc.exact_law(enumeration_cap())?;
    let mut uf = UnionFind::new(g.n_vertices());
    let anchor = g.boundary()[0];
    let connect = law.expectation(|mask| {
        load_clusters(
            &g,
            |e| mask >> e & 1 == 1,
            BoundaryCondition::Wired,
            &mut uf,
        );
        uf.same(g.origin(), anchor) as u8 as f64
    });
    let rc_side = (q as f64 - 1.0) / q as f64 * connect;
    Ok(PottsIdentityReport {
        q,
        beta,
        potts_side,
        rc_side,
        difference: (potts_side - rc_side).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_box, LatticeFamily, LatticeSpec};

    fn two_vertices() -> FiniteGraph {
        FiniteGraph::new(vec![0, 1], vec![[0, 1]], vec![1.0], vec![1], 0).unwrap()
    }

    #[test]
    fn zero_temperature_limit_is_uniform() {
        let g = build_box(&LatticeSpec::new(LatticeFamily::Square, 2)).unwrap();
        let m = PottsMeasure::inside(&g, 3, 0.0, 2).unwrap();
        let n = m.graph().n_vertices();
        let p = m.prob(&vec![1; n]).unwrap();
        assert!((p - 3f64.powi(-(n as i32))).abs() < 1e-15);
        let r = potts_rc_identity_check(&g, 3, 0.0).unwrap();
        assert!(r.potts_side.abs() < 1e-15 && r.rc_side.abs() < 1e-15);
    }

    #[test]
    fn single_spin_next_to_boundary() {
        let m = PottsMeasure::inside(&two_vertices(), 2, 0.8, 1).unwrap();
        let e = 0.8f64.exp();
        assert!((m.origin_agrees().unwrap() - e / (e + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn ising_case_matches_brute_force() {
        // Path a - b with a frozen boundary neighbour on each side, q = 2.
        let outer = FiniteGraph::new(
            vec![0, 1, 2, 3],
            vec![[0, 1], [1, 2], [2, 3]],
            vec![1.0, 0.5, 2.0],
            vec![0, 3],
            1,
        )
        .unwrap();
        let beta = 0.9;
        let m = PottsMeasure::inside(&outer, 2, beta, 1).unwrap();
        // Hand-enumerated weights of (σ_a, σ_b) with spin 1 = boundary spin.
        let w = |a: u32, b: u32| {
            let mut h = 0.0;
            if a == 1 {
                h += 1.0;
            }
            if a == b {
                h += 0.5;
            }
            if b == 1 {
                h += 2.0;
            }
            (beta * h).exp()
        };
        let z: f64 = [(1, 1), (1, 2), (2, 1), (2, 2)]
            .iter()
            .map(|&(a, b)| w(a, b))
            .sum();
        assert!((m.prob(&[1, 2]).unwrap() - w(1, 2) / z).abs() < 1e-14);
        assert!((m.origin_agrees().unwrap() - (w(1, 1) + w(1, 2)) / z).abs() < 1e-14);
    }

    #[test]
    fn coupling_identity_on_small_instances() {
        let square1 = build_box(&LatticeSpec::new(LatticeFamily::Square, 1)).unwrap();
        let square2 = build_box(&LatticeSpec::new(LatticeFamily::Square, 2)).unwrap();
        let star = FiniteGraph::new(
            vec![0, 1, 2, 3],
            vec![[0, 1], [0, 2], [0, 3]],
            vec![1.0, 0.7, 1.3],
            vec![1, 2, 3],
            0,
        )
        .unwrap();
        for (g, q, beta) in [
            (&square1, 2, 0.5),
            (&square2, 2, 0.5),
            (&square2, 3, 0.9),
            (&star, 3, 0.6),
            (&two_vertices(), 4, 1.2),
        ] {
            let r = potts_rc_identity_check(g, q, beta).unwrap();
            assert!(r.difference < 1e-10, "{r:?}");
            assert!(r.rc_side > 0.0);
        }
    }
}
