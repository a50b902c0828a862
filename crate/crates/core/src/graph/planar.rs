//! Face tracing for straight-line embeddings and planar duals.
//!
//! Dual edge `e*` always carries the same id as the primal edge `e` it
//! crosses, and `ω*_e = 1 - ω_e`.

use super::FiniteGraph;
use crate::{Error, Result};

/// A dart is an oriented edge; `2e` runs `edges[e][0] -> edges[e][1]`,
/// `2e + 1` the other way.
type Dart = usize;

fn tail(g: &FiniteGraph, d: Dart) -> usize {
    let [u, v] = g.endpoints(d / 2);
    if d.is_multiple_of(2) {
        u
    } else {
        v
    }
}

fn head(g: &FiniteGraph, d: Dart) -> usize {
    tail(g, d ^ 1)
}

/// Faces of a connected straight-line embedding, as closed dart walks.
pub(crate) struct TracedFaces {
    pub walks: Vec<Vec<Dart>>,
    pub outer: usize,
}

impl TracedFaces {
    pub fn bounded_edge_lists(&self) -> Vec<Vec<usize>> {
        self.walks
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != self.outer)
            .map(|(_, w)| w.iter().map(|d| d / 2).collect())
            .collect()
    }
}

pub(crate) fn trace_faces(g: &FiniteGraph, positions: &[[f64; 2]]) -> TracedFaces {
    let n_darts = 2 * g.n_edges();
    // Rotation system: outgoing darts at each vertex in counter-clockwise order.
    let mut rot: Vec<Vec<Dart>> = vec![Vec::new(); g.n_vertices()];
    for d in 0..n_darts {
        rot[tail(g, d)].push(d);
    }
    let angle = |d: Dart| {
        let [x0, y0] = positions[tail(g, d)];
        let [x1, y1] = positions[head(g, d)];
        (y1 - y0).atan2(x1 - x0)
    };
    let mut slot = vec![0usize; n_darts];
    for darts in rot.iter_mut() {
        darts.sort_by(|&a, &b| angle(a).total_cmp(&angle(b)));
        for (i, &d) in darts.iter().enumerate() {
            slot[d] = i;
        }
    }
    let next = |d: Dart| {
        let v = head(g, d);
        let deg = rot[v].len();
        rot[v][(slot[d ^ 1] + deg - 1) % deg]
    };

    let mut walks = Vec::new();
    let mut done = vec![false; n_darts];
    for start in 0..n_darts {
        if done[start] {
            continue;
        }
        let mut walk = Vec::new();
        let mut d = start;
        while !done[d] {
            done[d] = true;
            walk.push(d);
            d = next(d);
        }
        walks.push(walk);
    }
    let area = |walk: &Vec<Dart>| {
        walk.iter()
            .map(|&d| {
                let [x0, y0] = positions[tail(g, d)];
                let [x1, y1] = positions[head(g, d)];
                x0 * y1 - x1 * y0
            })
            .sum::<f64>()
    };
    let outer = (0..walks.len())
        .min_by(|&a, &b| area(&walks[a]).total_cmp(&area(&walks[b])))
        .unwrap_or(0);
    if walks.is_empty() {
        walks.push(Vec::new());
    }
    TracedFaces { walks, outer }
}

/// A primal graph together with its dual and the edge bijection.
#[derive(Clone, Debug)]
pub struct PlanarDualMap {
    pub primal: FiniteGraph,
    pub dual: FiniteGraph,
    /// `to_dual[e]` is the dual edge crossing primal edge `e`.
    pub to_dual: Vec<usize>,
    /// Inverse of `to_dual`.
    pub to_primal: Vec<usize>,
}

impl PlanarDualMap {
    /// Dual configuration of a primal configuration given as a bit mask.
    pub fn dual_bits(&self, mask: u64) -> u64 {
        let n = self.primal.n_edges();
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut out = 0u64;
        for e in 0..n {
            if (!mask & full) >> e & 1 == 1 {
                out |= 1 << self.to_dual[e];
            }
        }
        out
    }

    /// Dual configuration of a primal configuration.
    pub fn dual_config(&self, omega: &[bool]) -> Vec<bool> {
        let mut out = vec![false; omega.len()];
        for (e, &open) in omega.iter().enumerate() {
            out[self.to_dual[e]] = !open;
        }
        out
    }

    /// Primal configuration of a dual configuration.
    pub fn primal_config(&self, omega_star: &[bool]) -> Vec<bool> {
        let mut out = vec![false; omega_star.len()];
        for (e, &open) in omega_star.iter().enumerate() {
            out[self.to_primal[e]] = !open;
        }
        out
    }
}

/// Builds the dual from the face data of `g`: one vertex per bounded face
/// plus one outer vertex (the last). The dual carries the vertex stars of
/// `g` as faces, with the star of the last vertex playing the outer face, so
/// that dualising twice is possible.
pub fn dual_graph(g: &FiniteGraph) -> Result<PlanarDualMap> {
    let faces = g
        .faces()
        .ok_or_else(|| Error::NoDual("graph carries no face data".into()))?;
    if g.n_vertices() < 2 {
        return Err(Error::NoDual("graph has a single vertex".into()));
    }
    let outer = faces.len();
    let mut sides: Vec<Vec<usize>> = vec![Vec::new(); g.n_edges()];
    for (f, face) in faces.iter().enumerate() {
        for &e in face {
            sides[e].push(f);
        }
    }
    let mut edges = Vec::with_capacity(g.n_edges());
    for (e, s) in sides.iter().enumerate() {
        let (a, b) = match s.as_slice() {
            [a, b] => (*a, *b),
            [a] => (*a, outer),
            _ => (outer, outer),
        };
        if a == b {
            return Err(Error::NoDual(format!(
                "edge {e} is a bridge; its dual would be a loop"
            )));
        }
        edges.push([a.min(b), a.max(b)]);
    }
    let stars: Vec<Vec<usize>> = (0..g.n_vertices() - 1)
        .map(|v| g.neighbors(v).iter().map(|&(_, e)| e).collect())
        .collect();
    let dual = FiniteGraph::new(
        (0..=outer as u64).collect(),
        edges,
        g.couplings().to_vec(),
        Vec::new(),
        outer,
    )?
    .with_faces(stars)?;
    let id: Vec<usize> = (0..g.n_edges()).collect();
    Ok(PlanarDualMap {
        primal: g.clone(),
        dual,
        to_dual: id.clone(),
        to_primal: id,
    })
}

/// Dual of the wired graph, i.e. of `g` with its boundary identified to a
/// single vertex through the outer face. Its vertices are the bounded faces
/// of `g` followed by the pieces of the outer face cut at each visit of the
/// outer walk to a boundary vertex. Requires a lattice embedding and all
/// boundary vertices on the outer face.
pub fn wired_dual(g: &FiniteGraph) -> Result<PlanarDualMap> {
    let emb = g
        .embedding()
        .ok_or_else(|| Error::NoDual("wired dual needs a planar embedding".into()))?;
    if !g.is_connected() {
        return Err(Error::NoDual("graph is disconnected".into()));
    }
    if g.boundary().len() <= 1 {
        return dual_graph(g);
    }
    let positions: Vec<[f64; 2]> = emb.coords.iter().map(|&c| emb.family.position(c)).collect();
    let traced = trace_faces(g, &positions);
    let outer_walk = &traced.walks[traced.outer];
    let mut on_outer = vec![false; g.n_vertices()];
    for &d in outer_walk {
        on_outer[tail(g, d)] = true;
    }
    if let Some(&b) = g.boundary().iter().find(|&&b| !on_outer[b]) {
        return Err(Error::NoDual(format!(
            "boundary vertex {} is not on the outer face",
            g.label(b)
        )));
    }

    // Rotate the outer walk so it starts at a boundary vertex, then cut.
    let start = outer_walk
        .iter()
        .position(|&d| g.is_boundary(tail(g, d)))
        .expect("boundary vertex on outer walk");
    let mut segments: Vec<Vec<usize>> = Vec::new();
    for i in 0..outer_walk.len() {
        let d = outer_walk[(start + i) % outer_walk.len()];
        if g.is_boundary(tail(g, d)) {
            segments.push(Vec::new());
        }
        segments.last_mut().unwrap().push(d / 2);
    }

    let bounded: Vec<Vec<usize>> = traced.bounded_edge_lists();
    let mut sides: Vec<Vec<usize>> = vec![Vec::new(); g.n_edges()];
    for (f, face) in bounded.iter().chain(segments.iter()).enumerate() {
        for &e in face {
            sides[e].push(f);
        }
    }
    let n_dual = bounded.len() + segments.len();
    let mut edges = Vec::with_capacity(g.n_edges());
    for (e, s) in sides.iter().enumerate() {
        match s.as_slice() {
            [a, b] if a != b => edges.push([*a.min(b), *a.max(b)]),
            _ => {
                return Err(Error::NoDual(format!(
                    "edge {e} does not separate two faces of the wired graph"
                )))
            }
        }
    }
    let wired_vertices = g.n_vertices() - g.boundary().len() + 1;
    let euler = wired_vertices as i64 - g.n_edges() as i64 + n_dual as i64;
    if euler != 2 {
        return Err(Error::NoDual(format!(
            "wired face structure violates Euler's formula (V - E + F = {euler})"
        )));
    }
    let dual = FiniteGraph::new(
        (0..n_dual as u64).collect(),
        edges,
        g.couplings().to_vec(),
        Vec::new(),
        0,
    )?;
    let id: Vec<usize> = (0..g.n_edges()).collect();
    Ok(PlanarDualMap {
        primal: g.clone(),
        dual,
        to_dual: id.clone(),
        to_primal: id,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{build_box, rectangle, LatticeFamily, LatticeSpec};
    use super::*;

    #[test]
    fn single_cell_dual_is_four_parallel_edges() {
        let cell = rectangle(1, 1, 1.0).unwrap();
        let map = dual_graph(&cell).unwrap();
        assert_eq!(map.dual.n_vertices(), 2);
        assert_eq!(map.dual.n_edges(), 4);
        assert!(map.dual.edges().iter().all(|&e| e == [0, 1]));
    }

    #[test]
    fn dual_of_dual_of_cell_is_a_four_cycle() {
        let cell = rectangle(1, 1, 1.0).unwrap();
        let dd = dual_graph(&dual_graph(&cell).unwrap().dual).unwrap().dual;
        assert_eq!((dd.n_vertices(), dd.n_edges()), (4, 4));
        let mut deg = [0; 4];
        for &[u, v] in dd.edges() {
            deg[u] += 1;
            deg[v] += 1;
        }
        assert!(deg.iter().all(|&d| d == 2));
        assert!(dd.is_connected());
    }

    #[test]
    fn dual_of_dual_preserves_incidences_on_rectangles() {
        // Faces of the double dual are the stars of the dual, which index the
        // bounded faces of the primal, so degrees match up to relabelling.
        for (w, h) in [(1, 2), (2, 2), (3, 2)] {
            let r = rectangle(w, h, 1.0).unwrap();
            let dd = dual_graph(&dual_graph(&r).unwrap().dual).unwrap().dual;
            assert_eq!(dd.n_vertices(), r.n_vertices());
            let degrees = |g: &FiniteGraph| {
                let mut d: Vec<usize> = (0..g.n_vertices()).map(|v| g.neighbors(v).len()).collect();
                d.sort();
                d
            };
            assert_eq!(degrees(&dd), degrees(&r));
        }
    }

    #[test]
    fn bridges_are_refused() {
        let g = build_box(&LatticeSpec::new(LatticeFamily::Square, 1)).unwrap();
        assert!(matches!(dual_graph(&g), Err(Error::NoDual(_))));
    }

    #[test]
    fn user_graph_without_faces_has_no_dual() {
        let g = FiniteGraph::new(
            vec![1, 2, 3],
            vec![[0, 1], [1, 2], [0, 2]],
            vec![1.0; 3],
            vec![],
            0,
        )
        .unwrap();
        assert!(matches!(dual_graph(&g), Err(Error::NoDual(_))));
        let g = g.with_faces(vec![vec![0, 1, 2]]).unwrap();
        assert_eq!(dual_graph(&g).unwrap().dual.n_vertices(), 2);
    }

    #[test]
    fn wired_single_cell_dual_is_a_star() {
        let cell = rectangle(1, 1, 1.0).unwrap();
        let map = wired_dual(&cell).unwrap();
        assert_eq!(map.dual.n_vertices(), 5);
        assert_eq!(map.dual.n_edges(), 4);
        assert!(map.dual.edges().iter().all(|e| e[0] == 0));
    }

    #[test]
    fn wired_two_by_two_dual() {
        let r = rectangle(2, 2, 1.0).unwrap();
        let map = wired_dual(&r).unwrap();
        assert_eq!(map.dual.n_vertices(), 12);
        assert_eq!(map.dual.n_edges(), 12);
        // Each inner face meets 2 inner edges and 2 boundary edges.
        for f in 0..4 {
            assert_eq!(map.dual.neighbors(f).len(), 4);
        }
        for f in 4..12 {
            assert_eq!(map.dual.neighbors(f).len(), 1);
        }
    }

    #[test]
    fn wired_dual_of_lattice_boxes_passes_euler() {
        for family in [
            LatticeFamily::Square,
            LatticeFamily::Triangular,
            LatticeFamily::Hexagonal,
        ] {
            for n in 1..=4 {
                let g = build_box(&LatticeSpec::new(family, n)).unwrap();
                let map = wired_dual(&g).unwrap();
                assert_eq!(map.dual.n_edges(), g.n_edges());
            }
        }
    }

    #[test]
    fn edge_bijection_round_trips() {
        let r = rectangle(3, 2, 1.0).unwrap();
        let map = dual_graph(&r).unwrap();
        for e in 0..r.n_edges() {
            assert_eq!(map.to_primal[map.to_dual[e]], e);
        }
        let omega: Vec<bool> = (0..r.n_edges()).map(|e| e % 3 == 0).collect();
        assert_eq!(map.primal_config(&map.dual_config(&omega)), omega);
        let mask = 0b1011_0110u64;
        let star = map.dual_bits(mask);
        assert_eq!(star | mask, (1 << r.n_edges()) - 1);
        assert_eq!(star & mask, 0);
    }
}
