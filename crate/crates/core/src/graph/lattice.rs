//! Lattice families and their boxes `Λ_n = {x : d(0,x) <= n}`.
//!
//! Coordinate conventions:
//! * square: `(x, y) ∈ Z²`, neighbours `(x±1, y)`, `(x, y±1)`.
//! * triangular: axial `(a, b)`, neighbours `(±1, 0)`, `(0, ±1)`, `(1, -1)`,
//!   `(-1, 1)`; planar position `(a + b/2, b·√3/2)`.
//! * hexagonal: brick wall `(x, y)`, neighbours `(x±1, y)` plus `(x, y+1)`
//!   when `x + y` is even and `(x, y-1)` when it is odd.
//!
//! Vertices are numbered row-major, i.e. sorted by `(y, x)`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{planar, FiniteGraph, LatticeEmbedding};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatticeFamily {
    Square,
    Triangular,
    Hexagonal,
}

impl std::str::FromStr for LatticeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(LatticeFamily::Square),
            "triangular" => Ok(LatticeFamily::Triangular),
            "hexagonal" | "honeycomb" => Ok(LatticeFamily::Hexagonal),
            other => Err(Error::InvalidParameter(format!(
                "unknown lattice family `{other}`"
            ))),
        }
    }
}

impl LatticeFamily {
    pub fn neighbors(self, [x, y]: [i64; 2]) -> Vec<[i64; 2]> {
        match self {
            LatticeFamily::Square => vec![[x + 1, y], [x - 1, y], [x, y + 1], [x, y - 1]],
            LatticeFamily::Triangular => vec![
                [x + 1, y],
                [x - 1, y],
                [x, y + 1],
                [x, y - 1],
                [x + 1, y - 1],
                [x - 1, y + 1],
            ],
            LatticeFamily::Hexagonal => {
                let vertical = if (x + y).rem_euclid(2) == 0 {
                    y + 1
                } else {
                    y - 1
                };
                vec![[x + 1, y], [x - 1, y], [x, vertical]]
            }
        }
    }

    pub fn position(self, [x, y]: [i64; 2]) -> [f64; 2] {
        match self {
            LatticeFamily::Square | LatticeFamily::Hexagonal => [x as f64, y as f64],
            LatticeFamily::Triangular => [x as f64 + 0.5 * y as f64, y as f64 * 3f64.sqrt() / 2.0],
        }
    }

    /// Graph distance on the infinite lattice.
    pub fn distance(self, a: [i64; 2], b: [i64; 2]) -> usize {
        let dx = b[0] - a[0];
        let dy = b[1] - a[1];
        match self {
            LatticeFamily::Square => (dx.abs() + dy.abs()) as usize,
            LatticeFamily::Triangular => ((dx.abs() + dy.abs() + (dx + dy).abs()) / 2) as usize,
            LatticeFamily::Hexagonal => hex_distance(a, b),
        }
    }

    /// Ball of radius `radius` around `center` on the infinite lattice, with
    /// distances, in BFS order.
    pub fn ball(self, center: [i64; 2], radius: usize) -> Vec<([i64; 2], usize)> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        seen.insert(center);
        queue.push_back((center, 0));
        while let Some((c, d)) = queue.pop_front() {
            out.push((c, d));
            if d == radius {
                continue;
            }
            for nb in self.neighbors(c) {
                if seen.insert(nb) {
                    queue.push_back((nb, d + 1));
                }
            }
        }
        out
    }
}

fn hex_distance(a: [i64; 2], b: [i64; 2]) -> usize {
    // Brick-wall distance: BFS on the infinite lattice restricted to a
    // bounding window that always contains a geodesic.
    if a == b {
        return 0;
    }
    let bound = ((b[0] - a[0]).abs() + 2 * (b[1] - a[1]).abs() + 2) as usize;
    let mut seen = HashMap::new();
    let mut queue = VecDeque::new();
    seen.insert(a, 0usize);
    queue.push_back(a);
    while let Some(c) = queue.pop_front() {
        let d = seen[&c];
        if d >= bound {
            continue;
        }
        for nb in LatticeFamily::Hexagonal.neighbors(c) {
            if let std::collections::hash_map::Entry::Vacant(slot) = seen.entry(nb) {
                if nb == b {
                    return d + 1;
                }
                slot.insert(d + 1);
                queue.push_back(nb);
            }
        }
    }
    unreachable!("brick-wall lattice is connected")
}

/// Where a box is cut from.
#[derive(Clone, Debug)]
pub enum BoxFamily {
    Lattice(LatticeFamily),
    /// Ball around the origin of a user-supplied graph (graph distance).
    User(Arc<FiniteGraph>),
}

#[derive(Clone, Debug)]
pub struct LatticeSpec {
    pub family: BoxFamily,
    pub radius: usize,
    pub coupling: f64,
}

impl LatticeSpec {
    pub fn new(family: LatticeFamily, radius: usize) -> Self {
        LatticeSpec {
            family: BoxFamily::Lattice(family),
            radius,
            coupling: 1.0,
        }
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }
}

/// Builds `Λ_n` with boundary `{x : d(0,x) = n}` and uniform couplings.
pub fn build_box(spec: &LatticeSpec) -> Result<FiniteGraph> {
    if spec.radius == 0 {
        return Err(Error::InvalidParameter(
            "box radius must be at least 1".into(),
        ));
    }
    if !(spec.coupling.is_finite() && spec.coupling > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "box coupling must be positive, got {}",
            spec.coupling
        )));
    }
    match &spec.family {
        BoxFamily::Lattice(family) => lattice_box(*family, spec.radius, spec.coupling),
        BoxFamily::User(g) => user_ball(g, spec.radius, spec.coupling),
    }
}

fn lattice_box(family: LatticeFamily, radius: usize, coupling: f64) -> Result<FiniteGraph> {
    let ball = family.ball([0, 0], radius);
    let coords: Vec<[i64; 2]> = ball.iter().map(|(c, _)| *c).collect();
    let dist: HashMap<[i64; 2], usize> = ball.into_iter().collect();
    let boundary = |c: &[i64; 2]| dist[c] == radius;
    assemble(family, coords, boundary, [0, 0], coupling)
}

/// The rectangle `[0,width] × [0,height]` of the square lattice. Its boundary
/// is the outer ring; the origin is the vertex closest to the centre.
pub fn rectangle(width: usize, height: usize, coupling: f64) -> Result<FiniteGraph> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter(
            "rectangle sides must be at least 1".into(),
        ));
    }
    let (w, h) = (width as i64, height as i64);
    let coords: Vec<[i64; 2]> = (0..=h).flat_map(|y| (0..=w).map(move |x| [x, y])).collect();
    let boundary = |&[x, y]: &[i64; 2]| x == 0 || y == 0 || x == w || y == h;
    assemble(
        LatticeFamily::Square,
        coords,
        boundary,
        [w / 2, h / 2],
        coupling,
    )
}

fn assemble(
    family: LatticeFamily,
    mut coords: Vec<[i64; 2]>,
    is_boundary: impl Fn(&[i64; 2]) -> bool,
    origin: [i64; 2],
    coupling: f64,
) -> Result<FiniteGraph> {
    coords.sort_by_key(|&[x, y]| (y, x));
    let index: HashMap<[i64; 2], usize> = coords.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut edges = Vec::new();
    for (i, &c) in coords.iter().enumerate() {
        for nb in family.neighbors(c) {
            if let Some(&j) = index.get(&nb) {
                if j > i {
                    edges.push([i, j]);
                }
            }
        }
    }
    edges.sort_unstable();
    let boundary: Vec<usize> = coords
        .iter()
        .enumerate()
        .filter(|(_, c)| is_boundary(c))
        .map(|(i, _)| i)
        .collect();
    let n_edges = edges.len();
    let g = FiniteGraph::new(
        (0..coords.len() as u64).collect(),
        edges,
        vec![coupling; n_edges],
        boundary,
        index[&origin],
    )?;
    let positions: Vec<[f64; 2]> = coords.iter().map(|&c| family.position(c)).collect();
    let faces = planar::trace_faces(&g, &positions);
    let g = g.with_faces(faces.bounded_edge_lists())?;
    Ok(g.with_embedding(LatticeEmbedding { family, coords }))
}

fn user_ball(g: &FiniteGraph, radius: usize, coupling: f64) -> Result<FiniteGraph> {
    let dist = g.bfs_distances(g.origin());
    let keep: Vec<usize> = (0..g.n_vertices())
        .filter(|&v| matches!(dist[v], Some(d) if d <= radius))
        .collect();
    let new_index: HashMap<usize, usize> = keep.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut edges = Vec::new();
    for &[u, v] in g.edges() {
        if let (Some(&a), Some(&b)) = (new_index.get(&u), new_index.get(&v)) {
            edges.push([a, b]);
        }
    }
    let boundary: Vec<usize> = keep
        .iter()
        .enumerate()
        .filter(|(_, &v)| dist[v] == Some(radius))
        .map(|(i, _)| i)
        .collect();
    if boundary.is_empty() {
        return Err(Error::InvalidGraph(format!(
            "no vertex at distance {radius} from the origin"
        )));
    }
    let n_edges = edges.len();
    FiniteGraph::new(
        keep.iter().map(|&v| g.label(v)).collect(),
        edges,
        vec![coupling; n_edges],
        boundary,
        new_index[&g.origin()],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxed(family: LatticeFamily, n: usize) -> FiniteGraph {
        build_box(&LatticeSpec::new(family, n)).unwrap()
    }

    #[test]
    fn square_box_sizes() {
        let g = boxed(LatticeFamily::Square, 1);
        assert_eq!((g.n_vertices(), g.n_edges()), (5, 4));
        assert_eq!(g.boundary().len(), 4);
        let g = boxed(LatticeFamily::Square, 2);
        assert_eq!((g.n_vertices(), g.n_edges()), (13, 16));
    }

    #[test]
    fn triangular_unit_ball() {
        let g = boxed(LatticeFamily::Triangular, 1);
        assert_eq!((g.n_vertices(), g.n_edges()), (7, 12));
    }

    #[test]
    fn hexagonal_balls_are_trees_up_to_radius_two() {
        let g = boxed(LatticeFamily::Hexagonal, 1);
        assert_eq!((g.n_vertices(), g.n_edges()), (4, 3));
        let g = boxed(LatticeFamily::Hexagonal, 2);
        assert_eq!((g.n_vertices(), g.n_edges()), (10, 9));
        assert_eq!(g.faces().unwrap().len(), 0);
    }

    #[test]
    fn radius_zero_is_rejected() {
        assert!(build_box(&LatticeSpec::new(LatticeFamily::Square, 0)).is_err());
    }

    #[test]
    fn square_corner_distance() {
        let g = boxed(LatticeFamily::Square, 2);
        let emb = g.embedding().unwrap();
        let find = |c: [i64; 2]| g.label(emb.coords.iter().position(|&x| x == c).unwrap());
        assert_eq!(
            g.graph_distance(find([0, 0]), find([2, 0])).unwrap(),
            Some(2)
        );
        assert_eq!(
            g.graph_distance(find([1, 1]), find([-1, -1])).unwrap(),
            Some(4)
        );
    }

    #[test]
    fn lattice_distance_matches_bfs() {
        for family in [
            LatticeFamily::Square,
            LatticeFamily::Triangular,
            LatticeFamily::Hexagonal,
        ] {
            for (c, d) in family.ball([0, 0], 6) {
                assert_eq!(family.distance([0, 0], c), d, "{family:?} {c:?}");
            }
            for (c, d) in family.ball([1, 0], 4) {
                assert_eq!(family.distance([1, 0], c), d, "{family:?} {c:?}");
            }
        }
    }

    #[test]
    fn boxes_have_boundary_and_are_within_radius() {
        for family in [
            LatticeFamily::Square,
            LatticeFamily::Triangular,
            LatticeFamily::Hexagonal,
        ] {
            for n in 1..=6 {
                let g = boxed(family, n);
                assert!(!g.boundary().is_empty());
                let dist = g.bfs_distances(g.origin());
                assert!(dist.iter().all(|d| d.unwrap() <= n));
                let lat = g.box_distances(g.origin());
                for &b in g.boundary() {
                    assert_eq!(lat[b], Some(n));
                }
            }
        }
    }

    #[test]
    fn edge_order_is_lexicographic_and_deterministic() {
        let a = boxed(LatticeFamily::Triangular, 3);
        let b = boxed(LatticeFamily::Triangular, 3);
        assert_eq!(a.edges(), b.edges());
        let emb = a.embedding().unwrap();
        let key = |e: usize| {
            let [u, v] = a.endpoints(e);
            let cu = emb.coords[u];
            let cv = emb.coords[v];
            let (lo, hi) = if (cu[1], cu[0]) <= (cv[1], cv[0]) {
                (cu, cv)
            } else {
                (cv, cu)
            };
            ((lo[1], lo[0]), (hi[1], hi[0]))
        };
        for e in 1..a.n_edges() {
            assert!(key(e - 1) < key(e));
        }
        let again = FiniteGraph::from_json(&a.to_json()).unwrap();
        assert_eq!(again.edges(), a.edges());
    }

    #[test]
    fn user_ball_uses_graph_distance() {
        let line = FiniteGraph::new(
            (0..5).collect(),
            vec![[0, 1], [1, 2], [2, 3], [3, 4]],
            vec![1.0; 4],
            vec![],
            0,
        )
        .unwrap();
        let spec = LatticeSpec {
            family: BoxFamily::User(Arc::new(line)),
            radius: 2,
            coupling: 0.5,
        };
        let g = build_box(&spec).unwrap();
        assert_eq!(g.n_vertices(), 3);
        assert_eq!(g.boundary(), &[2]);
        assert_eq!(g.couplings(), &[0.5, 0.5]);
    }

    #[test]
    fn rectangle_shape() {
        let r = rectangle(2, 2, 1.0).unwrap();
        assert_eq!((r.n_vertices(), r.n_edges()), (9, 12));
        assert_eq!(r.boundary().len(), 8);
        assert_eq!(r.faces().unwrap().len(), 4);
        let c = r.embedding().unwrap().coords[r.origin()];
        assert_eq!(c, [1, 1]);
    }
}
