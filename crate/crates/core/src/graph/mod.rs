//! Finite graphs with couplings, a boundary set and an origin.
//!
//! Vertices are addressed internally by dense indices `0..n`; the external
//! ids used in graph files are kept as labels so that files round-trip
//! unchanged. Edge ids are the positions in the edge list and also define the
//! global edge ordering used for tie-breaking by decision trees.

mod lattice;
mod planar;

pub use lattice::{build_box, rectangle, BoxFamily, LatticeFamily, LatticeSpec};
pub use planar::{dual_graph, wired_dual, PlanarDualMap};

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lattice coordinates attached to graphs generated from a lattice family.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeEmbedding {
    pub family: LatticeFamily,
    pub coords: Vec<[i64; 2]>,
}

#[derive(Clone, Debug)]
pub struct FiniteGraph {
    labels: Vec<u64>,
    edges: Vec<[usize; 2]>,
    couplings: Vec<f64>,
    boundary: Vec<usize>,
    origin: usize,
    faces: Option<Vec<Vec<usize>>>,
    embedding: Option<LatticeEmbedding>,
    adjacency: Vec<Vec<(usize, usize)>>,
    on_boundary: Vec<bool>,
}

/// On-disk graph schema. Vertex ids in `edges`, `boundary` and `origin`
/// refer to entries of `vertices`; face entries are edge ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub vertices: Vec<u64>,
    pub edges: Vec<(u64, u64, f64)>,
    pub boundary: Vec<u64>,
    pub origin: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub faces: Option<Vec<Vec<usize>>>,
}

impl FiniteGraph {
    /// Builds a graph from dense vertex indices. `labels[i]` is the external
    /// id of vertex `i`.
    pub fn new(
        labels: Vec<u64>,
        edges: Vec<[usize; 2]>,
        couplings: Vec<f64>,
        boundary: Vec<usize>,
        origin: usize,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        let mut seen = HashMap::with_capacity(n);
        for (i, &l) in labels.iter().enumerate() {
            if seen.insert(l, i).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate vertex id {l}")));
            }
        }
        if edges.len() != couplings.len() {
            return Err(Error::InvalidGraph(
                "edge and coupling counts differ".into(),
            ));
        }
        let mut adjacency = vec![Vec::new(); n];
        for (e, &[u, v]) in edges.iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {e} has an unknown endpoint"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("edge {e} is a self-loop")));
            }
            adjacency[u].push((v, e));
            adjacency[v].push((u, e));
        }
        for (e, &j) in couplings.iter().enumerate() {
            if !j.is_finite() || j < 0.0 {
                return Err(Error::InvalidGraph(format!("coupling of edge {e} is {j}")));
            }
        }
        if !edges.is_empty() && couplings.iter().all(|&j| j == 0.0) {
            return Err(Error::InvalidGraph("all couplings vanish".into()));
        }
        let mut on_boundary = vec![false; n];
        for &b in &boundary {
            if b >= n {
                return Err(Error::InvalidGraph(format!(
                    "boundary vertex {b} out of range"
                )));
            }
            if on_boundary[b] {
                return Err(Error::InvalidGraph(format!(
                    "boundary vertex {} listed twice",
                    labels[b]
                )));
            }
            on_boundary[b] = true;
        }
        if origin >= n {
            return Err(Error::InvalidGraph("origin out of range".into()));
        }
        Ok(FiniteGraph {
            labels,
            edges,
            couplings,
            boundary,
            origin,
            faces: None,
            embedding: None,
            adjacency,
            on_boundary,
        })
    }

    /// Attaches bounded-face data (edge-id lists). The outer face is implied:
    /// every edge must border exactly two faces counted with the outer one.
    pub fn with_faces(mut self, faces: Vec<Vec<usize>>) -> Result<Self> {
        let mut count = vec![0usize; self.edges.len()];
        for f in &faces {
            if f.is_empty() {
                return Err(Error::InvalidGraph("empty face".into()));
            }
            for &e in f {
                if e >= self.edges.len() {
                    return Err(Error::InvalidGraph(format!(
                        "face refers to unknown edge {e}"
                    )));
                }
                count[e] += 1;
            }
        }
        if let Some(e) = count.iter().position(|&c| c > 2) {
            return Err(Error::InvalidGraph(format!(
                "edge {e} borders more than two faces"
            )));
        }
        if !self.is_connected() {
            return Err(Error::InvalidGraph(
                "face data requires a connected graph".into(),
            ));
        }
        // Euler: V - E + F = 2 with F counting the outer face.
        let euler = self.n_vertices() as i64 - self.n_edges() as i64 + faces.len() as i64 + 1;
        if euler != 2 {
            return Err(Error::InvalidGraph(format!(
                "face data violates Euler's formula (V - E + F = {euler})"
            )));
        }
        self.faces = Some(faces);
        Ok(self)
    }

    pub(crate) fn with_embedding(mut self, embedding: LatticeEmbedding) -> Self {
        debug_assert_eq!(embedding.coords.len(), self.labels.len());
        self.embedding = Some(embedding);
        self
    }

    pub fn n_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn endpoints(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn coupling(&self, e: usize) -> f64 {
        self.couplings[e]
    }

    /// The common coupling value, if all couplings are equal.
    pub fn uniform_coupling(&self) -> Option<f64> {
        let first = *self.couplings.first()?;
        self.couplings.iter().all(|&j| j == first).then_some(first)
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.on_boundary[v]
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn label(&self, v: usize) -> u64 {
        self.labels[v]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn index_of(&self, label: u64) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or(Error::UnknownVertex(label))
    }

    /// `(neighbour, edge id)` pairs incident to `v`.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn faces(&self) -> Option<&[Vec<usize>]> {
        self.faces.as_deref()
    }

    pub fn embedding(&self) -> Option<&LatticeEmbedding> {
        self.embedding.as_ref()
    }

    pub fn is_connected(&self) -> bool {
        self.bfs_distances(0).iter().all(Option::is_some)
    }

    /// BFS distances inside the graph from vertex index `source`.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_vertices()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            for &(w, _) in &self.adjacency[u] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Graph distance between two vertices given by their external ids.
    /// Returns `None` when they lie in different components.
    pub fn graph_distance(&self, x: u64, y: u64) -> Result<Option<usize>> {
        let xi = self.index_of(x)?;
        let yi = self.index_of(y)?;
        Ok(self.bfs_distances(xi)[yi])
    }

    /// Distance used to define boxes `Λ_k(x)`: the lattice distance when the
    /// graph carries a lattice embedding, the in-graph distance otherwise.
    pub fn box_distances(&self, center: usize) -> Vec<Option<usize>> {
        match &self.embedding {
            Some(emb) => {
                let c = emb.coords[center];
                emb.coords
                    .iter()
                    .map(|&x| Some(emb.family.distance(c, x)))
                    .collect()
            }
            None => self.bfs_distances(center),
        }
    }

    /// Vertices of the graph lying on `∂Λ_k(center)`, i.e. at box distance
    /// exactly `k` from `center`. For `k = 0` this is `{center}`.
    pub fn sphere(&self, center: usize, k: usize) -> Vec<usize> {
        self.box_distances(center)
            .iter()
            .enumerate()
            .filter(|(_, d)| **d == Some(k))
            .map(|(v, _)| v)
            .collect()
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            vertices: self.labels.clone(),
            edges: self
                .edges
                .iter()
                .zip(&self.couplings)
                .map(|(&[u, v], &j)| (self.labels[u], self.labels[v], j))
                .collect(),
            boundary: self.boundary.iter().map(|&b| self.labels[b]).collect(),
            origin: self.labels[self.origin],
            faces: self.faces.clone(),
        }
    }

    pub fn from_file(file: GraphFile) -> Result<Self> {
        let index: HashMap<u64, usize> = file
            .vertices
            .iter()
            .enumerate()
            .map(|(i, &l)| (l, i))
            .collect();
        let lookup = |l: u64| index.get(&l).copied().ok_or(Error::UnknownVertex(l));
        let mut edges = Vec::with_capacity(file.edges.len());
        let mut couplings = Vec::with_capacity(file.edges.len());
        for &(u, v, j) in &file.edges {
            edges.push([lookup(u)?, lookup(v)?]);
            couplings.push(j);
        }
        let boundary = file
            .boundary
            .iter()
            .map(|&b| lookup(b))
            .collect::<Result<Vec<_>>>()?;
        let origin = lookup(file.origin)?;
        let g = FiniteGraph::new(file.vertices, edges, couplings, boundary, origin)?;
        match file.faces {
            Some(faces) => g.with_faces(faces),
            None => Ok(g),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("graph serialisation cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn four_cycle() -> FiniteGraph {
        FiniteGraph::new(
            vec![0, 1, 2, 3],
            vec![[0, 1], [1, 2], [2, 3], [0, 3]],
            vec![1.0; 4],
            vec![0, 2],
            0,
        )
        .unwrap()
    }

    #[test]
    fn rejects_self_loops_and_bad_couplings() {
        let loop_err = FiniteGraph::new(vec![0, 1], vec![[0, 0]], vec![1.0], vec![], 0);
        assert!(matches!(loop_err, Err(Error::InvalidGraph(_))));
        let neg = FiniteGraph::new(vec![0, 1], vec![[0, 1]], vec![-1.0], vec![], 0);
        assert!(neg.is_err());
        let zero = FiniteGraph::new(vec![0, 1], vec![[0, 1]], vec![0.0], vec![], 0);
        assert!(zero.is_err());
        let nan = FiniteGraph::new(vec![0, 1], vec![[0, 1]], vec![f64::NAN], vec![], 0);
        assert!(nan.is_err());
    }

    #[test]
    fn distance_errors_on_unknown_vertex() {
        let g = four_cycle();
        assert_eq!(g.graph_distance(0, 0).unwrap(), Some(0));
        assert_eq!(g.graph_distance(0, 2).unwrap(), Some(2));
        assert!(matches!(
            g.graph_distance(0, 9),
            Err(Error::UnknownVertex(9))
        ));
    }

    #[test]
    fn euler_check_on_faces() {
        assert!(four_cycle().with_faces(vec![vec![0, 1, 2, 3]]).is_ok());
        assert!(four_cycle().with_faces(vec![]).is_err());
        assert!(four_cycle()
            .with_faces(vec![vec![0, 1, 2, 3], vec![0, 1, 2, 3]])
            .is_err());
    }

    #[test]
    fn file_round_trip_preserves_labels() {
        let json = r#"{"vertices":[10,20,30],"edges":[[10,20,0.5],[20,30,1.25]],"boundary":[30],"origin":10}"#;
        let g = FiniteGraph::from_json(json).unwrap();
        assert_eq!(g.to_json(), json);
        assert_eq!(g.graph_distance(10, 30).unwrap(), Some(2));
    }
}
