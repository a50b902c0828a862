use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::BoolFn;
use crate::graph::FiniteGraph;
use crate::{Error, Result};

/// A deterministic query strategy: given the queried edges and their bits,
/// it names the next edge to query.
#[derive(Clone, Debug)]
pub enum DecisionTree {
    /// Queries edges in a fixed order regardless of the answers.
    FixedOrder(Vec<usize>),
    /// Explores the clusters of `∂Λ_k`, then scans the remaining edges.
    Exploration(ExplorationTree),
    /// An explicit branching table.
    Table(TableTree),
}

#[derive(Clone, Debug)]
pub struct ExplorationTree {
    graph: Arc<FiniteGraph>,
    k: usize,
    n: usize,
    seeds: Vec<usize>,
}

/// Node `i` queries `edge`; `children[b]` is the node followed after reading
/// bit `b`. A missing child switches to querying the smallest unqueried edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableNode {
    pub edge: usize,
    pub children: [Option<usize>; 2],
}

#[derive(Clone, Debug)]
pub struct TableTree {
    n_edges: usize,
    nodes: Vec<TableNode>,
}

/// Serialised tree description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TreeSpec {
    FixedOrder {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        order: Option<Vec<usize>>,
    },
    Exploration {
        k: usize,
        n: usize,
    },
    UserTable {
        root: TableNodeSpec,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableNodeSpec {
    pub edge: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed: Option<Box<TableNodeSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open: Option<Box<TableNodeSpec>>,
}

impl TreeSpec {
    /// Builds the tree for a measure on `n_edges` edges; `graph` is needed
    /// for exploration trees.
    pub fn build(&self, n_edges: usize, graph: Option<&Arc<FiniteGraph>>) -> Result<DecisionTree> {
        match self {
            TreeSpec::FixedOrder { order: None } => Ok(DecisionTree::identity(n_edges)),
            TreeSpec::FixedOrder { order: Some(o) } => DecisionTree::fixed(o.clone(), n_edges),
            TreeSpec::Exploration { k, n } => {
                let g = graph
                    .ok_or_else(|| Error::InvalidTree("exploration trees need a graph".into()))?;
                Ok(DecisionTree::Exploration(ExplorationTree::new(
                    g.clone(),
                    *k,
                    *n,
                )?))
            }
            TreeSpec::UserTable { root } => {
                let mut nodes = Vec::new();
                fn flatten(spec: &TableNodeSpec, nodes: &mut Vec<TableNode>) -> usize {
                    let id = nodes.len();
                    nodes.push(TableNode {
                        edge: spec.edge,
                        children: [None, None],
                    });
                    let c0 = spec.closed.as_ref().map(|c| flatten(c, nodes));
                    let c1 = spec.open.as_ref().map(|c| flatten(c, nodes));
                    nodes[id].children = [c0, c1];
                    id
                }
                flatten(root, &mut nodes);
                Ok(DecisionTree::Table(TableTree::new(n_edges, nodes)?))
            }
        }
    }
}

impl ExplorationTree {
    pub fn new(graph: Arc<FiniteGraph>, k: usize, n: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidTree(format!(
                "need 1 ≤ k ≤ n, got k={k}, n={n}"
            )));
        }
        let seeds = graph.sphere(graph.origin(), k);
        if seeds.is_empty() {
            return Err(Error::InvalidTree(format!(
                "the sphere of radius {k} is empty"
            )));
        }
        if graph.sphere(graph.origin(), n).is_empty() {
            return Err(Error::InvalidTree(format!(
                "the sphere of radius {n} is empty"
            )));
        }
        Ok(ExplorationTree { graph, k, n, seeds })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seeds(&self) -> &[usize] {
        &self.seeds
    }
}

impl TableTree {
    pub fn new(n_edges: usize, nodes: Vec<TableNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidTree("table tree has no root".into()));
        }
        // Every node must be reached once, and no edge may repeat on a path.
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![(0usize, 0u64)];
        while let Some((i, path)) = stack.pop() {
            let node = nodes
                .get(i)
                .ok_or_else(|| Error::InvalidTree(format!("child {i} does not exist")))?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidTree(format!("node {i} has two parents")));
            }
            if node.edge >= n_edges {
                return Err(Error::InvalidTree(format!(
                    "node {i} queries unknown edge {}",
                    node.edge
                )));
            }
            if path >> node.edge & 1 == 1 {
                return Err(Error::InvalidTree(format!(
                    "node {i} queries edge {} twice on one branch",
                    node.edge
                )));
            }
            for c in node.children.iter().flatten() {
                stack.push((*c, path | 1 << node.edge));
            }
        }
        Ok(TableTree { n_edges, nodes })
    }

    pub fn nodes(&self) -> &[TableNode] {
        &self.nodes
    }

    /// A complete tree of depth `n` with uniformly random queries.
    pub fn random<R: Rng>(n_edges: usize, rng: &mut R) -> Self {
        let mut nodes = Vec::new();
        fn grow<R: Rng>(
            remaining: &mut Vec<usize>,
            nodes: &mut Vec<TableNode>,
            rng: &mut R,
        ) -> Option<usize> {
            if remaining.is_empty() {
                return None;
            }
            let pick = rng.random_range(0..remaining.len());
            let edge = remaining.swap_remove(pick);
            let id = nodes.len();
            nodes.push(TableNode {
                edge,
                children: [None, None],
            });
            let mut left = remaining.clone();
            let c0 = grow(&mut left, nodes, rng);
            let mut right = remaining.clone();
            let c1 = grow(&mut right, nodes, rng);
            nodes[id].children = [c0, c1];
            remaining.push(edge);
            Some(id)
        }
        let mut all: Vec<usize> = (0..n_edges).collect();
        all.shuffle(rng);
        grow(&mut all, &mut nodes, rng);
        TableTree { n_edges, nodes }
    }

    pub fn to_spec(&self) -> TreeSpec {
        fn build(t: &TableTree, i: usize) -> TableNodeSpec {
            let node = &t.nodes[i];
            TableNodeSpec {
                edge: node.edge,
                closed: node.children[0].map(|c| Box::new(build(t, c))),
                open: node.children[1].map(|c| Box::new(build(t, c))),
            }
        }
        TreeSpec::UserTable {
            root: build(self, 0),
        }
    }
}

impl DecisionTree {
    pub fn identity(n_edges: usize) -> Self {
        DecisionTree::FixedOrder((0..n_edges).collect())
    }

    pub fn reversed(n_edges: usize) -> Self {
        DecisionTree::FixedOrder((0..n_edges).rev().collect())
    }

    pub fn fixed(order: Vec<usize>, n_edges: usize) -> Result<Self> {
        let mut seen = vec![false; n_edges];
        if order.len() != n_edges {
            return Err(Error::InvalidTree(
                "fixed order must list every edge once".into(),
            ));
        }
        for &e in &order {
            if e >= n_edges || std::mem::replace(&mut seen[e], true) {
                return Err(Error::InvalidTree(
                    "fixed order must list every edge once".into(),
                ));
            }
        }
        Ok(DecisionTree::FixedOrder(order))
    }

    pub fn exploration(graph: Arc<FiniteGraph>, k: usize, n: usize) -> Result<Self> {
        Ok(DecisionTree::Exploration(ExplorationTree::new(
            graph, k, n,
        )?))
    }

    pub fn n_edges(&self) -> usize {
        match self {
            DecisionTree::FixedOrder(o) => o.len(),
            DecisionTree::Exploration(x) => x.graph.n_edges(),
            DecisionTree::Table(t) => t.n_edges,
        }
    }

    /// The first edge queried, `e₁`.
    pub fn root(&self) -> usize {
        self.cursor()
            .next_edge()
            .expect("trees query at least one edge")
    }

    pub fn label(&self) -> String {
        match self {
            DecisionTree::FixedOrder(o) if o.iter().enumerate().all(|(i, &e)| i == e) => {
                "fixed-order".into()
            }
            DecisionTree::FixedOrder(o) if o.iter().rev().enumerate().all(|(i, &e)| i == e) => {
                "reverse-order".into()
            }
            DecisionTree::FixedOrder(_) => "fixed-order(custom)".into(),
            DecisionTree::Exploration(x) => format!("exploration(k={}, n={})", x.k, x.n),
            DecisionTree::Table(t) => format!("user-table({} nodes)", t.nodes.len()),
        }
    }

    pub fn to_spec(&self) -> TreeSpec {
        match self {
            DecisionTree::FixedOrder(o) => TreeSpec::FixedOrder {
                order: Some(o.clone()),
            },
            DecisionTree::Exploration(x) => TreeSpec::Exploration { k: x.k, n: x.n },
            DecisionTree::Table(t) => t.to_spec(),
        }
    }

    pub fn cursor(&self) -> Cursor<'_> {
        let n = self.n_edges();
        let kind = match self {
            DecisionTree::FixedOrder(o) => CursorKind::Fixed { order: o, pos: 0 },
            DecisionTree::Exploration(x) => {
                let mut in_v = vec![false; x.graph.n_vertices()];
                let mut frontier = BTreeSet::new();
                for &s in &x.seeds {
                    in_v[s] = true;
                }
                for (e, &[u, v]) in x.graph.edges().iter().enumerate() {
                    if in_v[u] != in_v[v] {
                        frontier.insert(e);
                    }
                }
                CursorKind::Explore {
                    tree: x,
                    in_v,
                    frontier,
                    phase_one: true,
                    scan: 0,
                }
            }
            DecisionTree::Table(t) => CursorKind::Table {
                tree: t,
                node: Some(0),
                scan: 0,
            },
        };
        Cursor {
            kind,
            queried: vec![false; n],
            steps: 0,
        }
    }

    /// `φ_t`: the next edge after a revealed history, by replay.
    pub fn next_edge(&self, history: &[(usize, bool)]) -> Result<Option<usize>> {
        let mut c = self.cursor();
        for &(e, b) in history {
            match c.next_edge() {
                Some(x) if x == e => c.reveal(e, b)?,
                _ => {
                    return Err(Error::InvalidTree(format!(
                        "history does not follow the tree at edge {e}"
                    )))
                }
            }
        }
        Ok(c.next_edge())
    }
}

#[derive(Clone, Debug)]
enum CursorKind<'a> {
    Fixed {
        order: &'a [usize],
        pos: usize,
    },
    Explore {
        tree: &'a ExplorationTree,
        in_v: Vec<bool>,
        frontier: BTreeSet<usize>,
        phase_one: bool,
        scan: usize,
    },
    Table {
        tree: &'a TableTree,
        node: Option<usize>,
        scan: usize,
    },
}

/// Incremental execution state of a tree.
#[derive(Clone, Debug)]
pub struct Cursor<'a> {
    kind: CursorKind<'a>,
    queried: Vec<bool>,
    steps: usize,
}

impl Cursor<'_> {
    /// Next edge to query, `None` once every edge has been queried.
    pub fn next_edge(&mut self) -> Option<usize> {
        if self.steps == self.queried.len() {
            return None;
        }
        let queried = &self.queried;
        let smallest = |scan: &mut usize| {
            while queried[*scan] {
                *scan += 1;
            }
            *scan
        };
        match &mut self.kind {
            CursorKind::Fixed { order, pos } => Some(order[*pos]),
            CursorKind::Explore {
                frontier,
                phase_one,
                scan,
                ..
            } => {
                if *phase_one {
                    if let Some(&e) = frontier.iter().next() {
                        return Some(e);
                    }
                    *phase_one = false;
                }
                Some(smallest(scan))
            }
            CursorKind::Table { tree, node, scan } => match node {
                Some(i) => Some(tree.nodes[*i].edge),
                None => Some(smallest(scan)),
            },
        }
    }

    /// Records the answer for the edge just returned by `next_edge`.
    pub fn reveal(&mut self, e: usize, bit: bool) -> Result<()> {
        if e >= self.queried.len() || self.queried[e] {
            return Err(Error::InvalidTree(format!("edge {e} queried twice")));
        }
        self.queried[e] = true;
        self.steps += 1;
        match &mut self.kind {
            CursorKind::Fixed { pos, .. } => *pos += 1,
            CursorKind::Explore {
                tree,
                in_v,
                frontier,
                phase_one,
                ..
            } => {
                frontier.remove(&e);
                if *phase_one && bit {
                    let [u, v] = tree.graph.endpoints(e);
                    let y = if in_v[u] { v } else { u };
                    if !in_v[y] {
                        in_v[y] = true;
                        for &(w, f) in tree.graph.neighbors(y) {
                            if self.queried[f] {
                                continue;
                            }
                            if in_v[w] {
                                frontier.remove(&f);
                            } else {
                                frontier.insert(f);
                            }
                        }
                    }
                }
            }
            CursorKind::Table { tree, node, .. } => {
                if let Some(i) = *node {
                    *node = tree.nodes[i].children[bit as usize];
                }
            }
        }
        Ok(())
    }

    /// Whether an exploration cursor is still growing the seed clusters.
    pub fn in_phase_one(&self) -> bool {
        matches!(
            self.kind,
            CursorKind::Explore {
                phase_one: true,
                ..
            }
        )
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// The run of a tree on one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    /// `(e₁, …, e_n)`.
    pub order: Vec<usize>,
    /// `ω_{e_t}` along the order.
    pub bits: Vec<bool>,
    /// Determination time: the first `t ≥ 1` after which `f` is constant on
    /// the revealed cylinder.
    pub tau: usize,
    /// Last step of the first phase for exploration trees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_one_end: Option<usize>,
}

/// Runs `tree` on `omega` and computes the determination time of `f`.
pub fn run_tree(tree: &DecisionTree, omega: &[bool], f: &BoolFn) -> Result<RunTrace> {
    let n = tree.n_edges();
    if omega.len() != n || f.n_edges() != n {
        return Err(Error::InvalidParameter(
            "tree, configuration and function sizes differ".into(),
        ));
    }
    let mut c = tree.cursor();
    let mut state = vec![None; n];
    let mut order = Vec::with_capacity(n);
    let mut bits = Vec::with_capacity(n);
    let mut tau = None;
    let mut phase_one_end = None;
    let explores = matches!(tree, DecisionTree::Exploration(_));
    while let Some(e) = c.next_edge() {
        if explores && phase_one_end.is_none() && !c.in_phase_one() {
            phase_one_end = Some(order.len());
        }
        c.reveal(e, omega[e])?;
        state[e] = Some(omega[e]);
        order.push(e);
        bits.push(omega[e]);
        if tau.is_none() && f.determined(&state).is_some() {
            tau = Some(order.len());
        }
    }
    if explores && phase_one_end.is_none() {
        phase_one_end = Some(n);
    }
    Ok(RunTrace {
        order,
        bits,
        tau: tau.unwrap_or(n).max(1),
        phase_one_end,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::graph::{build_box, LatticeFamily, LatticeSpec};

    #[test]
    fn and_of_three_with_last_bit_closed() {
        let f = BoolFn::and(3, &[0, 1, 2]).unwrap();
        let tr = run_tree(&DecisionTree::identity(3), &[true, true, false], &f).unwrap();
        assert_eq!(tr.tau, 3);
        assert_eq!(tr.order, vec![0, 1, 2]);
    }

    #[test]
    fn constant_and_dictator_stop_at_one() {
        let c = BoolFn::constant(4, 1.0).unwrap();
        let d = BoolFn::dictator(4, 2).unwrap();
        let t = DecisionTree::fixed(vec![2, 0, 1, 3], 4).unwrap();
        for mask in 0..16u64 {
            let omega: Vec<bool> = (0..4).map(|e| mask >> e & 1 == 1).collect();
            assert_eq!(run_tree(&t, &omega, &c).unwrap().tau, 1);
            assert_eq!(run_tree(&t, &omega, &d).unwrap().tau, 1);
        }
    }

    #[test]
    fn fixed_order_must_be_a_permutation() {
        assert!(DecisionTree::fixed(vec![0, 0, 1], 3).is_err());
        assert!(DecisionTree::fixed(vec![0, 1], 3).is_err());
    }

    #[test]
    fn table_trees_reject_repeated_queries() {
        let nodes = vec![
            TableNode {
                edge: 0,
                children: [Some(1), None],
            },
            TableNode {
                edge: 0,
                children: [None, None],
            },
        ];
        assert!(matches!(
            TableTree::new(2, nodes),
            Err(Error::InvalidTree(_))
        ));
    }

    #[test]
    fn all_closed_exploration_queries_edges_at_the_seed_sphere_first() {
        let g = Arc::new(build_box(&LatticeSpec::new(LatticeFamily::Square, 2)).unwrap());
        let tree = DecisionTree::exploration(g.clone(), 1, 2).unwrap();
        let f = BoolFn::Connect(crate::dtree::ConnectFn::origin_to_sphere(g.clone(), 2).unwrap());
        let tr = run_tree(&tree, &vec![false; g.n_edges()], &f).unwrap();
        let seeds = g.sphere(g.origin(), 1);
        let touching: BTreeSet<usize> = (0..g.n_edges())
            .filter(|&e| {
                let [u, v] = g.endpoints(e);
                seeds.contains(&u) != seeds.contains(&v)
            })
            .collect();
        let end = tr.phase_one_end.unwrap();
        assert_eq!(end, touching.len());
        let first: BTreeSet<usize> = tr.order[..end].iter().copied().collect();
        assert_eq!(first, touching);
        assert!(tr.order[..end].windows(2).all(|w| w[0] < w[1]));
        assert!(tr.order[end..].windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn all_open_exploration_from_outer_sphere_covers_the_box() {
        let g = Arc::new(build_box(&LatticeSpec::new(LatticeFamily::Square, 2)).unwrap());
        let tree = DecisionTree::exploration(g.clone(), 2, 2).unwrap();
        let f = BoolFn::Connect(crate::dtree::ConnectFn::origin_to_sphere(g.clone(), 2).unwrap());
        let tr = run_tree(&tree, &vec![true; g.n_edges()], &f).unwrap();
        // Each vertex off the outer sphere is reached through one open edge.
        let inner = g.n_vertices() - g.sphere(g.origin(), 2).len();
        assert!(tr.phase_one_end.unwrap() >= inner);
        assert!(tr.tau <= tr.phase_one_end.unwrap());
    }

    #[test]
    fn spec_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = TableTree::random(4, &mut rng);
        assert_eq!(t.nodes().len(), 15);
        let spec = t.to_spec();
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.starts_with(r#"{"kind":"user-table""#));
        let back: TreeSpec = serde_json::from_str(&json).unwrap();
        let rebuilt = back.build(4, None).unwrap();
        assert_eq!(rebuilt.to_spec(), spec);
        let e: TreeSpec = serde_json::from_str(r#"{"kind":"exploration","k":1,"n":2}"#).unwrap();
        assert_eq!(e, TreeSpec::Exploration { k: 1, n: 2 });
    }

    #[test]
    fn next_edge_replays_history() {
        let nodes = vec![
            TableNode {
                edge: 1,
                children: [Some(1), Some(2)],
            },
            TableNode {
                edge: 2,
                children: [None, None],
            },
            TableNode {
                edge: 0,
                children: [None, None],
            },
        ];
        let t = DecisionTree::Table(TableTree::new(3, nodes).unwrap());
        assert_eq!(t.next_edge(&[]).unwrap(), Some(1));
        assert_eq!(t.next_edge(&[(1, false)]).unwrap(), Some(2));
        assert_eq!(t.next_edge(&[(1, true)]).unwrap(), Some(0));
        assert_eq!(t.next_edge(&[(1, true), (0, true)]).unwrap(), Some(2));
        assert!(t.next_edge(&[(0, true)]).is_err());
    }
}
