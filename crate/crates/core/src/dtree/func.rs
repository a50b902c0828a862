use std::sync::{Arc, OnceLock};

use crate::graph::FiniteGraph;
use crate::measure::enumeration_cap;
use crate::unionfind::UnionFind;
use crate::{Error, Result};

/// Largest `|E|` for which a function is stored as a full table.
const CONSTANCY_TABLE_CAP: usize = 12;

/// A function on `{0,1}^E`, either tabulated or a connection event.
#[derive(Clone, Debug)]
pub enum BoolFn {
    Table(TableFn),
    Connect(ConnectFn),
}

#[derive(Debug)]
pub struct TableFn {
    name: String,
    n: usize,
    values: Vec<f64>,
    increasing: bool,
    constancy: OnceLock<Vec<f64>>,
}

impl Clone for TableFn {
    fn clone(&self) -> Self {
        TableFn {
            name: self.name.clone(),
            n: self.n,
            values: self.values.clone(),
            increasing: self.increasing,
            constancy: OnceLock::new(),
        }
    }
}

/// `1{A ↔ B}` for vertex sets `A`, `B` of a graph.
#[derive(Clone, Debug)]
pub struct ConnectFn {
    graph: Arc<FiniteGraph>,
    sources: Vec<usize>,
    targets: Vec<usize>,
}

impl TableFn {
    pub fn new(name: impl Into<String>, n: usize, values: Vec<f64>) -> Result<Self> {
        if n > enumeration_cap() {
            return Err(Error::ExactUnavailable {
                size: n,
                cap: enumeration_cap(),
            });
        }
        if values.len() != 1 << n {
            return Err(Error::InvalidParameter(format!(
                "function table needs {} entries, got {}",
                1u64 << n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "function values must be finite".into(),
            ));
        }
        let increasing = (0..values.len()).all(|m| {
            (0..n)
                .filter(|e| m >> e & 1 == 0)
                .all(|e| values[m] <= values[m | 1 << e])
        });
        Ok(TableFn {
            name: name.into(),
            n,
            values,
            increasing,
            constancy: OnceLock::new(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value on the cylinder if constant there, `NaN` otherwise, indexed in
    /// base 3 (digit 2 = unrevealed).
    fn constancy_table(&self) -> &[f64] {
        self.constancy.get_or_init(|| {
            let pow3: Vec<usize> = (0..=self.n).map(|i| 3usize.pow(i as u32)).collect();
            let mut t = vec![0.0; pow3[self.n]];
            for idx in 0..t.len() {
                let mut rest = idx;
                let mut mask = 0usize;
                let mut free = None;
                for e in 0..self.n {
                    match rest % 3 {
                        2 => {
                            free = Some(e);
                            break;
                        }
                        1 => mask |= 1 << e,
                        _ => {}
                    }
                    rest /= 3;
                }
                t[idx] = match free {
                    None => self.values[mask],
                    Some(e) => {
                        let a = t[idx - 2 * pow3[e]];
                        let b = t[idx - pow3[e]];
                        if a == b {
                            a
                        } else {
                            f64::NAN
                        }
                    }
                };
            }
            t
        })
    }

    fn determined_masks(&self, support: u64, values: u64) -> Option<f64> {
        let full = (1u64 << self.n) - 1;
        let values = values & support;
        if self.increasing {
            let lo = self.values[values as usize];
            let hi = self.values[(values | (full & !support)) as usize];
            return (lo == hi).then_some(lo);
        }
        if self.n <= CONSTANCY_TABLE_CAP {
            let idx: usize = (0..self.n)
                .map(|e| {
                    let d = if support >> e & 1 == 0 {
                        2
                    } else {
                        (values >> e & 1) as usize
                    };
                    d * 3usize.pow(e as u32)
                })
                .sum();
            let v = self.constancy_table()[idx];
            return (!v.is_nan()).then_some(v);
        }
        let free = full & !support;
        let first = self.values[values as usize];
        let mut sub = free;
        loop {
            if self.values[(values | sub) as usize] != first {
                return None;
            }
            if sub == 0 {
                return Some(first);
            }
            sub = (sub - 1) & free;
        }
    }
}

impl ConnectFn {
    pub fn new(graph: Arc<FiniteGraph>, sources: Vec<usize>, targets: Vec<usize>) -> Result<Self> {
        if sources.is_empty() || targets.is_empty() {
            return Err(Error::InvalidParameter(
                "connection event needs nonempty endpoints".into(),
            ));
        }
        if sources
            .iter()
            .chain(&targets)
            .any(|&v| v >= graph.n_vertices())
        {
            return Err(Error::InvalidParameter(
                "connection endpoint out of range".into(),
            ));
        }
        Ok(ConnectFn {
            graph,
            sources,
            targets,
        })
    }

    /// `1{0 ↔ ∂Λ_n}` inside `graph`, with `∂Λ_n` the sphere of radius `n`
    /// around the origin.
    pub fn origin_to_sphere(graph: Arc<FiniteGraph>, n: usize) -> Result<Self> {
        let sphere = graph.sphere(graph.origin(), n);
        if sphere.is_empty() {
            return Err(Error::InvalidGraph(format!(
                "the sphere of radius {n} is empty"
            )));
        }
        let origin = graph.origin();
        Self::new(graph, vec![origin], sphere)
    }

    pub fn graph(&self) -> &FiniteGraph {
        &self.graph
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// Whether `A ↔ B` using the edges for which `open` holds.
    pub fn connects(&self, open: impl Fn(usize) -> bool, uf: &mut UnionFind) -> bool {
        uf.reset();
        for (e, &[u, v]) in self.graph.edges().iter().enumerate() {
            if open(e) {
                uf.union(u, v);
            }
        }
        let a = self.sources[0];
        let b = self.targets[0];
        for &s in &self.sources[1..] {
            uf.union(a, s);
        }
        if self.sources.iter().any(|s| self.targets.contains(s)) {
            return true;
        }
        for &t in &self.targets[1..] {
            uf.union(b, t);
        }
        uf.same(a, b)
    }
}

impl BoolFn {
    pub fn table(name: impl Into<String>, n: usize, values: Vec<f64>) -> Result<Self> {
        Ok(BoolFn::Table(TableFn::new(name, n, values)?))
    }

    pub fn from_indicator(
        name: impl Into<String>,
        n: usize,
        f: impl Fn(u64) -> bool,
    ) -> Result<Self> {
        if n > enumeration_cap() {
            return Err(Error::ExactUnavailable {
                size: n,
                cap: enumeration_cap(),
            });
        }
        Self::table(name, n, (0..1u64 << n).map(|m| f(m) as u8 as f64).collect())
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::table(format!("constant({value})"), n, vec![value; 1 << n])
    }

    pub fn dictator(n: usize, e: usize) -> Result<Self> {
        check_subset(n, &[e])?;
        Self::from_indicator(format!("dictator({e})"), n, |m| m >> e & 1 == 1)
    }

    pub fn and(n: usize, edges: &[usize]) -> Result<Self> {
        let s = check_subset(n, edges)?;
        Self::from_indicator(format!("and{edges:?}"), n, |m| m & s == s)
    }

    pub fn or(n: usize, edges: &[usize]) -> Result<Self> {
        let s = check_subset(n, edges)?;
        Self::from_indicator(format!("or{edges:?}"), n, |m| m & s != 0)
    }

    /// At least half of the edges open (ties count as open).
    pub fn majority(n: usize, edges: &[usize]) -> Result<Self> {
        let s = check_subset(n, edges)?;
        let k = edges.len() as u32;
        Self::from_indicator(format!("majority{edges:?}"), n, |m| {
            2 * (m & s).count_ones() >= k
        })
    }

    pub fn connect(
        graph: Arc<FiniteGraph>,
        sources: Vec<usize>,
        targets: Vec<usize>,
    ) -> Result<Self> {
        Ok(BoolFn::Connect(ConnectFn::new(graph, sources, targets)?))
    }

    pub fn name(&self) -> String {
        match self {
            BoolFn::Table(t) => t.name.clone(),
            BoolFn::Connect(c) => format!(
                "connect({:?} <-> {} vertices)",
                c.sources
                    .iter()
                    .map(|&v| c.graph.label(v))
                    .collect::<Vec<_>>(),
                c.targets.len()
            ),
        }
    }

    pub fn n_edges(&self) -> usize {
        match self {
            BoolFn::Table(t) => t.n,
            BoolFn::Connect(c) => c.graph.n_edges(),
        }
    }

    pub fn is_increasing(&self) -> bool {
        match self {
            BoolFn::Table(t) => t.increasing,
            BoolFn::Connect(_) => true,
        }
    }

    /// Value at a configuration given as a mask (`|E| ≤ 64`).
    pub fn eval_mask(&self, mask: u64) -> f64 {
        match self {
            BoolFn::Table(t) => t.values[mask as usize],
            BoolFn::Connect(c) => {
                let mut uf = UnionFind::new(c.graph.n_vertices());
                c.connects(|e| mask >> e & 1 == 1, &mut uf) as u8 as f64
            }
        }
    }

    pub fn eval(&self, omega: &[bool]) -> f64 {
        match self {
            BoolFn::Table(t) => t.values[mask_of(omega) as usize],
            BoolFn::Connect(c) => {
                let mut uf = UnionFind::new(c.graph.n_vertices());
                c.connects(|e| omega[e], &mut uf) as u8 as f64
            }
        }
    }

    /// The value of `f` if it is constant on the cylinder of `state`
    /// (`None` entries unrevealed).
    pub fn determined(&self, state: &[Option<bool>]) -> Option<f64> {
        match self {
            BoolFn::Table(t) => {
                let (support, values) =
                    state
                        .iter()
                        .enumerate()
                        .fold((0u64, 0u64), |(s, v), (e, x)| match x {
                            Some(b) => (s | 1 << e, v | (*b as u64) << e),
                            None => (s, v),
                        });
                t.determined_masks(support, values)
            }
            BoolFn::Connect(c) => {
                let mut uf = UnionFind::new(c.graph.n_vertices());
                if c.connects(|e| state[e] == Some(true), &mut uf) {
                    Some(1.0)
                } else if !c.connects(|e| state[e] != Some(false), &mut uf) {
                    Some(0.0)
                } else {
                    None
                }
            }
        }
    }

    /// As [`BoolFn::determined`] for a cylinder given by masks.
    pub fn determined_masks(&self, support: u64, values: u64) -> Option<f64> {
        match self {
            BoolFn::Table(t) => t.determined_masks(support, values),
            BoolFn::Connect(c) => {
                let mut uf = UnionFind::new(c.graph.n_vertices());
                let revealed_open = support & values;
                let maybe_open = values | !support;
                if c.connects(|e| revealed_open >> e & 1 == 1, &mut uf) {
                    Some(1.0)
                } else if !c.connects(|e| maybe_open >> e & 1 == 1, &mut uf) {
                    Some(0.0)
                } else {
                    None
                }
            }
        }
    }

    /// Tabulated copy (`|E| ≤ 20`).
    pub fn to_table(&self) -> Result<TableFn> {
        match self {
            BoolFn::Table(t) => Ok(t.clone()),
            BoolFn::Connect(_) => {
                let n = self.n_edges();
                if n > enumeration_cap() {
                    return Err(Error::ExactUnavailable {
                        size: n,
                        cap: enumeration_cap(),
                    });
                }
                TableFn::new(
                    self.name(),
                    n,
                    (0..1u64 << n).map(|m| self.eval_mask(m)).collect(),
                )
            }
        }
    }

    /// `(min, max)` over the cube, when tabulated.
    pub fn range(&self) -> Option<(f64, f64)> {
        match self {
            BoolFn::Table(t) => Some(
                t.values
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                        (a.min(v), b.max(v))
                    }),
            ),
            BoolFn::Connect(_) => Some((0.0, 1.0)),
        }
    }
}

pub(crate) fn mask_of(omega: &[bool]) -> u64 {
    omega
        .iter()
        .enumerate()
        .fold(0, |m, (e, &b)| m | (b as u64) << e)
}

fn check_subset(n: usize, edges: &[usize]) -> Result<u64> {
    if n > enumeration_cap() {
        return Err(Error::ExactUnavailable {
            size: n,
            cap: enumeration_cap(),
        });
    }
    let mut s = 0u64;
    for &e in edges {
        if e >= n || s >> e & 1 == 1 {
            return Err(Error::InvalidParameter(format!(
                "bad edge subset {edges:?}"
            )));
        }
        s |= 1 << e;
    }
    if s == 0 {
        return Err(Error::InvalidParameter("empty edge subset".into()));
    }
    Ok(s)
}
