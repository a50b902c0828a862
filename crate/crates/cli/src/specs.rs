//! Parsing of the compact graph, tree and function descriptions accepted on
//! the command line.

use std::fs;
use std::sync::Arc;

use ossslab::dtree::{BoolFn, ConnectFn, DecisionTree, TableTree, TreeSpec};
use ossslab::graph::{build_box, rectangle, FiniteGraph, GraphFile, LatticeFamily, LatticeSpec};
use ossslab::mcmc::chain_rng;
use serde::Deserialize;

use crate::Failure;

/// A parsed `--graph` value.
pub struct GraphArg {
    pub graph: Arc<FiniteGraph>,
    /// Radius of a lattice box, used as the default `n`.
    pub radius: Option<usize>,
}

/// `box:FAMILY:N`, `rect:WxH` or `file:PATH`.
pub fn parse_graph(spec: &str) -> Result<GraphArg, Failure> {
    let parts: Vec<&str> = spec.splitn(3, ':').collect();
    match parts.as_slice() {
        ["box", family, n] => {
            let family: LatticeFamily = family.parse()?;
            let n: usize = n
                .parse()
                .map_err(|_| Failure::usage(format!("bad box radius in `{spec}`")))?;
            Ok(GraphArg {
                graph: Arc::new(build_box(&LatticeSpec::new(family, n))?),
                radius: Some(n),
            })
        }
        ["rect", dims] => {
            let (w, h) = dims
                .split_once('x')
                .and_then(|(w, h)| Some((w.parse().ok()?, h.parse().ok()?)))
                .ok_or_else(|| Failure::usage(format!("expected rect:WxH, got `{spec}`")))?;
            Ok(GraphArg {
                graph: Arc::new(rectangle(w, h, 1.0)?),
                radius: None,
            })
        }
        ["file", _] | ["file", _, _] => {
            let path = &spec["file:".len()..];
            let file: GraphFile = serde_json::from_str(&fs::read_to_string(path)?)?;
            Ok(GraphArg {
                graph: Arc::new(FiniteGraph::from_file(file)?),
                radius: None,
            })
        }
        _ => Err(Failure::usage(format!("unrecognised graph `{spec}`"))),
    }
}

#[derive(Deserialize)]
struct FunctionFile {
    #[serde(default)]
    name: Option<String>,
    values: Vec<f64>,
}

/// `connect`, `connect:N`, `and`, `or`, `majority`, `dictator:E` or
/// `table:PATH` (JSON `{values: [...]}` indexed by configuration mask).
pub fn parse_function(
    spec: &str,
    graph: &Arc<FiniteGraph>,
    n: Option<usize>,
) -> Result<BoolFn, Failure> {
    let edges: Vec<usize> = (0..graph.n_edges()).collect();
    let m = graph.n_edges();
    let (head, rest) = spec
        .split_once(':')
        .map_or((spec, None), |(a, b)| (a, Some(b)));
    let f = match (head, rest) {
        ("connect", None) => match n {
            Some(n) => BoolFn::Connect(ConnectFn::origin_to_sphere(graph.clone(), n)?),
            None => BoolFn::connect(
                graph.clone(),
                vec![graph.origin()],
                graph.boundary().to_vec(),
            )?,
        },
        ("connect", Some(k)) => {
            let k = k
                .parse()
                .map_err(|_| Failure::usage(format!("bad radius in `{spec}`")))?;
            BoolFn::Connect(ConnectFn::origin_to_sphere(graph.clone(), k)?)
        }
        ("and", None) => BoolFn::and(m, &edges)?,
        ("or", None) => BoolFn::or(m, &edges)?,
        ("majority", None) => BoolFn::majority(m, &edges)?,
        ("dictator", Some(e)) => {
            let e = e
                .parse()
                .map_err(|_| Failure::usage(format!("bad edge in `{spec}`")))?;
            BoolFn::dictator(m, e)?
        }
        ("table", Some(path)) => {
            let file: FunctionFile = serde_json::from_str(&fs::read_to_string(path)?)?;
            BoolFn::table(file.name.unwrap_or_else(|| "table".into()), m, file.values)?
        }
        _ => return Err(Failure::usage(format!("unrecognised function `{spec}`"))),
    };
    Ok(f)
}

/// `fixed`, `reverse`, `exploration:K`, `exploration:K:N`, `random` or
/// `file:PATH` (a serialised tree).
pub fn parse_tree(
    spec: &str,
    graph: Option<&Arc<FiniteGraph>>,
    n_edges: usize,
    n: Option<usize>,
    seed: u64,
) -> Result<DecisionTree, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let number = |s: &str| -> Result<usize, Failure> {
        s.parse()
            .map_err(|_| Failure::usage(format!("bad number in tree `{spec}`")))
    };
    match parts.as_slice() {
        ["fixed"] => Ok(DecisionTree::identity(n_edges)),
        ["reverse"] => Ok(DecisionTree::reversed(n_edges)),
        ["random"] => Ok(DecisionTree::Table(TableTree::random(
            n_edges,
            &mut chain_rng(seed, 0),
        ))),
        ["exploration", rest @ ..] if !rest.is_empty() && rest.len() <= 2 => {
            let g = graph.ok_or_else(|| Failure::usage("exploration trees need a graph"))?;
            let k = number(rest[0])?;
            let n = match rest.get(1) {
                Some(s) => number(s)?,
                None => n.ok_or_else(|| {
                    Failure::usage("exploration trees need --n or exploration:K:N")
                })?,
            };
            Ok(DecisionTree::exploration(g.clone(), k, n)?)
        }
        ["file", ..] => {
            let spec: TreeSpec =
                serde_json::from_str(&fs::read_to_string(&spec["file:".len()..])?)?;
            Ok(spec.build(n_edges, graph)?)
        }
        _ => Err(Failure::usage(format!("unrecognised tree `{spec}`"))),
    }
}
