//! Decision trees: executing them, determination times, revealments, the
//! sequential sampler and the cluster-exploration tree.

mod func;
mod tree;
mod walk;

pub use func::{BoolFn, ConnectFn, TableFn};
pub use tree::{
    run_tree, Cursor, DecisionTree, ExplorationTree, RunTrace, TableNode, TableNodeSpec, TableTree,
    TreeSpec,
};
pub use walk::{
    conditional_expectation_at_stop, revealment, revealment_by_runs, revealment_from_samples,
    revealment_until, sample_with, sampler_pushforward, sequential_sample, RevealmentMethod,
    RevealmentReport, StoppedExpectation, StoppedHistory, StoppingRule,
};
