//! Exact and Monte Carlo tooling around OSSS-type inequalities for
//! monotonic measures on `{0,1}^E`, and their use for sharpness of the
//! random-cluster phase transition.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: finite graphs, lattice boxes, graph distance, planar duals.
//! * [`measure`]: product, random-cluster and tabulated laws, one-edge
//!   conditionals, monotonicity audits, Potts measures.
//! * [`dtree`]: decision trees, determination time, revealment, the
//!   sequential sampler and the cluster-exploration tree.
//! * [`osss`]: variance/covariance/influence and exact inequality checks.
//! * [`mcmc`]: heat-bath dynamics and connection/crossing estimators.
//! * [`sharpness`]: derivative formula, differential inequality, critical
//!   points and finite-size diagnostics.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dtree;
pub mod error;
pub mod graph;
pub mod mcmc;
pub mod measure;
pub mod osss;
pub mod sharpness;
pub mod stats;
pub mod unionfind;

pub use error::{Error, Result};

/// Tolerance used for all exact (enumerated) inequality checks.
pub const EXACT_TOL: f64 = 1e-12;
