//! Two-phase placement, migration and replication of virtual network
//! functions over an ISP edge network with a third-party cloud fallback.
//!
//! The crate is organised bottom-up:
//!
//! - [`topology`]: nodes, links, servers, propagation delays and the
//!   precomputed admissible/synchronization path catalog.
//! - [`traffic`]: diurnal lognormal demand series.
//! - [`forecast`]: a small LSTM trained per flow, plus baselines.
//! - [`model`]: placement state, feasibility checking, delay and objective
//!   evaluation. Solvers build solutions, this module judges them.
//! - [`solvers`]: exact branch-and-bound oracle, greedy, First-Fit,
//!   Random-Fit and an LP-format exporter of the full MILP.
//! - [`experiment`]: the obsv/over/pred two-phase protocol and sweeps.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod experiment;
pub mod forecast;
pub mod model;
pub mod seed;
pub mod solvers;
pub mod topology;
pub mod traffic;

pub use model::{Instance, PlacementSolution, PriorPlacement};
pub use topology::{PathCatalog, Topology};
