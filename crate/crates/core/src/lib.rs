//! Heterogeneous Moran process on weighted directed fitness graphs:
//! simulation, exact and Monte Carlo fixation probabilities, seed
//! selection by greedy submodular maximization, and the Set Cover gadget
//! behind the hardness of seed selection.
//!
//! Monte Carlo work fans out over rayon when the `parallel` feature is on
//! (the default). Every run draws from its own counter-based stream, so
//! results are identical in sequential and parallel mode.

// guards like `!(x > 0.0)` are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod centrality;
pub mod config;
pub mod error;
pub mod estimate;
pub mod exact;
pub mod exec;
pub mod experiment;
pub mod generate;
pub mod graph;
pub mod io;
pub mod loopy;
pub mod process;
pub mod reduction;
pub mod select;
pub mod verify;

pub use config::Configuration;
pub use error::{Error, Result};
pub use estimate::{estimate_fp, EstimatorConfig, FixationEstimate};
pub use exact::{ExactOptions, ExactResult};
pub use exec::Execution;
pub use experiment::{run_sweep, ExperimentSpec, SweepRow};
pub use graph::{FitnessGraph, FitnessSummary, NodeId};
pub use loopy::{LoopyKernel, TwoGraphsView};
pub use process::{Absorption, StepOutcome, TrajectoryStats};
pub use reduction::{ReductionParams, SetCoverInstance};
pub use select::{greedy_select, GreedyOptions, Method, SelectionResult};
pub use verify::{Property, Verdict};
