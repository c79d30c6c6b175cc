//! Semi-supervised structured output prediction with manifold regularization
//! applied directly to per-point slack outputs.
//!
//! Every training point carries a slack output `z_i` that is clamped to the
//! true output for labeled points. A k-nearest-neighbor graph over the inputs
//! penalizes structured loss between neighboring slack outputs, while a linear
//! model `w · Φ(x, y)` is fitted to the slack outputs through a loss-augmented
//! upper bound. The solver alternates between loss-augmented inference, a
//! per-point slack search, and a gradient step on `w`.
//!
//! Module map:
//! - [`model`]: shared domain types and the [`OutputSpace`] contract.
//! - [`spaces`]: multiclass, taxonomy-tree and label-sequence output spaces.
//! - [`graph`]: kNN graph with Gaussian edge weights and the manifold term.
//! - [`solver`]: the alternating optimizer, objective and trace.
//! - [`data`]: file formats, synthetic generators and fold planning.
//! - [`eval`]: cross-validation, baseline, parameter sweeps and report output.

pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod solver;
pub mod spaces;

pub use error::{Error, Result};
pub use graph::NeighborGraph;
pub use model::{matching_score, validate_dataset, DataPoint, Dataset, OutputSpace, Weights};
pub use solver::{SolverConfig, SolverState, TraceRow};
