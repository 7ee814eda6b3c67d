//! Regression trees grown with the CART impurity criterion, weakest-link
//! cost-complexity pruning, and a diagnostics layer that measures how well
//! each split's decision stump correlates with the response.
//!
//! The crate is organised bottom-up:
//!
//! * [`dataset`] – feature matrices on `[0, 1]^d`, synthetic generators, CSV I/O.
//! * [`tree`] – exhaustive axis-parallel split search and depth-limited growing.
//! * [`pruning`] – the nested alpha path and smallest-minimiser selection.
//! * [`diagnostics`] – stump / monotone correlations and the inequalities they obey.
//! * [`population`] – infinite-sample split analysis for one-dimensional models.
//! * [`knn`] – k-nearest-neighbour regression used as a baseline.

pub mod dataset;
pub mod diagnostics;
mod error;
pub mod knn;
pub mod numeric;
pub mod population;
pub mod pruning;
pub mod tree;

pub use dataset::{Dataset, GeneratorKind, GeneratorSpec, ResponseColumn, StepFunction};
pub use error::{Error, Result};
pub use pruning::{PrunePath, PruneStep};
pub use tree::{NodeId, SplitCandidate, Tree, TreeNode};
