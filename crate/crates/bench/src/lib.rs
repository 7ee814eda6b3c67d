//! Shared fixtures for the benchmarks.

use cart_core::dataset::generate;
use cart_core::{Dataset, GeneratorSpec};

/// Sparse-quadratic data with five active features.
pub fn fixture(n: usize, d: usize, seed: u64) -> Dataset {
    generate(&GeneratorSpec::sparse_quadratic(n, d, d.min(5), seed)).expect("valid fixture spec")
}
