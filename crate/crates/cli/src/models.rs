//! Random model and dataset generators shared by the verification suites.

use cart_core::dataset::{augment_noise, generate, rng_from_seed, ExperimentRng};
use cart_core::{Dataset, GeneratorKind, GeneratorSpec, Result, StepFunction};
use rand::Rng;

/// A step function on `[0, 1]` with `pieces` constant pieces, each at least
/// `min_width` wide, and levels drawn from `[-1, 1]`.
pub fn random_step_function(rng: &mut ExperimentRng, pieces: usize, min_width: f64) -> StepFunction {
    assert!(pieces >= 1 && pieces as f64 * min_width < 1.0, "pieces do not fit");
    let slack = 1.0 - pieces as f64 * min_width;
    let weights: Vec<f64> = (0..pieces).map(|_| rng.gen::<f64>() + 0.05).collect();
    let total: f64 = weights.iter().sum();
    let mut breakpoints = Vec::with_capacity(pieces - 1);
    let mut at = 0.0;
    for w in &weights[..pieces - 1] {
        at += min_width + slack * w / total;
        breakpoints.push(at);
    }
    let mut levels: Vec<f64> = Vec::with_capacity(pieces);
    while levels.len() < pieces {
        let v = rng.gen_range(-1.0..1.0);
        // Neighbouring pieces must differ or they would merge.
        if levels.last().map_or(true, |&p: &f64| (p - v).abs() > 0.05) {
            levels.push(v);
        }
    }
    StepFunction::new(breakpoints, levels).expect("valid step function")
}

/// Piece counts (each at least 2) for 1 to 3 components with product at most `max_pieces`.
pub fn random_piece_counts(rng: &mut ExperimentRng, max_pieces: usize) -> Vec<usize> {
    assert!(max_pieces >= 2);
    let max_components = (max_pieces as f64).log2().floor() as usize;
    let d0 = rng.gen_range(1..=max_components.clamp(1, 3));
    let mut counts = Vec::with_capacity(d0);
    let mut budget = max_pieces;
    for j in 0..d0 {
        let reserve = 1usize << (d0 - j - 1);
        let hi = (budget / reserve).max(2);
        let m = rng.gen_range(2..=hi);
        counts.push(m);
        budget /= m;
    }
    counts
}

/// A step-additive model on `[0, 1]^d` whose constant cells are all
/// occupied by the generated sample. The sample is redrawn with a fresh
/// seed until every cell holds at least one point.
pub fn occupied_step_additive(
    rng: &mut ExperimentRng,
    n: usize,
    extra_noise_features: usize,
    max_pieces: usize,
) -> (GeneratorSpec, Dataset) {
    let counts = random_piece_counts(rng, max_pieces);
    let components: Vec<StepFunction> =
        counts.iter().map(|&m| random_step_function(rng, m, 0.5 / m as f64)).collect();
    let d0 = components.len();
    loop {
        let spec = GeneratorSpec {
            kind: GeneratorKind::StepAdditive { components: components.clone() },
            n,
            d: d0 + extra_noise_features,
            d0,
            seed: rng.gen(),
        };
        let ds = generate(&spec).expect("valid step-additive spec");
        let cells: std::collections::BTreeSet<Vec<usize>> = (0..n)
            .map(|i| components.iter().enumerate().map(|(j, g)| g.piece_index(ds.x(i, j))).collect())
            .collect();
        if cells.len() == counts.iter().product::<usize>() {
            return (spec, ds);
        }
    }
}

/// Diverse small regression datasets: smooth and step signals, pure noise
/// and additive noise. With `allow_ties`, a quarter of the datasets have
/// every coordinate rounded to a coarse grid.
pub fn suite_dataset(rng: &mut ExperimentRng, max_n: usize, max_d: usize, allow_ties: bool) -> Result<Dataset> {
    let n = rng.gen_range(20..=max_n.max(20));
    let d = rng.gen_range(1..=max_d.max(1));
    let d0 = rng.gen_range(1..=d);
    let seed: u64 = rng.gen();
    let kind = match rng.gen_range(0..3) {
        0 => GeneratorKind::SparseQuadratic,
        1 => GeneratorKind::Sinusoid { frequency: rng.gen_range(1..=4) },
        _ => {
            let components = (0..d0).map(|_| {
                let m = rng.gen_range(2..=4);
                random_step_function(rng, m, 0.1)
            });
            GeneratorKind::StepAdditive { components: components.collect() }
        }
    };
    let base = generate(&GeneratorSpec { kind, n, d, d0, seed })?;
    let mut noise_rng = rng_from_seed(seed ^ 0x9e37_79b9_7f4a_7c15);
    let noise_level = [0.0, 0.05, 0.3, 1.0][rng.gen_range(0..4)];
    let mut y: Vec<f64> = base.response().iter().map(|v| v + noise_level * (noise_rng.gen::<f64>() - 0.5)).collect();
    if rng.gen_bool(0.15) {
        // Pure noise response.
        y = (0..n).map(|_| noise_rng.gen::<f64>()).collect();
    }
    let mut ds = base.with_response(y)?;
    if allow_ties && rng.gen_bool(0.25) {
        // Coarse grid on every coordinate, which produces many tied values.
        let levels = rng.gen_range(3..=12) as f64;
        for j in 0..d {
            ds = ds.map_feature(j, |v| (v * levels).floor() / levels);
        }
    }
    Ok(ds)
}

/// Sparse-quadratic data with `extra` appended noise columns drawn from a
/// separate stream.
pub fn sparse_quadratic_with_noise(n: usize, d0: usize, extra: usize, seed: u64) -> Result<Dataset> {
    let ds = generate(&GeneratorSpec::sparse_quadratic(n, d0, d0, seed))?;
    Ok(augment_noise(&ds, extra, seed.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// `ceil(log2 n)`, at least 1.
pub fn default_depth(n: usize) -> usize {
    (usize::BITS - n.saturating_sub(1).leading_zeros()).max(1) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_depth_is_ceil_log2() {
        assert_eq!(default_depth(1), 1);
        assert_eq!(default_depth(2), 1);
        assert_eq!(default_depth(3), 2);
        assert_eq!(default_depth(1000), 10);
        assert_eq!(default_depth(1024), 10);
        assert_eq!(default_depth(1025), 11);
    }

    #[test]
    fn step_functions_respect_width_and_count() {
        let mut rng = rng_from_seed(3);
        for m in 1..8 {
            let g = random_step_function(&mut rng, m, 0.5 / m as f64);
            assert_eq!(g.n_pieces(), m);
            let mut prev = 0.0;
            for &b in g.breakpoints().iter().chain([1.0].iter()) {
                assert!(b - prev >= 0.5 / m as f64 - 1e-12);
                prev = b;
            }
        }
    }

    #[test]
    fn piece_counts_respect_budget() {
        let mut rng = rng_from_seed(4);
        for _ in 0..200 {
            let c = random_piece_counts(&mut rng, 12);
            assert!(c.iter().all(|&m| m >= 2));
            assert!(c.iter().product::<usize>() <= 12);
        }
    }
}
