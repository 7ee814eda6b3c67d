//! Vanilla k-nearest-neighbour regression under Euclidean distance, with a
//! seeded k-fold cross-validation of k.

use rand::seq::SliceRandom;

use crate::dataset::{rng_from_seed, Dataset};
use crate::error::{Error, Result};

pub const DEFAULT_K_GRID: [usize; 10] = [1, 2, 3, 5, 7, 10, 15, 20, 30, 50];
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, Copy)]
pub struct KnnModel<'a> {
    data: &'a Dataset,
    k: usize,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Training rows of `rows` ordered by distance to `x`, ties by row index.
fn neighbour_order(data: &Dataset, rows: &[usize], x: &[f64]) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = rows.iter().map(|&i| (squared_distance(data.row(i), x), i)).collect();
    keyed.sort_unstable_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
    keyed.into_iter().map(|(_, i)| i).collect()
}

impl<'a> KnnModel<'a> {
    pub fn new(data: &'a Dataset, k: usize) -> Result<Self> {
        if k == 0 || k > data.n_samples() {
            return Err(Error::validation(format!("k must lie in 1..={}, got {k}", data.n_samples())));
        }
        Ok(Self { data, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.data.n_features() {
            return Err(Error::validation(format!(
                "query has {} coordinates, training data has {}",
                x.len(),
                self.data.n_features()
            )));
        }
        let mut keyed: Vec<(f64, usize)> =
            (0..self.data.n_samples()).map(|i| (squared_distance(self.data.row(i), x), i)).collect();
        let cmp = |p: &(f64, usize), q: &(f64, usize)| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1));
        if self.k < keyed.len() {
            keyed.select_nth_unstable_by(self.k - 1, cmp);
        }
        let total: f64 = keyed[..self.k].iter().map(|&(_, i)| self.data.y(i)).sum();
        Ok(total / self.k as f64)
    }

    /// Mean squared error on every row of `test`.
    pub fn test_error(&self, test: &Dataset) -> Result<f64> {
        let mut sse = 0.0;
        for i in 0..test.n_samples() {
            let r = self.predict(test.row(i))? - test.y(i);
            sse += r * r;
        }
        Ok(sse / test.n_samples() as f64)
    }
}

pub fn knn_predict(model: &KnnModel<'_>, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub best_k: usize,
    /// `(k, mean validation MSE)` for every grid value that was evaluated.
    pub scores: Vec<(usize, f64)>,
}

/// Chooses k from `grid` by `folds`-fold cross-validation with a seeded
/// random fold assignment. The score is the validation MSE pooled over all
/// rows. Grid values above the smallest training part are skipped; ties go
/// to the smaller k.
pub fn cross_validate_k(ds: &Dataset, grid: &[usize], folds: usize, seed: u64) -> Result<CrossValidation> {
    if folds < 2 {
        return Err(Error::validation("cross-validation needs at least 2 folds"));
    }
    if grid.is_empty() || grid.contains(&0) {
        return Err(Error::validation("k grid must be non-empty and positive"));
    }
    let n = ds.n_samples();
    if folds > n {
        return Err(Error::validation(format!("{folds} folds leave an empty part with {n} rows")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % folds;
    }
    let min_train = n - n.div_ceil(folds);
    if min_train == 0 {
        return Err(Error::validation("a cross-validation fold has an empty training part"));
    }
    let mut ks: Vec<usize> = grid.iter().copied().filter(|&k| k <= min_train).collect();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(Error::validation(format!("every k in the grid exceeds the training fold size {min_train}")));
    }
    let kmax = *ks.last().unwrap();
    let mut sse = vec![0.0; ks.len()];
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        for q in (0..n).filter(|&i| fold_of[i] == f) {
            let nb = neighbour_order(ds, &train, ds.row(q));
            let mut running = 0.0;
            let mut next = 0;
            for (m, &i) in nb.iter().take(kmax).enumerate() {
                running += ds.y(i);
                while next < ks.len() && ks[next] == m + 1 {
                    let r = running / (m + 1) as f64 - ds.y(q);
                    sse[next] += r * r;
                    next += 1;
                }
            }
        }
    }
    let scores: Vec<(usize, f64)> = ks.iter().zip(&sse).map(|(&k, &s)| (k, s / n as f64)).collect();
    let mut best = scores[0];
    for &s in &scores[1..] {
        if s.1 < best.1 {
            best = s;
        }
    }
    Ok(CrossValidation { best_k: best.0, scores })
}
