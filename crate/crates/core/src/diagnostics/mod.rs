//! Correlation diagnostics for grown trees.
//!
//! Every split of a CART tree picks the decision stump whose fitted values
//! are most correlated with the response in the node. This module measures
//! those correlations directly (as Pearson coefficients of fitted vectors),
//! computes the exact monotone-class supremum through isotonic projections,
//! and checks the inequalities that tie them to the training error.

mod isotonic;

use std::io::Write;

use crate::dataset::{Dataset, StepFunction};
use crate::error::{Error, Result};
use crate::numeric;
use crate::tree::{best_split_on_feature, NodeId, Tree};

pub use isotonic::{isotonic_fit, isotonic_fit_grouped, isotonic_fit_weighted};

fn responses(ds: &Dataset, rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| ds.y(i)).collect()
}

/// Pearson correlation between the stump fitted at `(feature, threshold)` and
/// the responses in the node. Zero when the node's responses are constant.
pub fn stump_correlation(ds: &Dataset, rows: &[usize], feature: usize, threshold: f64) -> Result<f64> {
    if feature >= ds.n_features() {
        return Err(Error::validation(format!("feature {feature} out of range")));
    }
    let y = responses(ds, rows);
    let goes_left: Vec<bool> = rows.iter().map(|&i| ds.x(i, feature) <= threshold).collect();
    let (left, right): (Vec<f64>, Vec<f64>) = {
        let mut l = Vec::new();
        let mut r = Vec::new();
        for (v, &gl) in y.iter().zip(&goes_left) {
            if gl {
                l.push(*v);
            } else {
                r.push(*v);
            }
        }
        (l, r)
    };
    if left.is_empty() || right.is_empty() {
        return Err(Error::contract("stump with an empty daughter"));
    }
    if numeric::all_equal(&y) {
        return Ok(0.0);
    }
    let (ml, mr) = (numeric::mean(&left), numeric::mean(&right));
    let stump: Vec<f64> = goes_left.iter().map(|&gl| if gl { ml } else { mr }).collect();
    Ok(numeric::pearson(&stump, &y))
}

/// Correlation of the best stump along one feature, `sqrt(decrease / impurity)`.
/// Zero when no split exists or the node is pure.
pub fn best_stump_correlation(ds: &Dataset, rows: &[usize], feature: usize) -> f64 {
    let impurity = numeric::variance(&responses(ds, rows));
    match best_split_on_feature(ds, rows, feature) {
        Some(split) if impurity > 0.0 => (split.decrease / impurity).sqrt().min(1.0),
        _ => 0.0,
    }
}

/// Largest correlation between the responses and a non-decreasing and a
/// non-increasing function of `feature`, as `(increasing, decreasing)`.
pub fn monotone_correlations(ds: &Dataset, rows: &[usize], feature: usize) -> (f64, f64) {
    let mut pairs: Vec<(f64, f64)> = rows.iter().map(|&i| (ds.x(i, feature), ds.y(i))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    if numeric::all_equal(&x) || numeric::all_equal(&y) {
        return (0.0, 0.0);
    }
    let increasing = isotonic_fit_grouped(&x, &y);
    let negated: Vec<f64> = y.iter().map(|v| -v).collect();
    let decreasing: Vec<f64> = isotonic_fit_grouped(&x, &negated).into_iter().map(|v| -v).collect();
    let inc = numeric::pearson(&increasing, &y).max(0.0);
    let dec = numeric::pearson(&decreasing, &y).max(0.0);
    (inc, dec)
}

/// Supremum of `|corr(g(x_feature), y)|` over monotone `g`.
pub fn monotone_correlation(ds: &Dataset, rows: &[usize], feature: usize) -> f64 {
    let (inc, dec) = monotone_correlations(ds, rows, feature);
    inc.max(dec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeCorrelation {
    pub node: NodeId,
    pub depth: usize,
    pub count: usize,
    /// Correlation of the node's chosen stump, computed from fitted values.
    pub stump_rho: f64,
    /// `sqrt(decrease / impurity)` for the chosen split.
    pub stump_rho_from_decrease: f64,
    pub feature_stump_rho: Vec<f64>,
    pub feature_monotone_increasing: Vec<f64>,
    pub feature_monotone_decreasing: Vec<f64>,
}

impl NodeCorrelation {
    pub fn best_feature_stump_rho(&self) -> f64 {
        self.feature_stump_rho.iter().copied().fold(0.0, f64::max)
    }

    pub fn feature_monotone_rho(&self, feature: usize) -> f64 {
        self.feature_monotone_increasing[feature].max(self.feature_monotone_decreasing[feature])
    }

    pub fn best_monotone_rho(&self) -> f64 {
        (0..self.feature_stump_rho.len()).map(|j| self.feature_monotone_rho(j)).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    /// One entry per internal node, in node order.
    pub nodes: Vec<NodeCorrelation>,
    /// Worst-node best-stump correlation.
    pub rho_h: f64,
    /// Worst-node best-monotone correlation.
    pub rho_m: f64,
    /// Largest node size at each depth.
    pub level_profile: Vec<usize>,
}

fn no_internal_nodes() -> Error {
    Error::Undefined("tree has no internal nodes".into())
}

pub fn node_correlation(tree: &Tree, ds: &Dataset, id: NodeId) -> Result<NodeCorrelation> {
    let node = tree.node(id);
    let split = node.split.ok_or_else(|| Error::validation(format!("node {id} is a leaf")))?;
    let rows = &node.samples;
    let d = ds.n_features();
    let mut inc = Vec::with_capacity(d);
    let mut dec = Vec::with_capacity(d);
    for j in 0..d {
        let (a, b) = monotone_correlations(ds, rows, j);
        inc.push(a);
        dec.push(b);
    }
    Ok(NodeCorrelation {
        node: id,
        depth: node.depth,
        count: node.count,
        stump_rho: stump_correlation(ds, rows, split.feature, split.threshold)?,
        stump_rho_from_decrease: if node.impurity > 0.0 { (split.decrease / node.impurity).sqrt() } else { 0.0 },
        feature_stump_rho: (0..d).map(|j| best_stump_correlation(ds, rows, j)).collect(),
        feature_monotone_increasing: inc,
        feature_monotone_decreasing: dec,
    })
}

/// Full per-node report over the internal nodes of `tree`.
pub fn correlation_report(tree: &Tree, ds: &Dataset) -> Result<CorrelationReport> {
    let nodes = tree
        .internal_nodes()
        .map(|n| node_correlation(tree, ds, n.id))
        .collect::<Result<Vec<_>>>()?;
    if nodes.is_empty() {
        return Err(no_internal_nodes());
    }
    let rho_h = nodes.iter().map(NodeCorrelation::best_feature_stump_rho).fold(f64::INFINITY, f64::min);
    let rho_m = nodes.iter().map(NodeCorrelation::best_monotone_rho).fold(f64::INFINITY, f64::min);
    Ok(CorrelationReport { nodes, rho_h, rho_m, level_profile: level_profile(tree) })
}

/// Worst-node stump correlation. The chosen split of each node is the best
/// stump over all features, so this reads it off the stored decrease.
pub fn rho_h(tree: &Tree) -> Result<f64> {
    tree.internal_nodes()
        .map(|n| {
            let split = n.split.expect("internal node has a split");
            if n.impurity > 0.0 {
                (split.decrease / n.impurity).sqrt().min(1.0)
            } else {
                0.0
            }
        })
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r))))
        .ok_or_else(no_internal_nodes)
}

/// Worst-node monotone correlation.
pub fn rho_m(tree: &Tree, ds: &Dataset) -> Result<f64> {
    tree.internal_nodes()
        .map(|n| (0..ds.n_features()).map(|j| monotone_correlation(ds, &n.samples, j)).fold(0.0, f64::max))
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r))))
        .ok_or_else(no_internal_nodes)
}

/// Largest node size at each depth `0..=tree.depth()`.
pub fn level_profile(tree: &Tree) -> Vec<usize> {
    let mut out = vec![0; tree.depth() + 1];
    for node in tree.nodes() {
        out[node.depth] = out[node.depth].max(node.count);
    }
    out
}

impl CorrelationReport {
    /// Per-node CSV followed by a summary row.
    pub fn write_csv(&self, out: impl Write, minimal_a: Option<f64>) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(["node", "depth", "count", "stump_rho", "monotone_rho"])?;
        for n in &self.nodes {
            w.write_record(&[
                n.node.to_string(),
                n.depth.to_string(),
                n.count.to_string(),
                n.stump_rho.to_string(),
                n.best_monotone_rho().to_string(),
            ])?;
        }
        w.write_record(["summary", "rho_h", "rho_m", "minimal_a"])?;
        w.write_record(&[
            "summary".to_string(),
            self.rho_h.to_string(),
            self.rho_m.to_string(),
            minimal_a.map_or_else(|| "NA".into(), |a| a.to_string()),
        ])?;
        w.flush().map_err(|source| Error::Io { path: "<correlation report>".into(), source })?;
        Ok(())
    }
}

/// Outcome of one inequality evaluated at one place.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub node: NodeId,
    pub feature: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
}

impl BoundCheck {
    pub fn margin(&self) -> f64 {
        self.lhs - self.rhs
    }

    /// `lhs >= rhs` up to a relative slack of `1e-12`.
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs - 1e-12 * self.rhs.abs().max(1e-300)
    }
}

/// Summary over many [`BoundCheck`]s.
pub fn violations(checks: &[BoundCheck]) -> Vec<&BoundCheck> {
    checks.iter().filter(|c| !c.holds()).collect()
}

/// Compares the stump correlation from fitted values with
/// `sqrt(decrease / impurity)` at every internal node; returns the largest
/// relative discrepancy between the squared values.
pub fn stump_identity_residual(tree: &Tree, ds: &Dataset) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for node in tree.internal_nodes() {
        let split = node.split.expect("internal node has a split");
        let rho = stump_correlation(ds, &node.samples, split.feature, split.threshold)?;
        let ratio = if node.impurity > 0.0 { split.decrease / node.impurity } else { 0.0 };
        let scale = (rho * rho).max(ratio);
        if scale > 0.0 {
            worst = worst.max((rho * rho - ratio).abs() / scale);
        }
    }
    Ok(worst)
}

/// For every split, the relative gap between the daughters' summed squared
/// error and the parent's scaled by `1 - rho^2`. Daughter and parent sums are
/// recomputed from the data.
pub fn contraction_residuals(tree: &Tree, ds: &Dataset) -> Result<Vec<(NodeId, f64)>> {
    let sse = |rows: &[usize]| {
        let y = responses(ds, rows);
        numeric::variance(&y) * y.len() as f64
    };
    let mut out = Vec::new();
    for node in tree.internal_nodes() {
        let split = node.split.expect("internal node has a split");
        let (l, r) = node.children.expect("internal node has children");
        let parent = sse(&node.samples);
        let after = sse(&tree.node(l).samples) + sse(&tree.node(r).samples);
        let rho = stump_correlation(ds, &node.samples, split.feature, split.threshold)?;
        let predicted = parent * (1.0 - rho * rho);
        let residual = if parent > 0.0 { (after - predicted).abs() / parent } else { after.abs() };
        out.push((node.id, residual));
    }
    Ok(out)
}

/// `training_error <= variance * exp(-K rho_h^2)` with `K` the depth limit.
pub fn exponential_training_bound(tree: &Tree, ds: &Dataset) -> Result<BoundCheck> {
    let rho = rho_h(tree)?;
    let bound = ds.response_variance() * (-(tree.max_depth() as f64) * rho * rho).exp();
    Ok(BoundCheck { node: Tree::ROOT, feature: None, lhs: bound, rhs: tree.training_error() })
}

/// The stump-versus-monotone inequality at every internal node and feature:
/// the best stump on a coordinate is at least the best monotone correlation
/// on it divided by `sqrt(1 + ln(2N))`.
pub fn check_fact1(tree: &Tree, ds: &Dataset) -> Vec<BoundCheck> {
    let mut out = Vec::new();
    for node in tree.internal_nodes() {
        let n = node.count as f64;
        let scale = (1.0 + (2.0 * n).ln()).sqrt();
        for j in 0..ds.n_features() {
            let stump = best_stump_correlation(ds, &node.samples, j);
            let mono = monotone_correlation(ds, &node.samples, j);
            out.push(BoundCheck { node: node.id, feature: Some(j), lhs: stump, rhs: mono / scale });
        }
    }
    out
}

/// Structural summary of a step function used by the step-function bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepShape {
    /// Number of constant pieces after merging equal neighbours.
    pub pieces: usize,
    /// Number of interior pieces that are strict local extrema.
    pub stationary: usize,
    /// Fewest data points in a stationary piece holding at least one point
    /// (1 when no stationary piece is occupied).
    pub min_stationary_count: usize,
}

/// Merged pieces as `(lower breakpoint, upper breakpoint, level)`.
fn merged_pieces(g: &StepFunction) -> Vec<(f64, f64, f64)> {
    let mut out: Vec<(f64, f64, f64)> = Vec::new();
    let bps = g.breakpoints();
    for (k, &level) in g.levels().iter().enumerate() {
        let lo = if k == 0 { f64::NEG_INFINITY } else { bps[k - 1] };
        let hi = if k == bps.len() { f64::INFINITY } else { bps[k] };
        match out.last_mut() {
            Some(last) if last.2 == level => last.1 = hi,
            _ => out.push((lo, hi, level)),
        }
    }
    out
}

pub fn step_shape(g: &StepFunction, x: &[f64]) -> StepShape {
    let pieces = merged_pieces(g);
    let mut stationary = 0;
    let mut min_count: Option<usize> = None;
    for k in 1..pieces.len().saturating_sub(1) {
        let (prev, cur, next) = (pieces[k - 1].2, pieces[k].2, pieces[k + 1].2);
        if (cur > prev && cur > next) || (cur < prev && cur < next) {
            stationary += 1;
            let (lo, hi) = (pieces[k].0, pieces[k].1);
            let count = x.iter().filter(|&&v| lo <= v && v < hi).count();
            if count > 0 {
                min_count = Some(min_count.map_or(count, |m| m.min(count)));
            }
        }
    }
    StepShape { pieces: pieces.len(), stationary, min_stationary_count: min_count.unwrap_or(1) }
}

/// Lower bound on the best stump correlation along `feature` in terms of
/// the correlation of an arbitrary step function `g` of that feature.
pub fn check_stepfn_bound(ds: &Dataset, rows: &[usize], feature: usize, g: &StepFunction) -> (BoundCheck, StepShape) {
    let x: Vec<f64> = rows.iter().map(|&i| ds.x(i, feature)).collect();
    let y = responses(ds, rows);
    let gx: Vec<f64> = x.iter().map(|&v| g.eval(v)).collect();
    let shape = step_shape(g, &x);
    let n = rows.len() as f64;
    let (v, m, d) = (shape.pieces as f64, shape.stationary as f64, shape.min_stationary_count as f64);
    let cap = (v - m - 1.0).max(0.0).min(1.0 + (2.0 * n).ln());
    let denom = m * n / d + cap;
    let g_rho = numeric::pearson(&gx, &y).abs();
    let rhs = if denom > 0.0 { g_rho / denom.sqrt() } else { 0.0 };
    let lhs = best_stump_correlation(ds, rows, feature);
    (BoundCheck { node: Tree::ROOT, feature: Some(feature), lhs, rhs }, shape)
}

/// Outcome of the sparse-additive correlation inequality at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseInequality {
    pub max_component_rho2: f64,
    /// `min over sign vectors of rho^2(sum_j w_j g_j, y) / d0`.
    pub signed_rhs: f64,
    /// `rho^2(sum_j g_j, y) / d0`.
    pub plain_rhs: f64,
    /// Whether every pair of components is non-negatively correlated.
    pub pairwise_nonnegative: bool,
}

impl SparseInequality {
    pub fn signed_holds(&self) -> bool {
        self.max_component_rho2 >= self.signed_rhs - 1e-12 * self.signed_rhs.abs()
    }

    pub fn plain_holds(&self) -> bool {
        self.max_component_rho2 >= self.plain_rhs - 1e-12 * self.plain_rhs.abs()
    }
}

/// Evaluates both forms of the inequality for component values
/// `components[j][i] = g_j(x_ij)` and responses `y`. Sign vectors are
/// enumerated exhaustively (`2^(d0-1)` of them, since `w` and `-w` agree).
pub fn check_sparse_inequality(components: &[Vec<f64>], y: &[f64]) -> Result<SparseInequality> {
    let d0 = components.len();
    if d0 == 0 || d0 > 20 {
        return Err(Error::validation(format!("need 1..=20 components, got {d0}")));
    }
    if components.iter().any(|c| c.len() != y.len()) {
        return Err(Error::validation("component length does not match response length"));
    }
    let rho2 = |v: &[f64]| {
        let r = numeric::pearson(v, y);
        r * r
    };
    let max_component_rho2 = components.iter().map(|c| rho2(c)).fold(0.0, f64::max);
    let mut signed_min = f64::INFINITY;
    let mut combo = vec![0.0; y.len()];
    for mask in 0u32..(1u32 << (d0 - 1)) {
        combo.iter_mut().for_each(|v| *v = 0.0);
        for (j, c) in components.iter().enumerate() {
            let sign = if j > 0 && mask & (1 << (j - 1)) != 0 { -1.0 } else { 1.0 };
            for (acc, v) in combo.iter_mut().zip(c) {
                *acc += sign * v;
            }
        }
        signed_min = signed_min.min(rho2(&combo));
    }
    let plain: Vec<f64> = (0..y.len()).map(|i| components.iter().map(|c| c[i]).sum()).collect();
    let mut pairwise_nonnegative = true;
    for a in 0..d0 {
        for b in a + 1..d0 {
            if numeric::pearson(&components[a], &components[b]) < 0.0 {
                pairwise_nonnegative = false;
            }
        }
    }
    Ok(SparseInequality {
        max_component_rho2,
        signed_rhs: signed_min / d0 as f64,
        plain_rhs: rho2(&plain) / d0 as f64,
        pairwise_nonnegative,
    })
}

/// Largest node size per level and the smallest `A` with
/// `N_k <= A n k^a / 2^k` for every `k = 1..=depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionProfile {
    pub level_max: Vec<usize>,
    pub exponent: f64,
    /// `None` for a root-only tree.
    pub minimal_a: Option<f64>,
}

pub fn assumption_profile(tree: &Tree, exponent: f64) -> Result<AssumptionProfile> {
    if !(exponent >= 0.0) {
        return Err(Error::validation(format!("exponent must be non-negative, got {exponent}")));
    }
    let level_max = level_profile(tree);
    let n = tree.n_samples() as f64;
    let minimal_a = (1..level_max.len())
        .map(|k| {
            let kf = k as f64;
            level_max[k] as f64 * 2f64.powi(k as i32) / (n * kf.powf(exponent))
        })
        .fold(None, |acc: Option<f64>, a| Some(acc.map_or(a, |m| m.max(a))));
    Ok(AssumptionProfile { level_max, exponent, minimal_a })
}

/// Training-error bound under the level-size assumption:
/// `err <= variance * (1 - K / log2(4 K^a A n))^(rho_m^2)`.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelBound {
    /// The bound's precondition `K < log2(4 K^a A n)` fails.
    NotApplicable { k: usize, log_term: f64 },
    Checked(BoundCheck),
}

pub fn check_level_training_bound(
    tree: &Tree,
    variance: f64,
    rho_m: f64,
    profile: &AssumptionProfile,
) -> LevelBound {
    let k = tree.depth();
    let err = tree.training_error();
    let a = match profile.minimal_a {
        Some(a) if k > 0 => a,
        _ => return LevelBound::Checked(BoundCheck { node: Tree::ROOT, feature: None, lhs: variance, rhs: err }),
    };
    let kf = k as f64;
    let log_term = (4.0 * kf.powf(profile.exponent) * a * tree.n_samples() as f64).log2();
    if !(kf < log_term) {
        return LevelBound::NotApplicable { k, log_term };
    }
    let bound = variance * (1.0 - kf / log_term).powf(rho_m * rho_m);
    LevelBound::Checked(BoundCheck { node: Tree::ROOT, feature: None, lhs: bound, rhs: err })
}

/// A split that does not separate two constant pieces of its feature's
/// component function.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationViolation {
    pub node: NodeId,
    pub feature: usize,
    pub threshold: f64,
}

/// Checks that every split of a tree grown on a step-additive response falls
/// between the last data value of one constant piece and the first of the
/// next, along the split coordinate. `components[j]` is the step function of
/// coordinate `j`; coordinates beyond `components.len()` carry no signal.
pub fn check_step_separation(tree: &Tree, ds: &Dataset, components: &[StepFunction]) -> Vec<SeparationViolation> {
    let mut out = Vec::new();
    for node in tree.internal_nodes() {
        let split = node.split.expect("internal node has a split");
        let violation = SeparationViolation { node: node.id, feature: split.feature, threshold: split.threshold };
        let Some(g) = components.get(split.feature) else {
            out.push(violation);
            continue;
        };
        let below = node
            .samples
            .iter()
            .map(|&i| ds.x(i, split.feature))
            .filter(|&v| v <= split.threshold)
            .fold(f64::NEG_INFINITY, f64::max);
        let above = node
            .samples
            .iter()
            .map(|&i| ds.x(i, split.feature))
            .filter(|&v| v > split.threshold)
            .fold(f64::INFINITY, f64::min);
        if g.piece_index(below) == g.piece_index(above) {
            out.push(violation);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate, rng_from_seed, GeneratorSpec};
    use crate::tree::grow;
    use proptest::prelude::*;
    use rand::Rng;

    fn uniform_dataset(n: usize, d: usize, seed: u64, f: impl Fn(&[f64], f64) -> f64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let features: Vec<f64> = (0..n * d).map(|_| rng.gen()).collect();
        let y: Vec<f64> = features.chunks(d).map(|x| f(x, rng.gen::<f64>() - 0.5)).collect();
        Dataset::new(d, features, y).unwrap()
    }

    /// Every monotone assignment on the sorted grid is constant on blocks of
    /// tied-x groups; search the block structures with pooled means, both
    /// directions.
    fn brute_force_monotone(x: &[f64], y: &[f64]) -> f64 {
        let mut groups: Vec<(usize, usize)> = Vec::new();
        for i in 0..x.len() {
            match groups.last_mut() {
                Some(g) if x[g.0] == x[i] => g.1 = i + 1,
                _ => groups.push((i, i + 1)),
            }
        }
        let m = groups.len();
        let mut best: f64 = 0.0;
        for mask in 0u32..(1 << (m - 1)) {
            let mut fit = Vec::with_capacity(y.len());
            let mut start = 0;
            for k in 0..m {
                if k == m - 1 || mask & (1 << k) != 0 {
                    let (lo, hi) = (groups[start].0, groups[k].1);
                    let mean = y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
                    fit.extend(std::iter::repeat(mean).take(hi - lo));
                    start = k + 1;
                }
            }
            let up = fit.windows(2).all(|w| w[0] <= w[1]);
            let down = fit.windows(2).all(|w| w[0] >= w[1]);
            if up || down {
                best = best.max(numeric::pearson(&fit, y).abs());
            }
        }
        best
    }

    #[test]
    fn separated_stump_has_unit_correlation() {
        let ds = Dataset::from_rows(&[vec![0.1], vec![0.2], vec![0.8], vec![0.9]], vec![0.0, 0.0, 5.0, 5.0]).unwrap();
        let rho = stump_correlation(&ds, &[0, 1, 2, 3], 0, 0.5).unwrap();
        assert!((rho - 1.0).abs() < 1e-15);
        let flat = ds.with_response(vec![2.0; 4]).unwrap();
        assert_eq!(stump_correlation(&flat, &[0, 1, 2, 3], 0, 0.5).unwrap(), 0.0);
        assert!(stump_correlation(&ds, &[0, 1, 2, 3], 0, 1.5).is_err());
    }

    #[test]
    fn increasing_response_has_unit_monotone_correlation() {
        let ds = uniform_dataset(100, 2, 1, |x, _| x[0].powi(3));
        let rows: Vec<usize> = (0..100).collect();
        assert!((monotone_correlation(&ds, &rows, 0) - 1.0).abs() < 1e-12);
        let tied = Dataset::from_rows(&[vec![0.5], vec![0.5]], vec![1.0, 2.0]).unwrap();
        assert_eq!(monotone_correlation(&tied, &[0, 1], 0), 0.0);
    }

    #[test]
    fn monotone_correlation_of_noise_is_small() {
        let ds = uniform_dataset(1000, 1, 2, |_, e| e);
        let rows: Vec<usize> = (0..1000).collect();
        assert!(monotone_correlation(&ds, &rows, 0) <= 0.5);
    }

    #[test]
    fn depth_one_report() {
        let ds = uniform_dataset(200, 3, 3, |x, e| x[1] + 0.3 * e);
        let tree = grow(&ds, 1);
        let report = correlation_report(&tree, &ds).unwrap();
        assert_eq!(report.nodes.len(), 1);
        assert!((report.rho_h - report.nodes[0].stump_rho).abs() < 1e-10);
        assert!((rho_h(&tree).unwrap() - report.rho_h).abs() < 1e-10);
        assert!(report.rho_m >= report.rho_h);
        assert_eq!(report.level_profile, vec![200, tree.node(1).count.max(tree.node(2).count)]);

        let mut buf = Vec::new();
        report.write_csv(&mut buf, Some(1.0)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("node,depth,count,stump_rho,monotone_rho"));
        assert!(text.lines().last().unwrap().starts_with("summary,"));
    }

    #[test]
    fn leaf_only_tree_is_undefined() {
        let ds = uniform_dataset(20, 2, 4, |x, _| x[0]);
        let tree = grow(&ds, 0);
        assert!(matches!(correlation_report(&tree, &ds), Err(Error::Undefined(_))));
        assert!(matches!(rho_h(&tree), Err(Error::Undefined(_))));
    }

    #[test]
    fn identities_hold_on_grown_tree() {
        let ds = generate(&GeneratorSpec::sparse_quadratic(500, 6, 3, 5)).unwrap();
        let tree = grow(&ds, 6);
        assert!(stump_identity_residual(&tree, &ds).unwrap() <= 1e-10);
        assert!(contraction_residuals(&tree, &ds).unwrap().iter().all(|&(_, r)| r <= 1e-10));
        assert!(exponential_training_bound(&tree, &ds).unwrap().holds());
        assert!(violations(&check_fact1(&tree, &ds)).is_empty());
    }

    #[test]
    fn fact1_denominator_for_two_points() {
        let ds = Dataset::from_rows(&[vec![0.2], vec![0.7]], vec![0.0, 1.0]).unwrap();
        let tree = grow(&ds, 1);
        let checks = check_fact1(&tree, &ds);
        assert_eq!(checks.len(), 1);
        assert!((checks[0].rhs - 1.0 / (1.0 + 4f64.ln()).sqrt()).abs() < 1e-15);
        assert_eq!(checks[0].lhs, 1.0);
    }

    #[test]
    fn step_shape_counts() {
        let monotone = StepFunction::new(vec![0.3, 0.6], vec![0.0, 1.0, 2.0]).unwrap();
        let x = [0.1, 0.4, 0.9];
        assert_eq!(step_shape(&monotone, &x), StepShape { pieces: 3, stationary: 0, min_stationary_count: 1 });
        let bump = StepFunction::new(vec![0.3, 0.6], vec![0.0, 2.0, 1.0]).unwrap();
        let x = [0.1, 0.35, 0.4, 0.5, 0.9];
        assert_eq!(step_shape(&bump, &x), StepShape { pieces: 3, stationary: 1, min_stationary_count: 3 });
        let merged = StepFunction::new(vec![0.3, 0.6], vec![1.0, 1.0, 2.0]).unwrap();
        assert_eq!(step_shape(&merged, &x).pieces, 2);
    }

    #[test]
    fn stump_g_bound_is_below_its_own_correlation() {
        let ds = uniform_dataset(300, 1, 6, |x, e| (x[0] > 0.4) as u8 as f64 + e);
        let rows: Vec<usize> = (0..300).collect();
        let g = StepFunction::new(vec![0.4], vec![0.0, 1.0]).unwrap();
        let (check, shape) = check_stepfn_bound(&ds, &rows, 0, &g);
        assert_eq!(shape.pieces, 2);
        let gx: Vec<f64> = rows.iter().map(|&i| g.eval(ds.x(i, 0))).collect();
        assert!(check.rhs <= numeric::pearson(&gx, ds.response()).abs() + 1e-15);
        assert!(check.holds());
    }

    #[test]
    fn unimodal_step_bound_holds() {
        let g = StepFunction::new(vec![0.3, 0.7], vec![0.0, 1.0, 0.2]).unwrap();
        for seed in 0..20 {
            let ds = uniform_dataset(150, 1, seed, |x, e| g.eval(x[0]) + e);
            let rows: Vec<usize> = (0..150).collect();
            let (check, shape) = check_stepfn_bound(&ds, &rows, 0, &g);
            assert_eq!(shape.stationary, 1);
            assert!(check.holds(), "seed {seed}: {check:?}");
        }
    }

    #[test]
    fn sparse_inequality_single_component_is_tight() {
        let y = vec![1.0, 3.0, 2.0, 5.0];
        let g = vec![vec![0.5, 1.0, 0.7, 2.0]];
        let r = check_sparse_inequality(&g, &y).unwrap();
        assert!((r.max_component_rho2 - r.plain_rhs).abs() < 1e-15);
        assert!((r.signed_rhs - r.plain_rhs).abs() < 1e-15);
        assert!(r.signed_holds() && r.plain_holds());
    }

    #[test]
    fn sparse_inequality_on_quadratic_model() {
        let ds = generate(&GeneratorSpec::sparse_quadratic(400, 6, 4, 7)).unwrap();
        let comps: Vec<Vec<f64>> = (0..4).map(|j| ds.column(j).iter().map(|v| v * v).collect()).collect();
        let r = check_sparse_inequality(&comps, ds.response()).unwrap();
        assert!(r.signed_holds(), "{r:?}");
    }

    #[test]
    fn assumption_profile_examples() {
        // Exact halving: 8 points on a grid split at the median each time.
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 8.0]).collect();
        let ds = Dataset::from_rows(&xs, (0..8).map(|i| i as f64).collect()).unwrap();
        let tree = grow(&ds, 3);
        let p = assumption_profile(&tree, 0.0).unwrap();
        assert_eq!(p.level_max, vec![8, 4, 2, 1]);
        assert!((p.minimal_a.unwrap() - 1.0).abs() < 1e-15);

        let root = grow(&ds, 0);
        let p = assumption_profile(&root, 1.0).unwrap();
        assert_eq!(p.level_max, vec![8]);
        assert_eq!(p.minimal_a, None);
        assert!(matches!(
            check_level_training_bound(&root, ds.response_variance(), 0.5, &p),
            LevelBound::Checked(c) if c.holds()
        ));
    }

    #[test]
    fn level_bound_loosens_as_rho_shrinks() {
        let ds = generate(&GeneratorSpec::sparse_quadratic(1000, 5, 2, 9)).unwrap();
        let tree = grow(&ds, 8);
        let profile = assumption_profile(&tree, 1.0).unwrap();
        let mut prev = 0.0;
        for rho in [1.0, 0.8, 0.5, 0.3, 0.1, 0.0] {
            if let LevelBound::Checked(c) = check_level_training_bound(&tree, ds.response_variance(), rho, &profile) {
                assert!(c.lhs >= prev);
                prev = c.lhs;
            }
        }
    }

    #[test]
    fn separation_on_single_step() {
        let g = StepFunction::new(vec![0.5], vec![0.0, 1.0]).unwrap();
        let ds = uniform_dataset(100, 3, 10, |x, _| g.eval(x[0]));
        let tree = grow(&ds, 10);
        assert!(check_step_separation(&tree, &ds, &[g]).is_empty());
        assert_eq!(tree.training_error(), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn monotone_matches_brute_force(n in 2usize..=8, seed in any::<u64>(), ties in any::<bool>()) {
            let mut rng = rng_from_seed(seed);
            let mut x: Vec<f64> = (0..n).map(|_| if ties { (rng.gen::<f64>() * 3.0).floor() / 3.0 } else { rng.gen() }).collect();
            x.sort_by(f64::total_cmp);
            let y: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let rows: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
            let ds = Dataset::from_rows(&rows, y.clone()).unwrap();
            let idx: Vec<usize> = (0..n).collect();
            let fast = monotone_correlation(&ds, &idx, 0);
            let slow = if numeric::all_equal(&x) { 0.0 } else { brute_force_monotone(&x, &y) };
            prop_assert!((fast - slow).abs() <= 1e-8, "fast {} slow {}", fast, slow);
        }

        #[test]
        fn stump_identity_random(n in 3usize..=200, seed in any::<u64>(), u in 0.0f64..1.0) {
            let ds = uniform_dataset(n, 2, seed, |x, e| x[0] * x[1] + e);
            let rows: Vec<usize> = (0..n).collect();
            let mut xs = ds.column(1);
            xs.sort_by(f64::total_cmp);
            let k = ((u * (n - 1) as f64) as usize).min(n - 2);
            let s = (xs[k] + xs[k + 1]) / 2.0;
            prop_assume!(xs[k] < xs[k + 1]);
            let rho = stump_correlation(&ds, &rows, 1, s).unwrap();
            let dec = crate::tree::impurity_decrease(&ds, &rows, 1, s).unwrap();
            let ratio = dec / ds.response_variance();
            prop_assert!((rho * rho - ratio).abs() <= 1e-10 * ratio.max(rho * rho));
            prop_assert!((0.0..=1.0 + 1e-12).contains(&rho));
        }

        #[test]
        fn monotone_dominates_stump(n in 3usize..=150, seed in any::<u64>()) {
            let ds = uniform_dataset(n, 2, seed, |x, e| (6.0 * x[0]).sin() + e);
            let rows: Vec<usize> = (0..n).collect();
            for j in 0..2 {
                prop_assert!(monotone_correlation(&ds, &rows, j) >= best_stump_correlation(&ds, &rows, j) - 1e-12);
            }
        }
    }
}
