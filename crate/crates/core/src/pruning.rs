//! Weakest-link cost-complexity pruning.
//!
//! For a temperature `alpha` the penalised cost of a subtree is its training
//! error plus `alpha` times its number of leaves. The weakest-link sequence
//! collapses, at each critical temperature, every internal node whose link
//! value `(R(t) - R(T_t)) / (|T_t| - 1)` is minimal; the resulting nested
//! subtrees are exactly the smallest cost minimisers.

use std::collections::BTreeSet;
use std::io::Write;

use crate::error::{Error, Result};
use crate::tree::{NodeId, Tree};

#[derive(Debug, Clone, PartialEq)]
pub struct PruneStep {
    /// Temperature at which this subtree becomes the smallest minimiser.
    pub alpha: f64,
    /// Nodes (ids in the unpruned tree) turned into leaves at this step.
    pub collapsed: Vec<NodeId>,
    pub n_leaves: usize,
    pub training_error: f64,
}

#[derive(Debug, Clone)]
pub struct PrunePath {
    tree: Tree,
    steps: Vec<PruneStep>,
}

/// Relative tolerance under which two link values count as tied.
const LINK_TIE: f64 = 1e-12;

struct Links {
    /// Training error contribution of each node if it were a leaf.
    node_risk: Vec<f64>,
    leaf: Vec<bool>,
    removed: Vec<bool>,
}

impl Links {
    /// Post-order pass over the current subtree: (risk of subtree, leaf count)
    /// for every live node.
    fn subtree_stats(&self, tree: &Tree) -> (Vec<f64>, Vec<usize>) {
        let n = tree.len();
        let mut risk = vec![0.0; n];
        let mut leaves = vec![0usize; n];
        for id in (0..n).rev() {
            if self.removed[id] {
                continue;
            }
            if self.leaf[id] {
                risk[id] = self.node_risk[id];
                leaves[id] = 1;
            } else {
                let (l, r) = tree.node(id).children.expect("internal node has children");
                risk[id] = risk[l] + risk[r];
                leaves[id] = leaves[l] + leaves[r];
            }
        }
        (risk, leaves)
    }

    /// Minimal link value and every live internal node attaining it.
    fn weakest(&self, tree: &Tree, scale: f64) -> Option<(f64, Vec<NodeId>)> {
        let (risk, leaves) = self.subtree_stats(tree);
        let links: Vec<(NodeId, f64)> = (0..tree.len())
            .filter(|&id| !self.removed[id] && !self.leaf[id])
            .map(|id| (id, (self.node_risk[id] - risk[id]) / (leaves[id] - 1) as f64))
            .collect();
        let min = links.iter().map(|&(_, g)| g).fold(f64::INFINITY, f64::min);
        if !min.is_finite() {
            return None;
        }
        let tol = LINK_TIE * min.abs() + 1e-15 * scale;
        Some((min, links.iter().filter(|&&(_, g)| g <= min + tol).map(|&(id, _)| id).collect()))
    }

    /// Collapses the given nodes; returns those not already inside another
    /// collapsed subtree.
    fn collapse(&mut self, tree: &Tree, ids: &[NodeId]) -> Vec<NodeId> {
        let mut top = Vec::new();
        for &id in ids {
            if self.removed[id] || self.leaf[id] {
                continue;
            }
            top.push(id);
            self.leaf[id] = true;
            for d in tree.subtree_ids(id).into_iter().skip(1) {
                self.removed[d] = true;
            }
        }
        top
    }

    fn state(&self) -> (usize, f64) {
        let live = (0..self.leaf.len()).filter(|&i| !self.removed[i] && self.leaf[i]);
        let mut n_leaves = 0;
        let mut err = crate::numeric::CompensatedSum::new();
        for i in live {
            n_leaves += 1;
            err.add(self.node_risk[i]);
        }
        (n_leaves, err.value())
    }
}

/// Builds the full weakest-link path. The first step (alpha = 0) is the input
/// tree with any zero-gain splits removed; the last step is the root alone.
pub fn prune_path(tree: &Tree) -> PrunePath {
    let n = tree.n_samples() as f64;
    let mut links = Links {
        node_risk: tree.nodes().iter().map(|t| t.sse() / n).collect(),
        leaf: tree.nodes().iter().map(|t| t.is_leaf()).collect(),
        removed: vec![false; tree.len()],
    };
    let scale = links.node_risk[Tree::ROOT].abs();

    let mut first = Vec::new();
    while let Some((g, ids)) = links.weakest(tree, scale) {
        if g > 1e-15 * scale {
            break;
        }
        first.extend(links.collapse(tree, &ids));
    }
    let (n_leaves, training_error) = links.state();
    let mut steps = vec![PruneStep { alpha: 0.0, collapsed: first, n_leaves, training_error }];

    while let Some((g, ids)) = links.weakest(tree, scale) {
        let collapsed = links.collapse(tree, &ids);
        let (n_leaves, training_error) = links.state();
        let last = steps.last_mut().expect("path starts with one step");
        if g > last.alpha {
            steps.push(PruneStep { alpha: g, collapsed, n_leaves, training_error });
        } else {
            last.collapsed.extend(collapsed);
            last.n_leaves = n_leaves;
            last.training_error = training_error;
        }
    }
    PrunePath { tree: tree.clone(), steps }
}

impl PrunePath {
    pub fn steps(&self) -> &[PruneStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The unpruned tree the path was built from.
    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    /// Every node collapsed up to and including `step`.
    pub fn collapse_set(&self, step: usize) -> BTreeSet<NodeId> {
        self.steps[..=step].iter().flat_map(|s| s.collapsed.iter().copied()).collect()
    }

    pub fn subtree(&self, step: usize) -> Tree {
        self.tree.collapse(&self.collapse_set(step))
    }

    /// Index of the step whose temperature interval contains `alpha`.
    pub fn step_for(&self, alpha: f64) -> Result<usize> {
        if !(alpha >= 0.0) {
            return Err(Error::validation(format!("temperature must be non-negative, got {alpha}")));
        }
        Ok(self.steps.partition_point(|s| s.alpha <= alpha) - 1)
    }

    /// Smallest subtree minimising `training_error + alpha * leaves`.
    pub fn select_subtree(&self, alpha: f64) -> Result<Tree> {
        Ok(self.subtree(self.step_for(alpha)?))
    }

    /// Minimal penalised cost over the path (equal to the minimum over all
    /// pruned subtrees).
    pub fn min_cost(&self, alpha: f64) -> f64 {
        self.steps
            .iter()
            .map(|s| s.training_error + alpha * s.n_leaves as f64)
            .fold(f64::INFINITY, f64::min)
    }

    /// CSV with columns `step, critical_alpha, n_leaves, training_error`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "critical_alpha", "n_leaves", "training_error"])?;
        for (k, s) in self.steps.iter().enumerate() {
            w.write_record(&[k.to_string(), s.alpha.to_string(), s.n_leaves.to_string(), s.training_error.to_string()])?;
        }
        w.flush().map_err(|source| Error::Io { path: "<prune path>".into(), source })?;
        Ok(())
    }
}

/// Penalised cost `training_error + alpha * leaves` of a tree.
pub fn penalized_cost(tree: &Tree, alpha: f64) -> f64 {
    tree.training_error() + alpha * tree.n_leaves() as f64
}

/// Temperature `scale * 27 B^2 (d + 1) ln(2 e n / (d + 1)) / n`; with `scale > 1`
/// it satisfies the oracle inequality's requirement on alpha.
pub fn default_temperature(n: usize, d: usize, bound: f64, scale: f64) -> Result<f64> {
    let (nf, df) = (n as f64, d as f64);
    if 2.0 * nf <= df + 1.0 {
        return Err(Error::validation(format!("need n > (d + 1) / 2, got n = {n}, d = {d}")));
    }
    let e = std::f64::consts::E;
    Ok(scale * 27.0 * bound * bound * (df + 1.0) * (2.0 * e * nf / (df + 1.0)).ln() / nf)
}

/// Temperature of the rate form `scale * (d / n) ln(n / d)`.
pub fn rate_temperature(n: usize, d: usize, scale: f64) -> Result<f64> {
    if d == 0 || n <= d {
        return Err(Error::validation(format!("need n > d >= 1, got n = {n}, d = {d}")));
    }
    let (nf, df) = (n as f64, d as f64);
    Ok(scale * (df / nf) * (nf / df).ln())
}
