//! Depth-limited CART growing with exhaustive axis-parallel split search.
//!
//! Nodes live in an arena stored in preorder (parent before children, left
//! subtree before right subtree), so two trees with the same shape and the
//! same statistics compare equal with `==` regardless of how they were built.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numeric::{self, CompensatedSum};

pub type NodeId = usize;

/// A split `x_feature <= threshold` (left) versus `> threshold` (right).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// Impurity decrease, with daughter weights relative to the node.
    pub decrease: f64,
    pub left_count: usize,
    pub right_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub depth: usize,
    pub count: usize,
    pub mean: f64,
    /// Within-node variance of the responses, divisor `count`.
    pub impurity: f64,
    /// Lower corner of the node's cell.
    pub lower: Vec<f64>,
    /// Upper corner of the node's cell.
    pub upper: Vec<f64>,
    /// Training rows that fall in this node, ascending.
    pub samples: Vec<usize>,
    pub split: Option<SplitCandidate>,
    pub children: Option<(NodeId, NodeId)>,
}

impl TreeNode {
    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    /// Sum of squared deviations from the node mean.
    #[inline]
    pub fn sse(&self) -> f64 {
        self.impurity * self.count as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    n_samples: usize,
    n_features: usize,
    max_depth: usize,
    nodes: Vec<TreeNode>,
}

/// Within-node variance `(1/N) sum (y - mean)^2`.
pub fn node_impurity(responses: &[f64]) -> Result<f64> {
    if responses.is_empty() {
        return Err(Error::contract("impurity of an empty node"));
    }
    Ok(numeric::variance(responses))
}

fn gather(ds: &Dataset, rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| ds.y(i)).collect()
}

fn partition(ds: &Dataset, rows: &[usize], feature: usize, threshold: f64) -> (Vec<usize>, Vec<usize>) {
    rows.iter().partition(|&&i| ds.x(i, feature) <= threshold)
}

fn check_feature(ds: &Dataset, feature: usize) -> Result<()> {
    if feature >= ds.n_features() {
        return Err(Error::validation(format!(
            "feature {feature} out of range for {} features",
            ds.n_features()
        )));
    }
    Ok(())
}

/// Impurity decrease of splitting `rows` at `(feature, threshold)`, in the
/// product form `P_L P_R (mean_L - mean_R)^2`.
pub fn impurity_decrease(ds: &Dataset, rows: &[usize], feature: usize, threshold: f64) -> Result<f64> {
    check_feature(ds, feature)?;
    let (left, right) = partition(ds, rows, feature, threshold);
    if left.is_empty() || right.is_empty() {
        return Err(Error::contract("split leaves a daughter node empty"));
    }
    let n = rows.len() as f64;
    let p_left = left.len() as f64 / n;
    let p_right = right.len() as f64 / n;
    let gap = numeric::mean(&gather(ds, &left)) - numeric::mean(&gather(ds, &right));
    Ok(p_left * p_right * gap * gap)
}

/// The same decrease computed as parent impurity minus weighted daughter
/// impurities.
pub fn impurity_decrease_weighted(ds: &Dataset, rows: &[usize], feature: usize, threshold: f64) -> Result<f64> {
    check_feature(ds, feature)?;
    let (left, right) = partition(ds, rows, feature, threshold);
    if left.is_empty() || right.is_empty() {
        return Err(Error::contract("split leaves a daughter node empty"));
    }
    let n = rows.len() as f64;
    let parent = node_impurity(&gather(ds, rows))?;
    let l = node_impurity(&gather(ds, &left))?;
    let r = node_impurity(&gather(ds, &right))?;
    Ok(parent - (left.len() as f64 / n * l + right.len() as f64 / n * r))
}

/// Midpoint between two consecutive distinct sorted values, nudged so that
/// `lo <= s < hi` survives rounding.
#[inline]
fn midpoint(lo: f64, hi: f64) -> f64 {
    let s = lo + (hi - lo) / 2.0;
    if s >= hi {
        lo
    } else {
        s
    }
}

struct ScanScratch {
    order: Vec<usize>,
    centered: Vec<f64>,
}

/// Best threshold on one feature, scanning sorted values with running sums of
/// the centred responses. Returns `None` if every value of the feature is tied.
fn scan_feature(
    ds: &Dataset,
    rows: &[usize],
    feature: usize,
    centered: &[f64],
    total: f64,
    order: &mut Vec<usize>,
) -> Option<SplitCandidate> {
    let n = rows.len();
    order.clear();
    order.extend(0..n);
    order.sort_unstable_by(|&a, &b| {
        ds.x(rows[a], feature).total_cmp(&ds.x(rows[b], feature)).then(rows[a].cmp(&rows[b]))
    });

    let nf = n as f64;
    let mut best: Option<SplitCandidate> = None;
    let mut left_sum = CompensatedSum::new();
    for k in 0..n - 1 {
        left_sum.add(centered[order[k]]);
        let here = ds.x(rows[order[k]], feature);
        let next = ds.x(rows[order[k + 1]], feature);
        if here == next {
            continue;
        }
        let n_left = (k + 1) as f64;
        let n_right = nf - n_left;
        let s_left = left_sum.value();
        let gap = s_left / n_left - (total - s_left) / n_right;
        let decrease = (n_left / nf) * (n_right / nf) * gap * gap;
        if best.map_or(true, |b| decrease > b.decrease * (1.0 + 1e-12)) {
            best = Some(SplitCandidate {
                feature,
                threshold: midpoint(here, next),
                decrease,
                left_count: k + 1,
                right_count: n - k - 1,
            });
        }
    }
    best
}

fn centered_responses(ds: &Dataset, rows: &[usize]) -> (Vec<f64>, f64) {
    let y = gather(ds, rows);
    let m = numeric::mean(&y);
    let centered: Vec<f64> = y.iter().map(|v| v - m).collect();
    let total = numeric::sum(centered.iter().copied());
    (centered, total)
}

/// Best split of the node holding `rows` on a single feature.
pub fn best_split_on_feature(ds: &Dataset, rows: &[usize], feature: usize) -> Option<SplitCandidate> {
    if rows.len() < 2 || feature >= ds.n_features() {
        return None;
    }
    let (centered, total) = centered_responses(ds, rows);
    scan_feature(ds, rows, feature, &centered, total, &mut Vec::with_capacity(rows.len()))
}

/// Maximiser of the impurity decrease over every feature and every midpoint
/// between consecutive distinct values. Ties (within `1e-12` relative) go to
/// the smallest feature index, then the smallest threshold.
pub fn best_split(ds: &Dataset, rows: &[usize]) -> Option<SplitCandidate> {
    let mut scratch = ScanScratch { order: Vec::with_capacity(rows.len()), centered: Vec::new() };
    best_split_with(ds, rows, &mut scratch)
}

fn best_split_with(ds: &Dataset, rows: &[usize], scratch: &mut ScanScratch) -> Option<SplitCandidate> {
    if rows.len() < 2 {
        return None;
    }
    let (centered, total) = centered_responses(ds, rows);
    scratch.centered = centered;
    let mut best: Option<SplitCandidate> = None;
    for j in 0..ds.n_features() {
        if let Some(c) = scan_feature(ds, rows, j, &scratch.centered, total, &mut scratch.order) {
            if best.map_or(true, |b| c.decrease > b.decrease * (1.0 + 1e-12)) {
                best = Some(c);
            }
        }
    }
    best
}

struct Pending {
    rows: Vec<usize>,
    depth: usize,
    parent: Option<(NodeId, bool)>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

/// Grows a tree to depth at most `max_depth`. A node is left as a leaf when it
/// holds a single sample, all its responses are equal, it sits at depth
/// `max_depth`, or no feature takes two distinct values in it.
pub fn grow(ds: &Dataset, max_depth: usize) -> Tree {
    let d = ds.n_features();
    let n = ds.n_samples();
    let mut lower = vec![0.0; d];
    let mut upper = vec![1.0; d];
    for i in 0..n {
        for j in 0..d {
            lower[j] = f64::min(lower[j], ds.x(i, j));
            upper[j] = f64::max(upper[j], ds.x(i, j));
        }
    }

    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut scratch = ScanScratch { order: Vec::with_capacity(n), centered: Vec::new() };
    let mut stack = vec![Pending { rows: (0..n).collect(), depth: 0, parent: None, lower, upper }];

    while let Some(p) = stack.pop() {
        let id = nodes.len();
        if let Some((parent, is_left)) = p.parent {
            let slot = nodes[parent].children.as_mut().expect("parent reserved children");
            if is_left {
                slot.0 = id;
            } else {
                slot.1 = id;
            }
        }
        let y = gather(ds, &p.rows);
        let constant = numeric::all_equal(&y);
        let mean = numeric::mean(&y);
        let impurity = numeric::variance(&y);

        let split = if p.rows.len() < 2 || constant || p.depth >= max_depth {
            None
        } else {
            best_split_with(ds, &p.rows, &mut scratch)
        };

        if let Some(split) = split {
            let (left_rows, right_rows) = partition(ds, &p.rows, split.feature, split.threshold);
            debug_assert_eq!(left_rows.len(), split.left_count);
            let mut left_upper = p.upper.clone();
            left_upper[split.feature] = split.threshold;
            let mut right_lower = p.lower.clone();
            right_lower[split.feature] = split.threshold;
            stack.push(Pending {
                rows: right_rows,
                depth: p.depth + 1,
                parent: Some((id, false)),
                lower: right_lower,
                upper: p.upper.clone(),
            });
            stack.push(Pending {
                rows: left_rows,
                depth: p.depth + 1,
                parent: Some((id, true)),
                lower: p.lower.clone(),
                upper: left_upper,
            });
        }

        nodes.push(TreeNode {
            id,
            parent: p.parent.map(|(parent, _)| parent),
            depth: p.depth,
            count: p.rows.len(),
            mean,
            impurity,
            lower: p.lower,
            upper: p.upper,
            samples: p.rows,
            split,
            children: split.map(|_| (NodeId::MAX, NodeId::MAX)),
        });
    }

    Tree { n_samples: n, n_features: d, max_depth, nodes }
}

impl Tree {
    pub const ROOT: NodeId = 0;

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[Self::ROOT]
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// The depth limit the tree was grown with.
    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Depth of the deepest node actually present.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| !n.is_leaf())
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().count()
    }

    /// Ids of the subtree rooted at `id`, in preorder.
    pub fn subtree_ids(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(t) = stack.pop() {
            out.push(t);
            if let Some((l, r)) = self.nodes[t].children {
                stack.push(r);
                stack.push(l);
            }
        }
        out
    }

    /// Leaf reached by `x`, sending `x[j] <= threshold` left.
    pub fn leaf_for(&self, x: &[f64]) -> &TreeNode {
        let mut node = &self.nodes[Self::ROOT];
        while let (Some(split), Some((l, r))) = (node.split, node.children) {
            node = &self.nodes[if x[split.feature] <= split.threshold { l } else { r }];
        }
        node
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::validation(format!(
                "point has {} coordinates, tree expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(self.leaf_for(x).mean)
    }

    /// Training error as the count-weighted sum of leaf impurities.
    pub fn training_error(&self) -> f64 {
        numeric::sum(self.leaves().map(TreeNode::sse)) / self.n_samples as f64
    }

    /// Mean squared prediction error over the rows of `ds`.
    pub fn test_error(&self, ds: &Dataset) -> Result<f64> {
        if ds.n_features() != self.n_features {
            return Err(Error::validation(format!(
                "dataset has {} features, tree expects {}",
                ds.n_features(),
                self.n_features
            )));
        }
        let sq = (0..ds.n_samples()).map(|i| {
            let r = ds.y(i) - self.leaf_for(ds.row(i)).mean;
            r * r
        });
        Ok(numeric::sum(sq) / ds.n_samples() as f64)
    }

    /// Copy of the tree in which every node of `collapse` becomes a leaf.
    /// Nodes below a collapsed node are dropped and ids are reassigned in
    /// preorder.
    pub fn collapse(&self, collapse: &BTreeSet<NodeId>) -> Tree {
        let mut nodes = Vec::with_capacity(self.nodes.len());
        // (old id, new parent, is_left)
        let mut stack: Vec<(NodeId, Option<(NodeId, bool)>)> = vec![(Self::ROOT, None)];
        while let Some((old, parent)) = stack.pop() {
            let id = nodes.len();
            if let Some((p, is_left)) = parent {
                let slot: &mut (NodeId, NodeId) = nodes
                    .get_mut(p)
                    .and_then(|n: &mut TreeNode| n.children.as_mut())
                    .expect("parent reserved children");
                if is_left {
                    slot.0 = id;
                } else {
                    slot.1 = id;
                }
            }
            let mut node = self.nodes[old].clone();
            node.id = id;
            node.parent = parent.map(|(p, _)| p);
            if collapse.contains(&old) {
                node.split = None;
                node.children = None;
            }
            if let Some((l, r)) = self.nodes[old].children.filter(|_| node.children.is_some()) {
                node.children = Some((NodeId::MAX, NodeId::MAX));
                stack.push((r, Some((id, false))));
                stack.push((l, Some((id, true))));
            }
            nodes.push(node);
        }
        Tree { n_samples: self.n_samples, n_features: self.n_features, max_depth: self.max_depth, nodes }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Tree> {
        let tree: Tree = serde_json::from_str(text)?;
        tree.validate()?;
        Ok(tree)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Tree> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Tree::from_json(&text)
    }

    /// Structural checks: preorder ids, consistent parent/child links,
    /// split/children agreement, and leaves partitioning the sample set.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::validation("tree has no nodes"));
        }
        let mut seen = vec![false; self.n_samples];
        for (k, node) in self.nodes.iter().enumerate() {
            if node.id != k {
                return Err(Error::validation(format!("node at position {k} has id {}", node.id)));
            }
            if node.depth > self.max_depth {
                return Err(Error::validation(format!("node {k} deeper than max_depth")));
            }
            if node.lower.len() != self.n_features || node.upper.len() != self.n_features {
                return Err(Error::validation(format!("node {k} cell has wrong dimension")));
            }
            if node.count != node.samples.len() || node.impurity < 0.0 {
                return Err(Error::validation(format!("node {k} has inconsistent statistics")));
            }
            match (node.split, node.children) {
                (None, None) => {
                    for &i in &node.samples {
                        if i >= self.n_samples || std::mem::replace(&mut seen[i], true) {
                            return Err(Error::validation(format!("leaf {k} repeats or overflows sample {i}")));
                        }
                    }
                }
                (Some(split), Some((l, r))) => {
                    let ok = l == k + 1
                        && r > l
                        && r < self.nodes.len()
                        && self.nodes[l].parent == Some(k)
                        && self.nodes[r].parent == Some(k)
                        && self.nodes[l].depth == node.depth + 1
                        && self.nodes[r].depth == node.depth + 1
                        && split.feature < self.n_features
                        && split.left_count == self.nodes[l].count
                        && split.right_count == self.nodes[r].count
                        && split.left_count + split.right_count == node.count;
                    if !ok {
                        return Err(Error::validation(format!("internal node {k} has inconsistent children")));
                    }
                }
                _ => return Err(Error::validation(format!("node {k}: split and children disagree"))),
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::validation("leaves do not cover every sample"));
        }
        Ok(())
    }
}
