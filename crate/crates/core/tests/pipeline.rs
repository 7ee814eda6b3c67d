//! End-to-end behaviour through the public API: data in, tree, pruning
//! path, diagnostics and baselines out.

use cart_core::dataset::{generate, load_csv, write_csv_file};
use cart_core::diagnostics::{correlation_report, rho_h};
use cart_core::knn::{cross_validate_k, KnnModel};
use cart_core::pruning::{penalized_cost, prune_path};
use cart_core::tree::grow;
use cart_core::{Dataset, GeneratorSpec, ResponseColumn, Tree};
use proptest::prelude::*;

fn sparse(n: usize, d: usize, d0: usize, seed: u64) -> Dataset {
    generate(&GeneratorSpec::sparse_quadratic(n, d, d0, seed)).unwrap()
}

#[test]
fn csv_and_json_round_trips_preserve_the_fit() {
    let dir = tempfile::tempdir().unwrap();
    let ds = sparse(150, 3, 2, 9);
    let csv = dir.path().join("d.csv");
    write_csv_file(&ds, &csv).unwrap();
    let back = load_csv(&csv, &ResponseColumn::Name("y".into())).unwrap();
    assert_eq!(back.n_samples(), 150);
    assert_eq!(back.response(), ds.response());

    let tree = grow(&back, 5);
    let json = dir.path().join("t.json");
    tree.write_json(&json).unwrap();
    let loaded = Tree::read_json(&json).unwrap();
    assert_eq!(loaded, tree);
    for i in 0..ds.n_samples() {
        assert_eq!(loaded.predict(ds.row(i)).unwrap(), tree.predict(ds.row(i)).unwrap());
    }
}

#[test]
fn pruning_trades_leaves_for_error_monotonically() {
    let ds = sparse(400, 6, 3, 2);
    let tree = grow(&ds, 9);
    let path = prune_path(&tree);
    let steps = path.steps();
    assert_eq!(steps.last().unwrap().n_leaves, 1);
    for w in steps.windows(2) {
        assert!(w[1].alpha > w[0].alpha);
        assert!(w[1].n_leaves < w[0].n_leaves);
        assert!(w[1].training_error >= w[0].training_error - 1e-12);
    }
    // The selected subtree attains the path minimum.
    for alpha in [0.0, 1e-4, 1e-3, 1e-2, 0.1] {
        let sub = path.select_subtree(alpha).unwrap();
        assert!((penalized_cost(&sub, alpha) - path.min_cost(alpha)).abs() < 1e-12);
    }
}

#[test]
fn tree_beats_knn_on_a_single_active_feature_among_many() {
    let train = sparse(800, 30, 1, 4);
    let test = sparse(2000, 30, 1, 5);
    let tree = grow(&train, 8);
    let sub = prune_path(&tree).select_subtree(1e-4).unwrap();
    let cv = cross_validate_k(&train, &[1, 5, 10, 20, 50], 5, 6).unwrap();
    let knn = KnnModel::new(&train, cv.best_k).unwrap();
    assert!(sub.test_error(&test).unwrap() < knn.test_error(&test).unwrap());
}

#[test]
fn diagnostics_agree_with_tree_decreases() {
    let ds = sparse(300, 4, 4, 8);
    let tree = grow(&ds, 6);
    let report = correlation_report(&tree, &ds).unwrap();
    let internal: Vec<_> = tree.internal_nodes().collect();
    assert_eq!(report.nodes.len(), internal.len());
    for (entry, node) in report.nodes.iter().zip(&internal) {
        let split = node.split.unwrap();
        let expected = (split.decrease / node.impurity).sqrt();
        assert!((entry.stump_rho - expected).abs() < 1e-9, "node {}", node.id);
    }
    assert_eq!(report.rho_h, rho_h(&tree).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Growing deeper never raises the training error, and children partition parents.
    #[test]
    fn deeper_trees_fit_better(seed in 0u64..1000, n in 10usize..200, d in 1usize..5) {
        let ds = sparse(n, d, d, seed);
        let mut last = f64::INFINITY;
        for depth in 0..6 {
            let tree = grow(&ds, depth);
            let err = tree.training_error();
            prop_assert!(err <= last + 1e-12);
            last = err;
            for node in tree.internal_nodes() {
                let (l, r) = node.children.unwrap();
                prop_assert_eq!(tree.node(l).count + tree.node(r).count, node.count);
            }
        }
    }

    /// Every pruned subtree on the path is a pruning of the grown tree: each
    /// training row lands in a node whose region contains the row's leaf.
    #[test]
    fn path_subtrees_are_nested(seed in 0u64..1000, n in 20usize..150) {
        let ds = sparse(n, 2, 2, seed);
        let tree = grow(&ds, 6);
        let path = prune_path(&tree);
        for k in 1..path.len() {
            let coarse = path.subtree(k);
            let fine = path.subtree(k - 1);
            for i in 0..n {
                let a = coarse.leaf_for(ds.row(i));
                let b = fine.leaf_for(ds.row(i));
                prop_assert!(b.samples.iter().all(|s| a.samples.binary_search(s).is_ok()));
            }
        }
    }
}
