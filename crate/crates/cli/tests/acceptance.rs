//! Acceptance run: one PASS/FAIL line per criterion, each with its runtime
//! budget. Exits nonzero when any criterion fails without a documented
//! deviation.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cart_cli::checks::{self, CheckOutcome};
use cart_cli::experiments::{self, outcome_assertion};
use cart_cli::{Assertion, ExperimentConfig, ExperimentKind, HarnessError};
use cart_core::dataset::rng_from_seed;
use cart_core::pruning::prune_path;
use cart_core::tree::grow;
use cart_core::{Dataset, NodeId, Tree};
use rand::Rng;

/// Fixed seed; `cart verify --seed 20240601` reproduces criteria 1-3, 7-10 and 14.
const SEED: u64 = 20240601;

struct Criterion {
    id: usize,
    title: &'static str,
    budget: Duration,
    run: fn() -> Result<Vec<Assertion>, HarnessError>,
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn outcome(o: CheckOutcome) -> Result<Vec<Assertion>, HarnessError> {
    Ok(vec![outcome_assertion(&o)])
}

fn experiment(kind: ExperimentKind) -> Result<Vec<Assertion>, HarnessError> {
    let cfg = ExperimentConfig::defaults(kind);
    Ok(experiments::run(&cfg)?.assertions)
}

// Exhaustive pruning oracle, independent of the weakest-link path.

/// Every pruned subtree rooted at `id`: (collapsed internal nodes, risk, leaves).
fn prunings(tree: &Tree, id: NodeId, n: f64) -> Vec<(BTreeSet<NodeId>, f64, usize)> {
    let node = tree.node(id);
    let here = (BTreeSet::from([id]), node.sse() / n, 1);
    let Some((l, r)) = node.children else {
        return vec![(BTreeSet::new(), node.sse() / n, 1)];
    };
    let mut out = vec![here];
    let right = prunings(tree, r, n);
    for (cl, rl, ll) in prunings(tree, l, n) {
        for (cr, rr, lr) in &right {
            let mut c = cl.clone();
            c.extend(cr.iter().copied());
            out.push((c, rl + rr, ll + lr));
        }
    }
    out
}

/// Fewest-leaf subtree among those whose penalised cost ties the minimum.
fn smallest_minimizer(tree: &Tree, alpha: f64) -> Tree {
    let n = tree.n_samples() as f64;
    let all = prunings(tree, Tree::ROOT, n);
    let cost = |r: f64, l: usize| r + alpha * l as f64;
    let best = all.iter().map(|(_, r, l)| cost(*r, *l)).fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * (best.abs() + tree.root().sse() / n) + 1e-15;
    let (collapse, _, _) = all
        .iter()
        .filter(|(_, r, l)| cost(*r, *l) <= best + tol)
        .min_by_key(|(_, _, l)| *l)
        .expect("root-only subtree always exists");
    tree.collapse(collapse)
}

fn random_small_tree(rng: &mut impl Rng) -> Tree {
    loop {
        let n = rng.gen_range(6..=80);
        let d = rng.gen_range(1..=3);
        let x: Vec<f64> = (0..n * d).map(|_| rng.gen()).collect();
        let coarse = rng.gen_bool(0.5);
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let v = x[i * d] * 2.0 + rng.gen::<f64>();
                // Coarse responses make equal link values, and so tied critical temperatures, common.
                if coarse { (v * 2.0).round() } else { v }
            })
            .collect();
        let ds = Dataset::new(d, x, y).expect("finite data");
        let tree = grow(&ds, rng.gen_range(1..=5));
        if tree.n_leaves() <= 15 {
            return tree;
        }
    }
}

fn pruning_oracle() -> Result<Vec<Assertion>, HarnessError> {
    let mut rng = rng_from_seed(SEED ^ 0x5eed);
    let (mut cases, mut mismatches, mut at_critical) = (0, 0, 0);
    for _ in 0..200 {
        let tree = random_small_tree(&mut rng);
        let path = prune_path(&tree);
        let critical: Vec<f64> = path.steps().iter().map(|s| s.alpha).collect();
        let top = critical.last().copied().unwrap_or(0.0).max(1e-6);
        for j in 0..20 {
            // Half the temperatures sit exactly on a critical value.
            let alpha = if j % 2 == 0 {
                at_critical += 1;
                critical[rng.gen_range(0..critical.len())]
            } else {
                rng.gen_range(0.0..1.5 * top)
            };
            cases += 1;
            if path.select_subtree(alpha)? != smallest_minimizer(&tree, alpha) {
                mismatches += 1;
            }
        }
    }
    Ok(vec![Assertion::new(
        "pruned subtree equals exhaustive smallest minimiser",
        mismatches == 0,
        format!("{cases} (tree, alpha) pairs, {at_critical} at critical temperatures, {mismatches} mismatches"),
    )])
}

fn criteria() -> Vec<Criterion> {
    // Function pointers cannot capture, so each entry re-derives its seed.
    vec![
        Criterion { id: 1, title: "stump correlation identity", budget: secs(5), run: || outcome(checks::stump_identity(1000, checks::suite_seeds(SEED)[0])?) },
        Criterion { id: 2, title: "split contraction identity", budget: secs(5), run: || outcome(checks::contraction(100, checks::suite_seeds(SEED)[1])?) },
        Criterion { id: 3, title: "depth-K exponential training bound", budget: secs(30), run: || outcome(checks::exponential_bound(100, checks::suite_seeds(SEED)[2])?) },
        Criterion { id: 4, title: "pruning against exhaustive enumeration", budget: secs(60), run: pruning_oracle },
        Criterion { id: 5, title: "optimal split location formula", budget: secs(30), run: || outcome(checks::split_location_formula()?) },
        Criterion {
            id: 6,
            title: "sinusoid closed form and end-cut scaling",
            budget: secs(30),
            run: || {
                let (closed, band) = checks::endcut()?;
                Ok(vec![outcome_assertion(&closed), outcome_assertion(&band)])
            },
        },
        Criterion { id: 7, title: "step-model split separation", budget: secs(60), run: || outcome(checks::step_separation(100, checks::suite_seeds(SEED)[6])?) },
        Criterion { id: 8, title: "stump versus monotone correlation", budget: secs(60), run: || outcome(checks::fact1(100, checks::suite_seeds(SEED)[3])?) },
        Criterion { id: 9, title: "stump versus step-function correlation", budget: secs(30), run: || outcome(checks::stepfn_bound(100, checks::suite_seeds(SEED)[4])?) },
        Criterion {
            id: 10,
            title: "sparse additive correlation inequality",
            budget: secs(30),
            run: || {
                let (plain, signed) = checks::sparse_inequality(50, checks::suite_seeds(SEED)[5])?;
                Ok(vec![outcome_assertion(&plain), outcome_assertion(&signed)])
            },
        },
        Criterion { id: 11, title: "CART versus k-NN sparsity sweep", budget: secs(15 * 60), run: || experiment(ExperimentKind::Fig1aSparsitySweep) },
        Criterion { id: 12, title: "worst-node correlation against d0", budget: secs(10 * 60), run: || experiment(ExperimentKind::Fig1cRhoVsD0) },
        Criterion { id: 13, title: "oracle inequality Monte-Carlo", budget: secs(5 * 60), run: || experiment(ExperimentKind::Theorem1Montecarlo) },
        Criterion { id: 14, title: "level-size training bound", budget: secs(60), run: || outcome(checks::level_bound(50, checks::suite_seeds(SEED)[7])?) },
    ]
}

fn main() -> ExitCode {
    let mut blocking = 0;
    let mut deviations = 0;
    let list = criteria();
    for c in &list {
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= c.budget;
        let timing = format!("{:.2}s of {}s", elapsed.as_secs_f64(), c.budget.as_secs());
        match result {
            Err(e) => {
                blocking += 1;
                println!("FAIL [{:>2}] {}: error: {e} ({timing})", c.id, c.title);
            }
            Ok(assertions) => {
                let failed_hard = assertions.iter().any(Assertion::is_blocking_failure);
                let failed_soft = assertions.iter().any(|a| !a.passed && a.known_deviation.is_some());
                let status = if failed_hard || !in_budget {
                    blocking += 1;
                    "FAIL".to_string()
                } else if failed_soft {
                    deviations += 1;
                    "FAIL (known deviation)".to_string()
                } else {
                    "PASS".to_string()
                };
                println!("{status} [{:>2}] {} ({timing})", c.id, c.title);
                for a in &assertions {
                    println!("        {}", a.status_line());
                }
            }
        }
    }
    println!(
        "acceptance: {} criteria, {} passed, {} known deviations, {} failed",
        list.len(),
        list.len() - blocking - deviations,
        deviations,
        blocking
    );
    if blocking == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
