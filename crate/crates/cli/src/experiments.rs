//! The sparsity sweeps, the oracle-inequality Monte-Carlo and the
//! verification suites, each producing a [`Report`].
//!
//! Replication `r` uses the seed `seed + r`; every random stream inside a
//! replication (training sample, test sample, fold assignment, noise
//! columns) is drawn from a generator seeded with it. Records are sorted
//! before aggregation, so results do not depend on the thread count.

use cart_core::dataset::{augment_noise, generate, load_csv, rng_from_seed, scale_unit_interval};
use cart_core::diagnostics::rho_h;
use cart_core::knn::{cross_validate_k, KnnModel};
use cart_core::population::{endcut_scaling, optimal_split, verify_split_formula, EndcutRow};
use cart_core::pruning::{default_temperature, prune_path, rate_temperature};
use cart_core::tree::grow;
use cart_core::{Dataset, GeneratorSpec, ResponseColumn};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::checks::{self, CheckOutcome, SuiteSizes};
use crate::config::{ExperimentConfig, ExperimentKind, SuiteSize};
use crate::output::{fmt_f64, mean_and_se, Assertion, Report, Table};
use crate::HarnessError;

/// Independent seeds for the random streams of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicationSeeds {
    pub train: u64,
    pub test: u64,
    pub folds: u64,
    pub noise: u64,
}

pub fn replication_seeds(seed: u64, replication: usize) -> ReplicationSeeds {
    let mut rng = rng_from_seed(seed.wrapping_add(replication as u64));
    ReplicationSeeds { train: rng.gen(), test: rng.gen(), folds: rng.gen(), noise: rng.gen() }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::Fig1aSparsitySweep => run_fig1a(cfg),
        ExperimentKind::Fig1bBostonSweep => run_fig1b(cfg),
        ExperimentKind::Fig1cRhoVsD0 => run_fig1c(cfg),
        ExperimentKind::Theorem1Montecarlo => run_theorem1_montecarlo(cfg),
        ExperimentKind::PopulationSuite => run_population_suite(),
        ExperimentKind::IdentitySuite => run_identity_suite(cfg),
    }
}

/// Test errors of pruned CART and cross-validated k-NN for one train/test pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub cart_mse: f64,
    pub knn_mse: f64,
    pub leaves: usize,
    pub alpha: f64,
    pub k: usize,
}

pub fn compare_cart_knn(
    train: &Dataset,
    test: &Dataset,
    cfg: &ExperimentConfig,
    fold_seed: u64,
) -> Result<Comparison, HarnessError> {
    let n = train.n_samples();
    let tree = grow(train, cfg.depth_for(n));
    let path = prune_path(&tree);
    let alpha = rate_temperature(n, train.n_features(), cfg.alpha_scale)?;
    let pruned = path.select_subtree(alpha)?;
    let cv = cross_validate_k(train, &cfg.k_grid, cfg.folds, fold_seed)?;
    let knn = KnnModel::new(train, cv.best_k)?;
    Ok(Comparison {
        cart_mse: pruned.test_error(test)?,
        knn_mse: knn.test_error(test)?,
        leaves: pruned.n_leaves(),
        alpha,
        k: cv.best_k,
    })
}

fn sweep_tables(prefix: &str, records: &[(usize, usize, Comparison)]) -> (Table, Table, Vec<(usize, f64, f64)>) {
    let mut reps = Table::new(&format!("{prefix}_replications"), &["d", "replication", "cart_mse", "knn_mse", "leaves", "alpha", "k"]);
    for (d, r, c) in records {
        reps.push(vec![
            d.to_string(),
            r.to_string(),
            fmt_f64(c.cart_mse),
            fmt_f64(c.knn_mse),
            c.leaves.to_string(),
            fmt_f64(c.alpha),
            c.k.to_string(),
        ]);
    }
    let mut summary = Table::new(
        &format!("{prefix}_summary"),
        &["d", "replications", "cart_mse_mean", "cart_mse_se", "knn_mse_mean", "knn_mse_se", "leaves_mean", "k_mean"],
    );
    let mut means = Vec::new();
    let mut ds: Vec<usize> = records.iter().map(|r| r.0).collect();
    ds.dedup();
    for d in ds {
        let group: Vec<&Comparison> = records.iter().filter(|r| r.0 == d).map(|r| &r.2).collect();
        let (cm, cse) = mean_and_se(&group.iter().map(|c| c.cart_mse).collect::<Vec<_>>());
        let (km, kse) = mean_and_se(&group.iter().map(|c| c.knn_mse).collect::<Vec<_>>());
        let (lm, _) = mean_and_se(&group.iter().map(|c| c.leaves as f64).collect::<Vec<_>>());
        let (kk, _) = mean_and_se(&group.iter().map(|c| c.k as f64).collect::<Vec<_>>());
        summary.push(vec![
            d.to_string(),
            group.len().to_string(),
            fmt_f64(cm),
            fmt_f64(cse),
            fmt_f64(km),
            fmt_f64(kse),
            fmt_f64(lm),
            fmt_f64(kk),
        ]);
        means.push((d, cm, km));
    }
    (reps, summary, means)
}

/// Prediction error of pruned CART and k-NN on sparse-quadratic data as the
/// ambient dimension grows with the sparsity fixed.
pub fn run_fig1a(cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> =
        cfg.d_range.iter().flat_map(|&d| (0..cfg.replications).map(move |r| (d, r))).collect();
    let mut records = jobs
        .par_iter()
        .map(|&(d, r)| {
            let seeds = replication_seeds(cfg.seed, r);
            let train = generate(&GeneratorSpec::sparse_quadratic(cfg.n, d, cfg.d0, seeds.train))?;
            let test = generate(&GeneratorSpec::sparse_quadratic(cfg.test_n, d, cfg.d0, seeds.test))?;
            Ok((d, r, compare_cart_knn(&train, &test, cfg, seeds.folds)?))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    records.sort_by_key(|r| (r.0, r.1));
    let (reps, summary, means) = sweep_tables("fig1a", &records);
    let (d_lo, cart_lo, _) = *means.iter().min_by_key(|m| m.0).expect("non-empty sweep");
    let (d_hi, cart_hi, knn_hi) = *means.iter().max_by_key(|m| m.0).expect("non-empty sweep");
    let assertions = vec![
        Assertion::new(
            "CART error stable in d",
            cart_hi <= 2.0 * cart_lo,
            format!("mean CART MSE {cart_hi:.5} at d={d_hi} vs {cart_lo:.5} at d={d_lo} (limit 2x)"),
        ),
        Assertion::new(
            "k-NN worse than CART at largest d",
            knn_hi > cart_hi,
            format!("mean k-NN MSE {knn_hi:.5} vs CART {cart_hi:.5} at d={d_hi}"),
        ),
    ];
    Ok(Report { tables: vec![reps, summary], assertions })
}

/// The same comparison on a user-supplied real dataset, scaled to the unit
/// cube and padded with uniform noise columns up to each `d`.
pub fn run_fig1b(cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    cfg.validate()?;
    let path = cfg.boston_csv.as_ref().expect("validated");
    let raw = load_csv(path, &ResponseColumn::Name(cfg.boston_response.clone()))?;
    let base = scale_unit_interval(&raw);
    let d_orig = base.n_features();
    if let Some(&d) = cfg.d_range.iter().find(|&&d| d < d_orig) {
        return Err(HarnessError::Config(format!("d = {d} is below the {d_orig} columns of {}", path.display())));
    }
    let n = base.n_samples();
    let n_test = ((n as f64) * cfg.test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(HarnessError::Config(format!("test_fraction {} leaves an empty part of {n} rows", cfg.test_fraction)));
    }
    let jobs: Vec<(usize, usize)> =
        cfg.d_range.iter().flat_map(|&d| (0..cfg.replications).map(move |r| (d, r))).collect();
    let mut records = jobs
        .par_iter()
        .map(|&(d, r)| {
            let seeds = replication_seeds(cfg.seed, r);
            let full = augment_noise(&base, d - d_orig, seeds.noise);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng_from_seed(seeds.test));
            let (test_rows, train_rows) = order.split_at(n_test);
            let train = full.subset(train_rows);
            let test = full.subset(test_rows);
            if cfg.d_range.iter().any(|&d| d >= train.n_samples()) {
                return Err(HarnessError::Config("every d must be below the training size".into()));
            }
            Ok((d, r, compare_cart_knn(&train, &test, cfg, seeds.folds)?))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    records.sort_by_key(|r| (r.0, r.1));
    let (reps, summary, _) = sweep_tables("fig1b", &records);
    Ok(Report { tables: vec![reps, summary], assertions: Vec::new() })
}

/// Squared minimum split correlation of the pruned tree as the sparsity grows.
pub fn run_fig1c(cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    cfg.validate()?;
    let mut d0s = cfg.d0_range.clone();
    d0s.sort_unstable();
    d0s.dedup();
    let jobs: Vec<(usize, usize)> = d0s.iter().flat_map(|&k| (0..cfg.replications).map(move |r| (k, r))).collect();
    let alpha = rate_temperature(cfg.n, cfg.d, cfg.alpha_scale)?;
    let mut records = jobs
        .par_iter()
        .map(|&(d0, r)| {
            let seeds = replication_seeds(cfg.seed, r);
            let train = generate(&GeneratorSpec::sparse_quadratic(cfg.n, cfg.d, d0, seeds.train))?;
            let tree = grow(&train, cfg.depth_for(cfg.n));
            let pruned = prune_path(&tree).select_subtree(alpha)?;
            // A root-only pruned tree has no split correlation.
            let rho2 = rho_h(&pruned).map(|r| r * r).unwrap_or(f64::NAN);
            Ok((d0, r, rho2, pruned.n_leaves()))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    records.sort_by_key(|r| (r.0, r.1));
    let mut reps = Table::new("fig1c_replications", &["d0", "replication", "rho_h_squared", "leaves"]);
    for &(d0, r, rho2, leaves) in &records {
        reps.push(vec![d0.to_string(), r.to_string(), fmt_f64(rho2), leaves.to_string()]);
    }
    let mut summary = Table::new(
        "fig1c_summary",
        &["d0", "defined", "rho_h_squared_mean", "rho_h_squared_se", "rho_h_squared_times_d0", "alpha"],
    );
    let mut stats = Vec::new();
    for &d0 in &d0s {
        let vals: Vec<f64> = records.iter().filter(|r| r.0 == d0 && r.2.is_finite()).map(|r| r.2).collect();
        let (m, se) = mean_and_se(&vals);
        summary.push(vec![
            d0.to_string(),
            vals.len().to_string(),
            fmt_f64(m),
            fmt_f64(se),
            fmt_f64(m * d0 as f64),
            fmt_f64(alpha),
        ]);
        stats.push((d0, m, se));
    }
    let mut monotone = true;
    let mut worst_rise = f64::NEG_INFINITY;
    for w in stats.windows(2) {
        let rise = w[1].1 - w[0].1;
        let allowance = (w[0].2 * w[0].2 + w[1].2 * w[1].2).sqrt();
        worst_rise = worst_rise.max(rise - allowance);
        if !(rise <= allowance) {
            monotone = false;
        }
    }
    let (d0_min, m_min, _) = stats[0];
    let floor = 0.2 * m_min * d0_min as f64;
    let lowest = stats.iter().map(|s| s.1 * s.0 as f64).fold(f64::INFINITY, f64::min);
    let slope = log_log_slope(&stats.iter().map(|s| (s.0 as f64, s.1)).collect::<Vec<_>>());
    let assertions = vec![
        Assertion::new(
            "rho_H^2 non-increasing in d0",
            monotone,
            format!("largest rise beyond one standard error {worst_rise:.3e}; log-log slope {slope:.3} (reference -1)"),
        ),
        Assertion::new(
            "rho_H^2 * d0 bounded below",
            lowest >= floor && lowest.is_finite(),
            format!("min rho_H^2*d0 = {lowest:.4}, floor 0.2 x {:.4} = {floor:.4}", m_min * d0_min as f64),
        ),
    ];
    Ok(Report { tables: vec![reps, summary], assertions })
}

/// Least-squares slope of `ln y` against `ln x` over finite positive points.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0 && p.1.is_finite()).map(|p| (p.0.ln(), p.1.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Additive term `54 B^2 ln(2/delta) / n` of the oracle inequality.
pub fn oracle_additive_term(bound: f64, delta: f64, n: usize) -> f64 {
    54.0 * bound * bound * (2.0 / delta).ln() / n as f64
}

/// Monte-Carlo frequency of violations of the oracle inequality for pruned
/// CART on a noiseless model `Y = X_1^2`.
pub fn run_theorem1_montecarlo(cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    cfg.validate()?;
    let bound = cfg.response_bound;
    let alpha = default_temperature(cfg.n, cfg.d, bound, cfg.alpha_scale)?;
    let additive = oracle_additive_term(bound, cfg.delta, cfg.n);
    let mut records = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let seeds = replication_seeds(cfg.seed, r);
            let train = generate(&GeneratorSpec::sparse_quadratic(cfg.n, cfg.d, 1, seeds.train))?;
            let test = generate(&GeneratorSpec::sparse_quadratic(cfg.test_n, cfg.d, 1, seeds.test))?;
            if train.response().iter().any(|y| y.abs() > bound) {
                return Err(HarnessError::Config(format!("response exceeds response_bound = {bound}")));
            }
            let path = prune_path(&grow(&train, cfg.depth_for(cfg.n)));
            let chosen = path.select_subtree(alpha)?;
            let err = chosen.test_error(&test)?;
            let min_cost = path.min_cost(alpha);
            let rhs = 4.0 * min_cost + additive;
            Ok((r, err, min_cost, rhs, chosen.n_leaves()))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    records.sort_by_key(|r| r.0);
    let mut reps = Table::new("theorem1_replications", &["replication", "test_error", "min_penalized_cost", "bound", "violated", "leaves"]);
    let mut violations = 0usize;
    for &(r, err, min_cost, rhs, leaves) in &records {
        let violated = err > rhs;
        violations += usize::from(violated);
        reps.push(vec![r.to_string(), fmt_f64(err), fmt_f64(min_cost), fmt_f64(rhs), violated.to_string(), leaves.to_string()]);
    }
    let reps_f = cfg.replications as f64;
    let freq = violations as f64 / reps_f;
    let threshold = cfg.delta + 2.0 * (cfg.delta * (1.0 - cfg.delta) / reps_f).sqrt();
    let binding = cfg.delta < 1.0;
    let mut summary = Table::new(
        "theorem1_summary",
        &["n", "d", "alpha", "delta", "additive_term", "additive_term_2n", "violations", "frequency", "threshold", "binding"],
    );
    summary.push(vec![
        cfg.n.to_string(),
        cfg.d.to_string(),
        fmt_f64(alpha),
        fmt_f64(cfg.delta),
        fmt_f64(additive),
        fmt_f64(oracle_additive_term(bound, cfg.delta, 2 * cfg.n)),
        violations.to_string(),
        fmt_f64(freq),
        fmt_f64(threshold),
        binding.to_string(),
    ]);
    let assertion = if binding {
        Assertion::new(
            "oracle inequality violation frequency",
            freq <= threshold,
            format!("{violations}/{} violations, frequency {freq:.4} <= {threshold:.4}", cfg.replications),
        )
    } else {
        Assertion::new("oracle inequality violation frequency", true, "delta = 1: the bound is non-binding")
    };
    Ok(Report { tables: vec![reps, summary], assertions: vec![assertion] })
}

fn endcut_table(rows: &[EndcutRow]) -> Table {
    let mut t = Table::new("endcut_scaling", &["w", "s_star", "rho", "s_star_times_w", "rho_times_sqrt_w"]);
    for r in rows {
        t.push(vec![
            r.frequency.to_string(),
            fmt_f64(r.s_star),
            fmt_f64(r.rho),
            fmt_f64(r.s_star_times_w),
            fmt_f64(r.rho_times_sqrt_w),
        ]);
    }
    t
}

pub fn outcome_assertion(o: &CheckOutcome) -> Assertion {
    let detail = format!(
        "{} cases, {} violations, worst {:.3e}{}",
        o.cases,
        o.violations,
        o.worst,
        if o.note.is_empty() { String::new() } else { format!(" ({})", o.note) }
    );
    let a = Assertion::new(o.name.clone(), o.passed(), detail);
    match &o.known_deviation {
        Some(reason) => a.with_known_deviation(reason.clone()),
        None => a,
    }
}

/// Optimal population splits, the split-location formula and the end-cut
/// scaling of sinusoids.
pub fn run_population_suite() -> Result<Report, HarnessError> {
    let mut splits = Table::new(
        "population_splits",
        &["model", "a", "b", "s_star", "decrease", "variance", "rho", "v", "formula_low", "formula_high", "location_error", "probability_error"],
    );
    for model in checks::population_models()? {
        for (a, b) in checks::SUBINTERVALS {
            let opt = optimal_split(&model, a, b, 1e-8)?;
            for &s in &opt.maximizers {
                let c = verify_split_formula(&model, a, b, s)?;
                splits.push(vec![
                    model.description().to_string(),
                    fmt_f64(a),
                    fmt_f64(b),
                    fmt_f64(s),
                    fmt_f64(opt.decrease),
                    fmt_f64(opt.variance),
                    fmt_f64(opt.rho),
                    fmt_f64(c.v),
                    fmt_f64(c.formula.0),
                    fmt_f64(c.formula.1),
                    fmt_f64(c.location_error),
                    fmt_f64(c.probability_error),
                ]);
            }
        }
    }
    let rows = endcut_scaling(&[1, 2, 4, 8, 16, 32])?;
    let formula = checks::split_location_formula()?;
    let (closed, band) = checks::endcut()?;
    Ok(Report {
        tables: vec![splits, endcut_table(&rows)],
        assertions: vec![outcome_assertion(&formula), outcome_assertion(&closed), outcome_assertion(&band)],
    })
}

/// Every identity and inequality suite.
pub fn run_identity_suite(cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    let sizes = match cfg.suite {
        SuiteSize::Full => SuiteSizes::full(),
        SuiteSize::Smoke => SuiteSizes::smoke(),
    };
    let outcomes = checks::run_all(&sizes, cfg.seed)?;
    let mut table = Table::new("identity_suite", &["check", "cases", "violations", "worst", "passed", "note"]);
    for o in &outcomes {
        table.push(vec![
            o.name.clone(),
            o.cases.to_string(),
            o.violations.to_string(),
            fmt_f64(o.worst),
            o.passed().to_string(),
            o.note.clone(),
        ]);
    }
    Ok(Report { tables: vec![table], assertions: outcomes.iter().map(outcome_assertion).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replication_seeds_differ_and_repeat() {
        assert_eq!(replication_seeds(5, 2), replication_seeds(6, 1));
        let a = replication_seeds(5, 0);
        assert_ne!(a.train, a.test);
        assert_ne!(replication_seeds(5, 0), replication_seeds(5, 1));
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x| (x, 3.0 / x)).collect();
        assert!((log_log_slope(&pts) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn additive_term_halves_with_doubled_n() {
        let a = oracle_additive_term(1.0, 0.05, 50);
        assert!((oracle_additive_term(1.0, 0.05, 100) - a / 2.0).abs() < 1e-15);
    }
}
