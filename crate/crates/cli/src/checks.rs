//! Verification suites for the identities and inequalities satisfied by
//! grown trees, their split correlations and the population split formulas.
//!
//! Each suite draws its cases from a seeded stream and reports how many
//! cases it examined, how many failed and the worst residual or margin.

use cart_core::dataset::{rng_from_seed, ExperimentRng};
use cart_core::diagnostics::{
    assumption_profile, check_fact1, check_level_training_bound, check_sparse_inequality, check_step_separation,
    check_stepfn_bound, contraction_residuals, exponential_training_bound, rho_m, stump_correlation, LevelBound,
};
use cart_core::population::{
    endcut_outside_band, endcut_scaling, optimal_split, population_decrease, sinusoid_decrease_closed_form,
    verify_split_formula, PopulationModel,
};
use cart_core::tree::{grow, impurity_decrease, node_impurity};
use cart_core::{Dataset, GeneratorKind, Result};
use rand::Rng;
use serde::Serialize;

use crate::models::{default_depth, occupied_step_additive, random_step_function, sparse_quadratic_with_noise, suite_dataset};

/// Relative tolerance of the exact identities.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Absolute tolerance of the split-location formula.
pub const FORMULA_TOL: f64 = 1e-6;
/// Absolute tolerance of the sinusoid closed form.
pub const CLOSED_FORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub cases: usize,
    pub violations: usize,
    /// Largest residual for identities; smallest margin `lhs - rhs` for bounds.
    pub worst: f64,
    pub note: String,
    /// Why a failure is expected, when every violation falls in a case the
    /// statement is known not to cover.
    pub known_deviation: Option<String>,
}

impl CheckOutcome {
    fn new(name: &str) -> Self {
        Self { name: name.to_string(), cases: 0, violations: 0, worst: f64::NAN, note: String::new(), known_deviation: None }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.cases > 0
    }

    fn residual(&mut self, value: f64, tol: f64) {
        self.cases += 1;
        self.worst = if self.worst.is_nan() { value } else { self.worst.max(value) };
        if !(value <= tol) {
            self.violations += 1;
        }
    }

    fn margin(&mut self, margin: f64, holds: bool) {
        self.cases += 1;
        self.worst = if self.worst.is_nan() { margin } else { self.worst.min(margin) };
        if !holds {
            self.violations += 1;
        }
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Sizes of the suites. [`SuiteSizes::full`] matches the published
/// acceptance counts; [`SuiteSizes::smoke`] is a quick subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuiteSizes {
    pub identity_pairs: usize,
    pub contraction_datasets: usize,
    pub exponential_datasets: usize,
    pub separation_models: usize,
    pub fact1_datasets: usize,
    pub stepfn_nodes: usize,
    pub sparse_datasets: usize,
    pub level_datasets: usize,
}

impl SuiteSizes {
    pub fn full() -> Self {
        Self {
            identity_pairs: 1000,
            contraction_datasets: 100,
            exponential_datasets: 100,
            separation_models: 100,
            fact1_datasets: 100,
            stepfn_nodes: 100,
            sparse_datasets: 50,
            level_datasets: 50,
        }
    }

    pub fn smoke() -> Self {
        Self {
            identity_pairs: 100,
            contraction_datasets: 10,
            exponential_datasets: 10,
            separation_models: 10,
            fact1_datasets: 10,
            stepfn_nodes: 20,
            sparse_datasets: 10,
            level_datasets: 10,
        }
    }
}

/// Squared Pearson correlation of a random stump with the node's responses
/// against the ratio of impurity decrease to node impurity.
pub fn stump_identity(pairs: usize, seed: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("stump correlation identity");
    let mut rng = rng_from_seed(seed);
    while out.cases < pairs {
        let ds = suite_dataset(&mut rng, 500, 10, true)?;
        let keep = rng.gen_range(0.2..=1.0);
        let rows: Vec<usize> = (0..ds.n_samples()).filter(|_| rng.gen_bool(keep)).collect();
        let j = rng.gen_range(0..ds.n_features());
        let mut xs: Vec<f64> = rows.iter().map(|&i| ds.x(i, j)).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let y: Vec<f64> = rows.iter().map(|&i| ds.y(i)).collect();
        if xs.len() < 2 || node_impurity(&y)? == 0.0 {
            continue;
        }
        let k = rng.gen_range(0..xs.len() - 1);
        let s = xs[k] + rng.gen::<f64>() * (xs[k + 1] - xs[k]);
        let s = if s >= xs[k + 1] { xs[k] } else { s };
        let rho = stump_correlation(&ds, &rows, j, s)?;
        let ratio = impurity_decrease(&ds, &rows, j, s)? / node_impurity(&y)?;
        out.residual(rel_diff(rho * rho, ratio), IDENTITY_TOL);
    }
    Ok(out)
}

/// Grows a depth-`ceil(log2 n)` tree on each suite dataset.
fn suite_trees(count: usize, seed: u64, max_n: usize, max_d: usize) -> Result<Vec<(Dataset, cart_core::Tree)>> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| {
            let ds = suite_dataset(&mut rng, max_n, max_d, true)?;
            let tree = grow(&ds, default_depth(ds.n_samples()));
            Ok((ds, tree))
        })
        .collect()
}

/// Daughters' summed squared error equals the parent's times `1 - rho^2`.
pub fn contraction(datasets: usize, seed: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("split contraction identity");
    for (ds, tree) in suite_trees(datasets, seed, 400, 8)? {
        for (_, r) in contraction_residuals(&tree, &ds)? {
            out.residual(r, IDENTITY_TOL);
        }
    }
    Ok(out)
}

/// `err(T_K) <= variance * exp(-K rho_H^2)` for every depth limit up to
/// `ceil(log2 n)`.
///
/// The bound needs every impure node above depth `K` to be splittable, which
/// holds almost surely for continuous covariates but not when a node's
/// points share all coordinates. The datasets therefore have untied
/// covariates.
pub fn exponential_bound(datasets: usize, seed: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("depth-K exponential training bound");
    let mut rng = rng_from_seed(seed);
    for _ in 0..datasets {
        let ds = loop {
            let ds = suite_dataset(&mut rng, 400, 8, false)?;
            if ds.response_variance() > 0.0 {
                break ds;
            }
        };
        for k in 1..=default_depth(ds.n_samples()) {
            let tree = grow(&ds, k);
            if tree.n_leaves() == 1 {
                // No split was possible; the bound has no minimum correlation.
                continue;
            }
            let check = exponential_training_bound(&tree, &ds)?;
            out.margin(check.margin(), check.holds());
        }
    }
    Ok(out)
}

/// Best stump versus best monotone fit, per node and feature.
pub fn fact1(datasets: usize, seed: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("stump versus monotone correlation");
    for (ds, tree) in suite_trees(datasets, seed, 300, 6)? {
        for check in check_fact1(&tree, &ds) {
            out.margin(check.margin(), check.holds());
        }
    }
    Ok(out)
}

/// Best stump versus an arbitrary registered step function of the same
/// coordinate, on synthetic nodes.
pub fn stepfn_bound(nodes: usize, seed: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("stump versus step-function correlation");
    let mut rng = rng_from_seed(seed);
    let mut stationary_seen = [0usize; 3];
    while out.cases < nodes {
        let pieces = rng.gen_range(2..=8);
        let g = random_step_function(&mut rng, pieces, 0.02);
        let (a, b) = {
            let u: f64 = rng.gen_range(0.0..0.5);
            (u, u + rng.gen_range(0.3..=(1.0 - u)))
        };
        let n = rng.gen_range(10..=400);
        let noise = [0.0, 0.1, 0.5, 2.0][rng.gen_range(0..4)];
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(a..b), rng.gen::<f64>()]).collect();
        let y: Vec<f64> = rows.iter().map(|r| g.eval(r[0]) + 0.3 * r[1] + noise * (rng.gen::<f64>() - 0.5)).collect();
        let ds = Dataset::from_rows(&rows, y)?;
        let all: Vec<usize> = (0..n).collect();
        let (check, shape) = check_stepfn_bound(&ds, &all, 0, &g);
        if shape.stationary > 2 || shape.pieces > 8 {
            continue;
        }
        stationary_seen[shape.stationary] += 1;
        out.margin(check.margin(), check.holds());
    }
    out.note = format!(
        "nodes with 0/1/2 stationary pieces: {}/{}/{}",
        stationary_seen[0], stationary_seen[1], stationary_seen[2]
    );
    Ok(out)
}

/// The sparse-additive inequality at the root of sparse-quadratic data.
///
/// The unsigned form is only guaranteed when every pair of components is
/// non-negatively correlated in the node, so it is asserted on those cases
/// (`d0 <= 8`) and merely counted on the others. The sign-enumeration form
/// holds unconditionally and is asserted on every case (`d0 <= 10`).
pub fn sparse_inequality(datasets: usize, seed: u64) -> Result<(CheckOutcome, CheckOutcome)> {
    let mut plain = CheckOutcome::new("sparse inequality, unsigned sum");
    let mut signed = CheckOutcome::new("sparse inequality, sign enumeration");
    let mut rng = rng_from_seed(seed);
    let (mut outside, mut outside_failing) = (0, 0);
    let components_of = |ds: &Dataset, d0: usize| -> Vec<Vec<f64>> {
        (0..d0)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                (0..ds.n_samples()).map(|i| sign * ds.x(i, j) * ds.x(i, j)).collect()
            })
            .collect()
    };
    for case in 0..datasets {
        let d0 = 1 + case % 8;
        let ds = sparse_quadratic_with_noise(rng.gen_range(100..=1000), d0, rng.gen_range(0..=10), rng.gen())?;
        let check = check_sparse_inequality(&components_of(&ds, d0), ds.response())?;
        if check.pairwise_nonnegative {
            plain.margin(check.max_component_rho2 - check.plain_rhs, check.plain_holds());
        } else {
            outside += 1;
            outside_failing += usize::from(!check.plain_holds());
        }
    }
    for case in 0..datasets {
        let d0 = 1 + case % 10;
        let ds = sparse_quadratic_with_noise(rng.gen_range(100..=1000), d0, rng.gen_range(0..=10), rng.gen())?;
        let check = check_sparse_inequality(&components_of(&ds, d0), ds.response())?;
        signed.margin(check.max_component_rho2 - check.signed_rhs, check.signed_holds());
    }
    plain.note = format!(
        "{outside} of {datasets} datasets have a negatively correlated component pair; the unsigned form fails on {outside_failing} of them"
    );
    Ok((plain, signed))
}

/// Level-size training bound with the measured constant `A`
/// (exponent 1), at every depth limit.
pub fn level_bound(datasets: usize, seed: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("level-size training bound");
    let mut rng = rng_from_seed(seed);
    let mut skipped = 0;
    for _ in 0..datasets {
        let d0 = rng.gen_range(1..=8);
        let n = rng.gen_range(200..=1000);
        let extra = rng.gen_range(0..=12);
        let ds = sparse_quadratic_with_noise(n, d0, extra, rng.gen())?;
        let variance = ds.response_variance();
        for k in 1..=default_depth(n) {
            let tree = grow(&ds, k);
            let profile = assumption_profile(&tree, 1.0)?;
            let rho = rho_m(&tree, &ds)?;
            match check_level_training_bound(&tree, variance, rho, &profile) {
                LevelBound::NotApplicable { .. } => skipped += 1,
                LevelBound::Checked(check) => out.margin(check.margin(), check.holds()),
            }
        }
    }
    out.note = format!("{skipped} trees outside the precondition");
    Ok(out)
}

/// Splits of fully grown trees on step-additive data separate constant
/// pieces, the trees interpolate and have at least one leaf per cell.
///
/// The separation argument assumes the response is constant on each piece
/// of the split coordinate inside the node, which only holds for a single
/// component. With two or more components the other coordinates vary inside
/// a piece and an interior split can win by a small margin. Failures
/// confined to such models are flagged as a known deviation.
pub fn step_separation(models: usize, seed: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("step-model split separation");
    let mut rng = rng_from_seed(seed);
    // Per component count: models, models with a non-separating split, such splits.
    let mut by_d0 = [(0usize, 0usize, 0usize); 4];
    let mut bad_fits = 0;
    for _ in 0..models {
        let extra = rng.gen_range(0..=3);
        let (spec, ds) = occupied_step_additive(&mut rng, 500, extra, 12);
        let GeneratorKind::StepAdditive { components } = &spec.kind else { unreachable!() };
        let v = spec.step_piece_count().expect("step model");
        let tree = grow(&ds, ds.n_samples());
        let violations = check_step_separation(&tree, &ds, components).len();
        let fit_ok = tree.training_error() == 0.0 && tree.n_leaves() >= v;
        let slot = &mut by_d0[spec.d0.min(3)];
        slot.0 += 1;
        slot.1 += usize::from(violations > 0);
        slot.2 += violations;
        bad_fits += usize::from(!fit_ok);
        out.margin(-(violations as f64) - f64::from(u8::from(!fit_ok)), violations == 0 && fit_ok);
    }
    let parts: Vec<String> = (1..=3)
        .filter(|&k| by_d0[k].0 > 0)
        .map(|k| format!("d0={k}: {}/{} models with {} non-separating splits", by_d0[k].1, by_d0[k].0, by_d0[k].2))
        .collect();
    out.note = format!("{}; {bad_fits} trees without an exact fit", parts.join(", "));
    if out.violations > 0 && bad_fits == 0 && by_d0[1].1 == 0 {
        out.known_deviation =
            Some("interior splits win only on multi-component models, where the separation argument does not apply".into());
    }
    Ok(out)
}

/// The named regression functions used by the population checks.
pub fn population_models() -> Result<Vec<PopulationModel>> {
    Ok(vec![
        PopulationModel::linear(),
        PopulationModel::quadratic(),
        PopulationModel::cubic_minus_linear(),
        PopulationModel::sinusoid(4)?,
        PopulationModel::sinusoid(8)?,
        PopulationModel::sinusoid(16)?,
    ])
}

pub const SUBINTERVALS: [(f64, f64); 4] = [(0.0, 1.0), (0.25, 0.75), (0.1, 0.6), (0.3, 0.9)];

/// The split-location formula and its probability form at every global
/// maximiser, for each model and node interval.
pub fn split_location_formula() -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("optimal split location formula");
    for model in population_models()? {
        for (a, b) in SUBINTERVALS {
            let opt = optimal_split(&model, a, b, 1e-8)?;
            for &s in &opt.maximizers {
                let check = verify_split_formula(&model, a, b, s)?;
                out.residual(check.location_error.max(check.probability_error), FORMULA_TOL);
            }
        }
    }
    Ok(out)
}

/// Sinusoid decrease against its closed form, and the scaling of the
/// optimal split and its correlation with frequency.
pub fn endcut() -> Result<(CheckOutcome, CheckOutcome)> {
    let freqs = [4u32, 8, 16, 32];
    let mut closed = CheckOutcome::new("sinusoid closed form");
    for &w in &freqs {
        let model = PopulationModel::sinusoid(w)?;
        for k in 1..1000 {
            let s = k as f64 / 1000.0;
            let got = population_decrease(&model, 0.0, 1.0, s)?;
            closed.residual((got - sinusoid_decrease_closed_form(w, s)).abs(), CLOSED_FORM_TOL);
        }
    }
    let rows = endcut_scaling(&freqs)?;
    let outside = endcut_outside_band(&rows, 4, 0.5)?;
    let mut band = CheckOutcome::new("end-cut scaling band");
    band.cases = rows.len();
    band.violations = outside.len();
    band.worst = rows
        .iter()
        .map(|r| (r.s_star_times_w / rows[0].s_star_times_w - 1.0).abs().max((r.rho_times_sqrt_w / rows[0].rho_times_sqrt_w - 1.0).abs()))
        .fold(0.0, f64::max);
    band.note = rows
        .iter()
        .map(|r| format!("w={}: s*w={:.4} rho*sqrt(w)={:.4}", r.frequency, r.s_star_times_w, r.rho_times_sqrt_w))
        .collect::<Vec<_>>()
        .join("; ");
    Ok((closed, band))
}

/// Per-suite seeds in `run_all` order: identity, contraction, exponential,
/// monotone, step-function, sparse, separation, level.
pub fn suite_seeds(seed: u64) -> [u64; 8] {
    let mut rng: ExperimentRng = rng_from_seed(seed);
    std::array::from_fn(|_| rng.gen())
}

/// Runs every suite in a fixed order with seeds derived from `seed`.
pub fn run_all(sizes: &SuiteSizes, seed: u64) -> Result<Vec<CheckOutcome>> {
    let seeds = suite_seeds(seed);
    let mut out = vec![
        stump_identity(sizes.identity_pairs, seeds[0])?,
        contraction(sizes.contraction_datasets, seeds[1])?,
        exponential_bound(sizes.exponential_datasets, seeds[2])?,
        fact1(sizes.fact1_datasets, seeds[3])?,
        stepfn_bound(sizes.stepfn_nodes, seeds[4])?,
    ];
    let (plain, signed) = sparse_inequality(sizes.sparse_datasets, seeds[5])?;
    out.push(plain);
    out.push(signed);
    out.push(step_separation(sizes.separation_models, seeds[6])?);
    out.push(level_bound(sizes.level_datasets, seeds[7])?);
    out.push(split_location_formula()?);
    let (closed, band) = endcut()?;
    out.push(closed);
    out.push(band);
    Ok(out)
}
