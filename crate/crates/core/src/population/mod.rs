//! Infinite-sample split analysis for `Y = g(X)` with `X` uniform on a node
//! interval `[a, b]`.
//!
//! All quantities are integrals of `g` and `g^2` over sub-intervals. Models
//! built from the named constructors carry closed-form primitives; anything
//! else falls back to adaptive Gauss–Kronrod quadrature.

mod optimize;
mod quadrature;

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};

pub use optimize::{golden_section_max, grid_maxima};
pub use quadrature::integrate;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Absolute tolerance used for moment integrals.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Grid resolution of the global split search.
pub const SPLIT_GRID: usize = 10_000;

#[derive(Clone)]
pub struct PopulationModel {
    g: ScalarFn,
    /// Antiderivative of `g`.
    primitive: Option<ScalarFn>,
    /// Antiderivative of `g^2`.
    primitive_sq: Option<ScalarFn>,
    description: String,
}

impl fmt::Debug for PopulationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PopulationModel")
            .field("description", &self.description)
            .field("closed_form", &self.has_closed_form())
            .finish()
    }
}

fn arc(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(f)
}

impl PopulationModel {
    /// A model integrated by quadrature only.
    pub fn custom(description: impl Into<String>, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { g: arc(g), primitive: None, primitive_sq: None, description: description.into() }
    }

    /// A model with closed-form antiderivatives of `g` and `g^2`.
    pub fn with_primitives(
        description: impl Into<String>,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        primitive: impl Fn(f64) -> f64 + Send + Sync + 'static,
        primitive_sq: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { g: arc(g), primitive: Some(arc(primitive)), primitive_sq: Some(arc(primitive_sq)), description: description.into() }
    }

    pub fn linear() -> Self {
        Self::with_primitives("x", |x| x, |x| x * x / 2.0, |x| x.powi(3) / 3.0)
    }

    pub fn quadratic() -> Self {
        Self::with_primitives("x^2", |x| x * x, |x| x.powi(3) / 3.0, |x| x.powi(5) / 5.0)
    }

    pub fn cubic_minus_linear() -> Self {
        Self::with_primitives(
            "x^3 - x",
            |x| x.powi(3) - x,
            |x| x.powi(4) / 4.0 - x * x / 2.0,
            |x| x.powi(7) / 7.0 - 2.0 * x.powi(5) / 5.0 + x.powi(3) / 3.0,
        )
    }

    /// `sin(2 pi w x)`.
    pub fn sinusoid(frequency: u32) -> Result<Self> {
        if frequency == 0 {
            return Err(Error::validation("sinusoid frequency must be a positive integer"));
        }
        let w = f64::from(frequency);
        Ok(Self::with_primitives(
            format!("sin(2 pi {frequency} x)"),
            move |x| (2.0 * PI * w * x).sin(),
            move |x| -(2.0 * PI * w * x).cos() / (2.0 * PI * w),
            move |x| x / 2.0 - (4.0 * PI * w * x).sin() / (8.0 * PI * w),
        ))
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn has_closed_form(&self) -> bool {
        self.primitive.is_some() && self.primitive_sq.is_some()
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.g)(x)
    }

    /// Copy of the model that ignores its closed forms.
    pub fn quadrature_only(&self) -> Self {
        Self { g: self.g.clone(), primitive: None, primitive_sq: None, description: self.description.clone() }
    }

    /// `(integral of g, integral of g^2)` over `[lo, hi]`.
    pub fn moments(&self, lo: f64, hi: f64) -> (f64, f64) {
        let first = match &self.primitive {
            Some(p) => p(hi) - p(lo),
            None => integrate(|x| (self.g)(x), lo, hi, QUADRATURE_TOL),
        };
        let second = match &self.primitive_sq {
            Some(p) => p(hi) - p(lo),
            None => integrate(
                |x| {
                    let v = (self.g)(x);
                    v * v
                },
                lo,
                hi,
                QUADRATURE_TOL,
            ),
        };
        (first, second)
    }

    /// Conditional mean of `g(X)` for `X` uniform on `[lo, hi]`.
    pub fn mean(&self, lo: f64, hi: f64) -> f64 {
        self.moments(lo, hi).0 / (hi - lo)
    }

    /// Conditional variance of `g(X)` for `X` uniform on `[lo, hi]`.
    pub fn variance(&self, lo: f64, hi: f64) -> f64 {
        let (m1, m2) = self.moments(lo, hi);
        let len = hi - lo;
        (m2 / len - (m1 / len).powi(2)).max(0.0)
    }
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::validation(format!("invalid node interval [{a}, {b}]")));
    }
    Ok(())
}

fn check_split(a: f64, b: f64, s: f64) -> Result<()> {
    check_interval(a, b)?;
    if !(a < s && s < b) {
        return Err(Error::validation(format!("split {s} outside ({a}, {b})")));
    }
    Ok(())
}

/// Impurity decrease `P_L P_R (mu_L - mu_R)^2` of splitting `[a, b]` at `s`.
pub fn population_decrease(model: &PopulationModel, a: f64, b: f64, s: f64) -> Result<f64> {
    check_split(a, b, s)?;
    Ok(decrease_unchecked(model, a, b, s))
}

fn decrease_unchecked(model: &PopulationModel, a: f64, b: f64, s: f64) -> f64 {
    let len = b - a;
    let (left, _) = model.moments(a, s);
    let (right, _) = model.moments(s, b);
    let p_left = (s - a) / len;
    let p_right = (b - s) / len;
    let gap = left / (s - a) - right / (b - s);
    p_left * p_right * gap * gap
}

/// The same decrease as node variance minus weighted daughter variances.
pub fn population_decrease_weighted(model: &PopulationModel, a: f64, b: f64, s: f64) -> Result<f64> {
    check_split(a, b, s)?;
    let len = b - a;
    Ok(model.variance(a, b) - ((s - a) / len * model.variance(a, s) + (b - s) / len * model.variance(s, b)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSplit {
    pub lower: f64,
    pub upper: f64,
    /// Every maximiser whose decrease is within tolerance of the best, ascending.
    pub maximizers: Vec<f64>,
    pub decrease: f64,
    pub variance: f64,
    /// `sqrt(decrease / variance)`: the correlation of the optimal stump.
    pub rho: f64,
}

impl OptimalSplit {
    pub fn first(&self) -> f64 {
        self.maximizers[0]
    }
}

/// Global maximiser(s) of the population decrease on `(a, b)`: a
/// [`SPLIT_GRID`]-point scan refined by golden-section search. Maximisers
/// whose value is within `tolerance` (relative) of the best are all returned.
pub fn optimal_split(model: &PopulationModel, a: f64, b: f64, tolerance: f64) -> Result<OptimalSplit> {
    check_interval(a, b)?;
    let variance = model.variance(a, b);
    let scale = model.moments(a, b).1 / (b - a);
    if variance <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Undefined(format!("no informative split: {} is constant on [{a}, {b}]", model.description)));
    }
    let f = |s: f64| decrease_unchecked(model, a, b, s);
    let peaks = grid_maxima(&f, a, b, SPLIT_GRID, 1e-3);
    let best = peaks.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if !(best > 1e-12 * variance) {
        return Err(Error::Undefined(format!("no informative split for {} on [{a}, {b}]", model.description)));
    }
    let maximizers: Vec<f64> = peaks.iter().filter(|p| p.1 >= best - tolerance * best).map(|p| p.0).collect();
    Ok(OptimalSplit {
        lower: a,
        upper: b,
        maximizers,
        decrease: best,
        variance,
        rho: (best / variance).sqrt(),
    })
}

/// Split-location formula evaluated at one maximiser.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitFormulaCheck {
    pub s_star: f64,
    /// Squared gap between `g(s*)` and the node mean, over the node variance.
    pub v: f64,
    pub rho2: f64,
    /// `(a+b)/2 - (b-a)/2 sqrt(v/(v+rho^2))` and the `+` branch.
    pub formula: (f64, f64),
    /// Distance from `s*` to the nearer branch.
    pub location_error: f64,
    /// Distance from `P(X <= s*)` to the nearer of `1/2 -/+ 1/2 sqrt(v/(v+rho^2))`.
    pub probability_error: f64,
}

impl SplitFormulaCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.location_error <= tol && self.probability_error <= tol
    }
}

/// Evaluates the optimal-split location formula at `s_star` for uniform `X`
/// on `[a, b]`.
pub fn verify_split_formula(model: &PopulationModel, a: f64, b: f64, s_star: f64) -> Result<SplitFormulaCheck> {
    let decrease = population_decrease(model, a, b, s_star)?;
    let variance = model.variance(a, b);
    if !(decrease > 0.0) || !(variance > 0.0) {
        return Err(Error::contract(format!("zero decrease at s* = {s_star}; the formula needs a positive one")));
    }
    let v = (model.eval(s_star) - model.mean(a, b)).powi(2) / variance;
    let rho2 = decrease / variance;
    let root = (v / (v + rho2)).sqrt();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let formula = (mid - half * root, mid + half * root);
    let location_error = (s_star - formula.0).abs().min((s_star - formula.1).abs());
    let p_left = (s_star - a) / (b - a);
    let probability_error = (p_left - (0.5 - 0.5 * root)).abs().min((p_left - (0.5 + 0.5 * root)).abs());
    Ok(SplitFormulaCheck { s_star, v, rho2, formula, location_error, probability_error })
}

/// `Delta(s)` of `sin(2 pi w x)` on `[0, 1]` in closed form.
pub fn sinusoid_decrease_closed_form(frequency: u32, s: f64) -> f64 {
    let w = f64::from(frequency);
    (1.0 - (2.0 * PI * w * s).cos()).powi(2) / (4.0 * PI * PI * w * w * s * (1.0 - s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndcutRow {
    pub frequency: u32,
    /// Smallest optimal split of `sin(2 pi w x)` on `[0, 1]`.
    pub s_star: f64,
    pub rho: f64,
    pub s_star_times_w: f64,
    pub rho_times_sqrt_w: f64,
}

/// Optimal split location and stump correlation of `sin(2 pi w x)` on
/// `[0, 1]` for each frequency.
pub fn endcut_scaling(frequencies: &[u32]) -> Result<Vec<EndcutRow>> {
    frequencies
        .iter()
        .map(|&w| {
            let opt = optimal_split(&PopulationModel::sinusoid(w)?, 0.0, 1.0, 1e-8)?;
            let wf = f64::from(w);
            Ok(EndcutRow {
                frequency: w,
                s_star: opt.first(),
                rho: opt.rho,
                s_star_times_w: opt.first() * wf,
                rho_times_sqrt_w: opt.rho * wf.sqrt(),
            })
        })
        .collect()
}

/// Rows whose `s*·w` or `rho·sqrt(w)` leave `[ref·(1-band), ref·(1+band)]`,
/// with `ref` taken from the row of `reference` frequency.
pub fn endcut_outside_band(rows: &[EndcutRow], reference: u32, band: f64) -> Result<Vec<u32>> {
    let base = rows
        .iter()
        .find(|r| r.frequency == reference)
        .ok_or_else(|| Error::validation(format!("no row for reference frequency {reference}")))?;
    let inside = |value: f64, r: f64| value >= r * (1.0 - band) && value <= r * (1.0 + band);
    Ok(rows
        .iter()
        .filter(|r| !inside(r.s_star_times_w, base.s_star_times_w) || !inside(r.rho_times_sqrt_w, base.rho_times_sqrt_w))
        .map(|r| r.frequency)
        .collect())
}

/// CSV with columns `w, s_star, rho, s_star_times_w, rho_times_sqrt_w`.
pub fn write_endcut_csv(rows: &[EndcutRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["w", "s_star", "rho", "s_star_times_w", "rho_times_sqrt_w"])?;
    for r in rows {
        w.write_record(&[
            r.frequency.to_string(),
            r.s_star.to_string(),
            r.rho.to_string(),
            r.s_star_times_w.to_string(),
            r.rho_times_sqrt_w.to_string(),
        ])?;
    }
    w.flush().map_err(|source| Error::Io { path: "<endcut table>".into(), source })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn models() -> Vec<PopulationModel> {
        vec![
            PopulationModel::linear(),
            PopulationModel::quadratic(),
            PopulationModel::cubic_minus_linear(),
            PopulationModel::sinusoid(4).unwrap(),
            PopulationModel::sinusoid(8).unwrap(),
            PopulationModel::sinusoid(16).unwrap(),
        ]
    }

    #[test]
    fn quadrature_agrees_with_closed_forms() {
        for m in models() {
            let q = m.quadrature_only();
            for (lo, hi) in [(0.0, 1.0), (0.1, 0.37), (0.25, 0.75), (0.6, 0.61)] {
                let (a1, a2) = m.moments(lo, hi);
                let (b1, b2) = q.moments(lo, hi);
                assert!((a1 - b1).abs() <= 1e-9 && (a2 - b2).abs() <= 1e-9, "{}", m.description());
            }
        }
    }

    #[test]
    fn constant_model_has_no_decrease() {
        let m = PopulationModel::custom("2", |_| 2.0);
        for s in [0.1, 0.5, 0.9] {
            assert!(population_decrease(&m, 0.0, 1.0, s).unwrap().abs() < 1e-15);
        }
        assert!(matches!(optimal_split(&m, 0.0, 1.0, 1e-8), Err(Error::Undefined(_))));
    }

    #[test]
    fn linear_decrease_and_optimum() {
        let m = PopulationModel::linear();
        for s in [0.1, 0.3, 0.5, 0.77] {
            let want = s * (1.0 - s) / 4.0;
            assert!((population_decrease(&m, 0.0, 1.0, s).unwrap() - want).abs() < 1e-15);
        }
        let opt = optimal_split(&m, 0.0, 1.0, 1e-8).unwrap();
        assert_eq!(opt.maximizers.len(), 1);
        assert!((opt.first() - 0.5).abs() < 1e-7);
        assert!((opt.rho * opt.rho - 0.75).abs() < 1e-12);
        let check = verify_split_formula(&m, 0.0, 1.0, 0.5).unwrap();
        assert_eq!(check.v, 0.0);
        assert_eq!(check.formula, (0.5, 0.5));
    }

    #[test]
    fn split_outside_interval_is_rejected() {
        let m = PopulationModel::linear();
        assert!(population_decrease(&m, 0.0, 1.0, 1.0).is_err());
        assert!(population_decrease(&m, 0.2, 0.1, 0.15).is_err());
    }

    #[test]
    fn decrease_forms_agree() {
        for m in models() {
            for (a, b) in [(0.0, 1.0), (0.25, 0.75), (0.1, 0.6)] {
                for k in 1..20 {
                    let s = a + (b - a) * k as f64 / 20.0;
                    let simple = population_decrease(&m, a, b, s).unwrap();
                    let weighted = population_decrease_weighted(&m, a, b, s).unwrap();
                    assert!((simple - weighted).abs() <= 1e-9, "{} at {s}", m.description());
                }
            }
        }
    }

    #[test]
    fn sinusoid_matches_closed_form() {
        for w in [1, 4, 8, 16, 32] {
            let m = PopulationModel::sinusoid(w).unwrap();
            for k in 1..50 {
                let s = k as f64 / 50.0 + 0.003;
                let got = population_decrease(&m, 0.0, 1.0, s).unwrap();
                assert!((got - sinusoid_decrease_closed_form(w, s)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn sinusoid_has_two_symmetric_maximizers() {
        let opt = optimal_split(&PopulationModel::sinusoid(8).unwrap(), 0.0, 1.0, 1e-8).unwrap();
        assert_eq!(opt.maximizers.len(), 2);
        assert!((opt.maximizers[0] + opt.maximizers[1] - 1.0).abs() < 1e-6);
        assert!(opt.maximizers[0] < 0.25);
    }

    #[test]
    fn even_model_has_symmetric_maximizers() {
        let m = PopulationModel::custom("(x - 0.5)^2", |x| (x - 0.5) * (x - 0.5));
        let opt = optimal_split(&m, 0.0, 1.0, 1e-8).unwrap();
        assert_eq!(opt.maximizers.len(), 2);
        assert!((opt.maximizers[0] + opt.maximizers[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn refined_optimum_beats_dense_grid() {
        for m in models() {
            let opt = optimal_split(&m, 0.0, 1.0, 1e-8).unwrap();
            let n = 1_000_000;
            let (mut best_s, mut best) = (0.0, f64::NEG_INFINITY);
            for k in 1..n {
                let s = k as f64 / n as f64;
                let v = decrease_unchecked(&m, 0.0, 1.0, s);
                if v > best {
                    best = v;
                    best_s = s;
                }
            }
            assert!(opt.decrease >= best - 1e-12, "{}", m.description());
            let nearest = opt.maximizers.iter().map(|s| (s - best_s).abs()).fold(f64::INFINITY, f64::min);
            assert!(nearest <= 2e-6, "{}: grid {best_s} vs {:?}", m.description(), opt.maximizers);
        }
    }

    #[test]
    fn split_formula_holds_at_maximizers() {
        for m in models() {
            for (a, b) in [(0.0, 1.0), (0.25, 0.75), (0.1, 0.6), (0.3, 0.9)] {
                let opt = optimal_split(&m, a, b, 1e-8).unwrap();
                for &s in &opt.maximizers {
                    let check = verify_split_formula(&m, a, b, s).unwrap();
                    assert!(check.holds(1e-6), "{} on [{a}, {b}]: {check:?}", m.description());
                }
            }
        }
    }

    #[test]
    fn endcut_band() {
        let rows = endcut_scaling(&[1, 4, 8, 16, 32]).unwrap();
        assert!(rows[0].s_star > 0.0 && rows[0].s_star < 1.0);
        assert!(endcut_outside_band(&rows[1..], 4, 0.5).unwrap().is_empty());
        let mut buf = Vec::new();
        write_endcut_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 6);
    }
}
