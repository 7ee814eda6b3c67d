//! Small numerical helpers shared by the tree, diagnostics and population code.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// Arithmetic mean. Returns the common value exactly when all entries are equal.
pub fn mean(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "mean of an empty slice");
    if all_equal(values) {
        return values[0];
    }
    sum(values.iter().copied()) / values.len() as f64
}

/// Two-pass population variance (divisor `N`); exactly zero for constant input.
pub fn variance(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "variance of an empty slice");
    if all_equal(values) {
        return 0.0;
    }
    let m = mean(values);
    sum(values.iter().map(|v| (v - m) * (v - m))) / values.len() as f64
}

pub fn all_equal(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

/// Empirical Pearson correlation with divisor `N`. Degenerate inputs (either
/// side constant) give 0.
pub fn pearson(u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), v.len(), "pearson: length mismatch");
    if u.is_empty() || all_equal(u) || all_equal(v) {
        return 0.0;
    }
    let mu = mean(u);
    let mv = mean(v);
    let mut cov = CompensatedSum::new();
    let mut su = CompensatedSum::new();
    let mut sv = CompensatedSum::new();
    for (a, b) in u.iter().zip(v) {
        let da = a - mu;
        let db = b - mv;
        cov.add(da * db);
        su.add(da * da);
        sv.add(db * db);
    }
    let denom = (su.value() * sv.value()).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        cov.value() / denom
    }
}

/// `|a - b| <= tol * max(|a|, |b|)`, with exact equality always accepted.
pub fn approx_eq_rel(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1e16);
        for _ in 0..10 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.value(), 10.0);
    }

    #[test]
    fn constant_input_has_exact_statistics() {
        let v = [0.1; 7];
        assert_eq!(mean(&v), 0.1);
        assert_eq!(variance(&v), 0.0);
        assert_eq!(pearson(&v, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]), 0.0);
    }

    #[test]
    fn pearson_of_affine_pair_is_one() {
        let u = [0.3, 1.2, -0.5, 2.0];
        let v: Vec<f64> = u.iter().map(|x| 3.0 * x - 1.0).collect();
        assert!((pearson(&u, &v) - 1.0).abs() < 1e-14);
        let w: Vec<f64> = u.iter().map(|x| -x).collect();
        assert!((pearson(&u, &w) + 1.0).abs() < 1e-14);
    }
}
