//! Least-squares isotonic regression by pool-adjacent-violators.

/// Weighted non-decreasing least-squares fit of `y`.
pub fn isotonic_fit_weighted(y: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), weights.len(), "isotonic fit: length mismatch");
    // Blocks as (weighted mean, total weight, number of entries).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&v, &w) in y.iter().zip(weights) {
        let mut cur = (v, w, 1usize);
        while let Some(&(m, bw, len)) = blocks.last() {
            if m <= cur.0 {
                break;
            }
            blocks.pop();
            let total = bw + cur.1;
            cur = ((m * bw + cur.0 * cur.1) / total, total, len + cur.2);
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(y.len());
    for (m, _, len) in blocks {
        out.extend(std::iter::repeat_n(m, len));
    }
    out
}

/// Non-decreasing least-squares fit of `y` with unit weights.
pub fn isotonic_fit(y: &[f64]) -> Vec<f64> {
    isotonic_fit_weighted(y, &vec![1.0; y.len()])
}

/// Isotonic fit of `y` against sorted covariate values `x`, where tied `x`
/// values are forced to share one fitted value.
pub fn isotonic_fit_grouped(x_sorted: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(x_sorted.len(), y.len(), "isotonic fit: length mismatch");
    debug_assert!(x_sorted.windows(2).all(|w| w[0] <= w[1]), "covariate must be sorted");
    let mut means = Vec::new();
    let mut weights = Vec::new();
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < y.len() {
        let mut j = i + 1;
        while j < y.len() && x_sorted[j] == x_sorted[i] {
            j += 1;
        }
        means.push(crate::numeric::mean(&y[i..j]));
        weights.push((j - i) as f64);
        sizes.push(j - i);
        i = j;
    }
    let fitted = isotonic_fit_weighted(&means, &weights);
    let mut out = Vec::with_capacity(y.len());
    for (v, k) in fitted.into_iter().zip(sizes) {
        out.extend(std::iter::repeat_n(v, k));
    }
    out
}
