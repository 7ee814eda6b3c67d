//! Global maximisation of a scalar function on an interval: dense grid scan
//! followed by golden-section refinement of every promising grid peak.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum of `f` on `[lo, hi]`, stopping when the
/// bracket is narrower than `x_tol`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, x_tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo <= x_tol {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Local maxima of `f` on the open interval `(a, b)`, found by scanning
/// `grid` interior points and refining each grid peak whose value is within
/// `keep` (relative) of the best grid value. Sorted by location.
pub fn grid_maxima<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, grid: usize, keep: f64) -> Vec<(f64, f64)> {
    let h = (b - a) / (grid + 1) as f64;
    let xs: Vec<f64> = (1..=grid).map(|k| a + k as f64 * h).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let top = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    for k in 0..grid {
        let left = if k == 0 { f64::NEG_INFINITY } else { ys[k - 1] };
        let right = if k + 1 == grid { f64::NEG_INFINITY } else { ys[k + 1] };
        if ys[k] >= left && ys[k] >= right && ys[k] >= top - keep * top.abs() {
            let lo = if k == 0 { a } else { xs[k - 1] };
            let hi = if k + 1 == grid { b } else { xs[k + 1] };
            let x_tol = 1e-13 * (b - a).max(1.0);
            out.push(golden_section_max(f, lo, hi, x_tol));
        }
    }
    out.sort_by(|p, q| p.0.total_cmp(&q.0));
    out.dedup_by(|p, q| (p.0 - q.0).abs() <= h);
    out
}
