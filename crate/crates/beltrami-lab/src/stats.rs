//! Small numeric helpers: compensated summation and least-squares fits.

use num_complex::Complex64;
use serde::Serialize;

const PAIRWISE_LEAF: usize = 32;

fn pairwise_rec<T, F>(lo: usize, hi: usize, zero: T, f: &F) -> T
where
    T: Copy + std::ops::Add<Output = T>,
    F: Fn(usize) -> T,
{
    let len = hi - lo;
    if len <= PAIRWISE_LEAF {
        let mut acc = zero;
        for i in lo..hi {
            acc = acc + f(i);
        }
        acc
    } else {
        let mid = lo + len / 2;
        pairwise_rec(lo, mid, zero, f) + pairwise_rec(mid, hi, zero, f)
    }
}

/// Sum `f(0) + ... + f(n-1)` by pairwise splitting.
///
/// Error grows like `O(log n)` in units of machine epsilon instead of the
/// `O(n)` of a running sum, which matters for the `10^6`-term grid reductions
/// used throughout the crate.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(n: usize, f: F) -> f64 {
    pairwise_rec(0, n, 0.0, &f)
}

/// Complex-valued counterpart of [`pairwise_sum_by`].
pub fn pairwise_sum_complex_by<F: Fn(usize) -> Complex64>(n: usize, f: F) -> Complex64 {
    pairwise_rec(0, n, Complex64::new(0.0, 0.0), &f)
}

/// Result of an ordinary least-squares line fit `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 for a perfect fit.
    pub r_squared: f64,
}

/// Fit a line through `(xs[i], ys[i])` by least squares.
///
/// Needs at least two points with distinct abscissae; degenerate input yields
/// a NaN slope rather than a panic so callers can surface it as data.
pub fn ols_fit(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len(), "ols_fit on mismatched slices");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    LineFit {
        slope,
        intercept,
        r_squared,
    }
}

/// Observed convergence order from errors at two resolutions.
///
/// `refinement` is the grid-spacing ratio between the coarse and fine runs
/// (2 for dyadic refinement).
pub fn observed_order(err_coarse: f64, err_fine: f64, refinement: f64) -> f64 {
    (err_coarse / err_fine).ln() / refinement.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_closed_form() {
        let n = 10_001usize;
        let s = pairwise_sum_by(n, |i| i as f64);
        assert_eq!(s, (n * (n - 1) / 2) as f64);
    }

    #[test]
    fn pairwise_controls_roundoff() {
        // A running sum of 10^6 copies of 0.1 drifts by ~1e-8; pairwise
        // summation stays well below 1e-9.
        let n = 1_000_000usize;
        let s = pairwise_sum_by(n, |_| 0.1);
        assert!((s - 1.0e5).abs() < 1e-9, "pairwise drift {:e}", s - 1.0e5);
    }

    #[test]
    fn pairwise_complex_sums_components() {
        let n = 1000usize;
        let s = pairwise_sum_complex_by(n, |i| Complex64::new(1.0, i as f64));
        assert_eq!(s.re, 1000.0);
        assert_eq!(s.im, (n * (n - 1) / 2) as f64);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.25).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.5 * x - 2.0).collect();
        let fit = ols_fit(&xs, &ys);
        assert!((fit.slope - 3.5).abs() < 1e-12);
        assert!((fit.intercept + 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ols_r_squared_detects_scatter() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 1.0, 0.0, 1.0];
        let fit = ols_fit(&xs, &ys);
        assert!(fit.r_squared < 0.75);
    }

    #[test]
    fn observed_order_of_quadratic_decay() {
        // Error e(h) = c h^2 halves twice per refinement step.
        let order = observed_order(4.0e-3, 1.0e-3, 2.0);
        assert!((order - 2.0).abs() < 1e-12);
    }
}
