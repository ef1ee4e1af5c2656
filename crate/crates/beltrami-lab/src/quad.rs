//! One-dimensional adaptive quadrature for the radial-profile integrals.
//!
//! Everything here works on smooth integrands in the log coordinate
//! `t = log(1/r)`, so there are no endpoint singularities to special-case;
//! what does need care is honest propagation of overflow. Integrands that
//! exceed the double range return `inf`, and the routines pass that through
//! instead of recursing forever or masking it.

const MAX_DEPTH: u32 = 48;

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if !delta.is_finite() {
        // Overflow or NaN in the integrand; subdividing cannot repair it.
        return left + right;
    }
    if depth == 0 || delta.abs() <= 15.0 * eps {
        // Richardson extrapolation of the two Simpson levels.
        return left + right + delta / 15.0;
    }
    adaptive_rec(f, a, lm, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
        + adaptive_rec(f, m, rm, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}

/// Integrate `f` over `[a, b]` by adaptive Simpson quadrature with relative
/// tolerance `rel_tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    let eps = if whole.abs() > 0.0 && whole.is_finite() {
        rel_tol * whole.abs()
    } else {
        rel_tol
    };
    adaptive_rec(&f, a, m, b, fa, fm, fb, whole, eps, MAX_DEPTH)
}

/// Integrate `f` over `[start, inf)` by summing adaptive panels over
/// doubling segments until three consecutive increments are negligible.
///
/// Suited to integrands with power-law or faster decay. Returns `inf` when a
/// panel overflows, and the current partial sum if the segment bound reaches
/// the top of the double range (the remaining mass is then below resolution
/// for every integrand this crate produces).
pub fn integrate_tail<F: Fn(f64) -> f64>(f: F, start: f64, rel_tol: f64) -> f64 {
    let mut total = 0.0;
    let mut lo = start;
    let mut hi = if start.abs() < 1.0 { start + 1.0 } else { 2.0 * start };
    let mut quiet = 0u32;
    for _ in 0..2400 {
        let panel = adaptive(&f, lo, hi, rel_tol);
        if !panel.is_finite() {
            return panel;
        }
        total += panel;
        if panel.abs() <= rel_tol * total.abs().max(f64::MIN_POSITIVE) {
            quiet += 1;
            if quiet >= 3 {
                return total;
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return total;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_over_half_period() {
        let v = adaptive(f64::sin, 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-10, "got {v}");
    }

    #[test]
    fn polynomial_is_exact_at_low_depth() {
        let v = adaptive(|t| t * t * t, 0.0, 2.0, 1e-10);
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_like_tail() {
        // integral of t e^{-2t} over (0, inf) = 1/4.
        let v = integrate_tail(|t| t * (-2.0 * t).exp(), 0.0, 1e-10);
        assert!((v - 0.25).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn power_law_tail() {
        // integral of t^{-2} over (1, inf) = 1; increments only halve per
        // doubling, which exercises the slow-decay path.
        let v = integrate_tail(|t| t.powi(-2), 1.0, 1e-10);
        assert!((v - 1.0).abs() < 1e-8, "got {v}");
    }

    #[test]
    fn overflow_propagates_as_inf() {
        let v = adaptive(|t| (t * 400.0).exp(), 0.0, 3.0, 1e-8);
        assert!(v.is_infinite() && v > 0.0);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(adaptive(|t| t.cos(), 1.5, 1.5, 1e-8), 0.0);
    }
}
