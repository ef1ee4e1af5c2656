//! Neumann series solver for the Beltrami equation and the decay bounds
//! that control it for degenerate coefficients.
//!
//! The principal solution of `dbar f = mu df` is assembled from the series
//! `omega = mu + mu S mu + mu S mu S mu + ...`, which converges in L2 as
//! long as the coefficient modulus stays capped below 1. Degenerate
//! coefficients are therefore always truncated first; what survives of the
//! degeneracy is studied through the decay of the series terms, split into
//! a good part (coefficient modulus under a slowly rising threshold) and a
//! bad set whose measure Chebyshev controls via the exponential distortion
//! integral.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::beurling::OperatorPlan;
use crate::error::LabError;
use crate::grid::{ComplexGrid, GridDescriptor, PixelSet};
use crate::stats::{ols_fit, pairwise_sum_by, LineFit};

/// Caps at or above this are treated as effectively untruncated when the
/// divergence detector trips.
const DEGENERATE_CAP: f64 = 1.0 - 1e-12;

pub const DEFAULT_N_MAX: u32 = 40;

/// A truncated Beltrami coefficient together with the untruncated moduli.
///
/// The solver iterates on the truncated values; bad-set measurements and
/// exponential distortion integrals use the raw moduli, since the bounds
/// they feed concern the true coefficient rather than the cap.
#[derive(Debug, Clone)]
pub struct BeltramiField {
    mu: ComplexGrid,
    raw_abs: Vec<f64>,
    k_cap: f64,
}

/// Clamp the coefficient modulus to `k_cap`, preserving the argument.
///
/// Support outside the closed unit disk is discarded: the solution theory
/// assumes the coefficient vanishes there, and cells beyond the disk exist
/// only because the grid is square.
pub fn truncate_coefficient(
    mu_raw: &ComplexGrid,
    k_cap: f64,
) -> Result<BeltramiField, LabError> {
    if !(0.0 < k_cap && k_cap < 1.0) {
        return Err(LabError::invalid("k_cap", format!("{k_cap} outside (0, 1)")));
    }
    let desc = mu_raw.descriptor();
    let n = desc.n();
    let mut raw_abs = vec![0.0; desc.len()];
    let mut values = mu_raw.values().clone();
    for (i, v) in values.iter_mut().enumerate() {
        if desc.center(i / n, i % n).norm() > 1.0 {
            *v = Complex64::new(0.0, 0.0);
            continue;
        }
        let a = v.norm();
        if a > 1.0 {
            return Err(LabError::Hypothesis(format!(
                "coefficient modulus {a} > 1 inside the disk"
            )));
        }
        raw_abs[i] = a;
        if a > k_cap {
            *v *= k_cap / a;
        }
    }
    Ok(BeltramiField {
        mu: ComplexGrid::from_values(desc, values)?,
        raw_abs,
        k_cap,
    })
}

impl BeltramiField {
    pub fn descriptor(&self) -> GridDescriptor {
        self.mu.descriptor()
    }

    pub fn mu(&self) -> &ComplexGrid {
        &self.mu
    }

    pub fn k_cap(&self) -> f64 {
        self.k_cap
    }

    /// Untruncated coefficient moduli, row-major.
    pub fn raw_abs(&self) -> &[f64] {
        &self.raw_abs
    }

    /// Distortion of the truncated coefficient per cell.
    pub fn distortion_values(&self) -> Vec<f64> {
        self.mu
            .values()
            .iter()
            .map(|v| {
                let a = v.norm();
                (1.0 + a) / (1.0 - a)
            })
            .collect()
    }

    /// `integral over the disk of exp(p K^alpha)` for the *raw* distortion.
    /// Returns infinity honestly when a cell carries modulus 1.
    pub fn exp_distortion_integral(&self, p: f64, alpha: f64) -> f64 {
        let desc = self.descriptor();
        let n = desc.n();
        let sum = pairwise_sum_by(self.raw_abs.len(), |i| {
            if desc.center(i / n, i % n).norm() > 1.0 {
                return 0.0;
            }
            let k = (1.0 + self.raw_abs[i]) / (1.0 - self.raw_abs[i]);
            (p * k.powf(alpha)).exp()
        });
        sum * desc.cell_area()
    }

    /// Same integral for the *truncated* distortion, which is the
    /// distortion of the map the solver actually produces. Always finite.
    pub fn capped_exp_distortion_integral(&self, p: f64, alpha: f64) -> f64 {
        let desc = self.descriptor();
        let n = desc.n();
        let vals = self.mu.values().as_slice().expect("standard layout");
        let sum = pairwise_sum_by(vals.len(), |i| {
            if desc.center(i / n, i % n).norm() > 1.0 {
                return 0.0;
            }
            let a = vals[i].norm();
            let k = (1.0 + a) / (1.0 - a);
            (p * k.powf(alpha)).exp()
        });
        sum * desc.cell_area()
    }

    /// Disk cells where the raw modulus exceeds `threshold`.
    pub fn bad_set(&self, threshold: f64) -> PixelSet {
        let desc = self.descriptor();
        let n = desc.n();
        let mask = (0..self.raw_abs.len())
            .map(|i| {
                self.raw_abs[i] > threshold && desc.center(i / n, i % n).norm() <= 1.0
            })
            .collect();
        PixelSet::from_mask(desc, mask).expect("mask built from own grid")
    }

    /// Measure of the step-`n` bad set for the given decay parameters.
    pub fn bad_set_measure(&self, n: u32, beta: f64, alpha: f64) -> f64 {
        self.bad_set(bad_set_threshold(n, beta, alpha)).measure()
    }

    /// Cells where the truncation actually clamped the modulus.
    pub fn clamped_set(&self) -> PixelSet {
        let mask = self.raw_abs.iter().map(|&a| a > self.k_cap).collect();
        PixelSet::from_mask(self.descriptor(), mask).expect("mask built from own grid")
    }
}

/// The assembled principal solution: map values and Wirtinger derivatives.
/// `jacobian` keeps `|df|^2 - |dbar f|^2` in the real part.
#[derive(Debug, Clone)]
pub struct SolutionField {
    pub f: ComplexGrid,
    pub d: ComplexGrid,
    pub dbar: ComplexGrid,
    pub jacobian: ComplexGrid,
}

impl SolutionField {
    pub fn descriptor(&self) -> GridDescriptor {
        self.f.descriptor()
    }

    /// `L2 norm of (dbar f - mu df)`: how well the assembled derivatives
    /// satisfy the equation they came from. Equals the norm of the first
    /// dropped series term, so it tracks the stopping tolerance.
    pub fn equation_residual(&self, field: &BeltramiField) -> Result<f64, LabError> {
        self.d.check_same_grid(field.mu())?;
        let dv = self.d.values().as_slice().expect("standard layout");
        let bv = self.dbar.values().as_slice().expect("standard layout");
        let mv = field.mu().values().as_slice().expect("standard layout");
        let sum = pairwise_sum_by(dv.len(), |i| (bv[i] - mv[i] * dv[i]).norm_sqr());
        Ok((sum * self.d.descriptor().cell_area()).sqrt())
    }
}

/// Everything measured during one solve.
#[derive(Debug, Clone, Serialize)]
pub struct NeumannDecayReport {
    pub k_cap: f64,
    pub n_max: u32,
    pub tol: f64,
    /// `L2 norms of psi_n`, starting at `psi_0 = mu`.
    pub term_norms: Vec<f64>,
    /// Filled by the caller from [`good_term_iteration`] when requested.
    pub good_term_norms: Option<Vec<f64>>,
    /// Filled by the caller from [`BeltramiField::bad_set_measure`].
    pub bad_set_measures: Option<Vec<f64>>,
    /// Norm of the last computed term.
    pub residual: f64,
    pub converged: bool,
}

pub fn default_tolerance(field: &BeltramiField) -> f64 {
    1e-12 * field.mu().l2_norm()
}

/// Iterate `psi_0 = mu`, `psi_n = mu S psi_{n-1}` and assemble the
/// principal solution `f = z + Cauchy(omega)` from `omega = sum psi_n`.
///
/// Iteration stops at `n_max` or once a term norm falls to `tol` (`tol = 0`
/// disables the early stop). The additive constant in the Cauchy part is
/// fixed by forcing `f - z` to have zero mean over a ring between the
/// coefficient support and the square boundary, which matches the decay
/// normalization of the principal solution.
pub fn neumann_solve(
    field: &BeltramiField,
    n_max: u32,
    tol: f64,
) -> Result<(SolutionField, NeumannDecayReport), LabError> {
    if n_max < 1 {
        return Err(LabError::invalid("n_max", "need at least one iteration"));
    }
    if !tol.is_finite() || tol < 0.0 {
        return Err(LabError::invalid("tol", format!("{tol} not a tolerance")));
    }
    let desc = field.descriptor();
    let beurling = OperatorPlan::beurling(desc);

    let mut term = field.mu.clone();
    let mut omega = term.clone();
    let mut term_norms = vec![term.l2_norm()];
    let mut grew = 0u32;
    while term_norms.len() <= n_max as usize {
        let prev = *term_norms.last().expect("nonempty");
        if prev <= tol {
            break;
        }
        term = field.mu.zip_map(&beurling.apply(&term)?, |m, s| m * s)?;
        let norm = term.l2_norm();
        omega
            .values_mut()
            .zip_mut_with(term.values(), |o, t| *o += t);
        grew = if norm > prev { grew + 1 } else { 0 };
        term_norms.push(norm);
        if grew >= 5 && field.k_cap >= DEGENERATE_CAP {
            return Err(LabError::Divergence(format!(
                "term norms rose {grew} consecutive steps at cap {}; series diverges",
                field.k_cap
            )));
        }
    }

    let d = beurling.apply(&omega)?.map(|v| v + 1.0);
    let cauchy = OperatorPlan::cauchy(desc).apply(&omega)?;
    let dbar = omega;

    // Normalize over a ring clear of both the unit disk and the periodic
    // boundary; there f - z of the principal solution averages to zero.
    let side = desc.side();
    let ring = PixelSet::annulus(desc, side / 4.0, 3.0 * side / 8.0);
    let shift = cauchy.integrate_over(&ring)? / ring.measure();
    let n = desc.n();
    let mut f_vals = cauchy.values().clone();
    for (i, v) in f_vals.iter_mut().enumerate() {
        *v += desc.center(i / n, i % n) - shift;
    }
    let f = ComplexGrid::from_values(desc, f_vals)?;
    let jacobian = d.zip_map(&dbar, |a, b| {
        Complex64::new(a.norm_sqr() - b.norm_sqr(), 0.0)
    })?;

    let residual = *term_norms.last().expect("nonempty");
    let converged = residual <= tol;
    let report = NeumannDecayReport {
        k_cap: field.k_cap,
        n_max,
        tol,
        term_norms,
        good_term_norms: None,
        bad_set_measures: None,
        residual,
        converged,
    };
    Ok((SolutionField { f, d, dbar, jacobian }, report))
}

/// Modulus threshold defining the step-`n` bad set
/// `{ |mu| > 1 - 2 beta^{1/alpha} / ((4n)^{1/alpha} + beta^{1/alpha}) }`.
pub fn bad_set_threshold(n: u32, beta: f64, alpha: f64) -> f64 {
    let bn = beta.powf(1.0 / alpha);
    1.0 - 2.0 * bn / ((4.0 * n as f64).powf(1.0 / alpha) + bn)
}

/// Norms of the restricted iterates `g_0 = mu`,
/// `g_n = chi_{G_n} mu S g_{n-1}` with `G_n` the complement of the step-`n`
/// bad set of the *raw* modulus.
pub fn good_term_iteration(
    field: &BeltramiField,
    beta: f64,
    alpha: f64,
    n_max: u32,
) -> Result<Vec<f64>, LabError> {
    validate_beta_alpha(beta, alpha)?;
    let desc = field.descriptor();
    let beurling = OperatorPlan::beurling(desc);
    let mut g = field.mu.clone();
    let mut norms = vec![g.l2_norm()];
    for n in 1..=n_max {
        let thr = bad_set_threshold(n, beta, alpha);
        let sg = beurling.apply(&g)?;
        let mut vals = sg.values().clone();
        let mu_vals = field.mu.values().as_slice().expect("standard layout");
        for (i, v) in vals.iter_mut().enumerate() {
            *v = if field.raw_abs[i] <= thr {
                mu_vals[i] * *v
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        g = ComplexGrid::from_values(desc, vals)?;
        norms.push(g.l2_norm());
    }
    Ok(norms)
}

/// Product form of the good-term bound: `sqrt(pi)` times the product of
/// the per-step contraction factors, which are exactly the bad-set
/// thresholds. Valid for every admissible `(beta, alpha)`.
pub fn good_term_product_bound(beta: f64, alpha: f64, n: u32) -> f64 {
    let mut log_prod = 0.0;
    for j in 1..=n {
        let factor = bad_set_threshold(j, beta, alpha);
        if factor <= 0.0 {
            return 0.0;
        }
        log_prod += factor.ln();
    }
    std::f64::consts::PI.sqrt() * log_prod.exp()
}

/// Closed-form good-term bound obtained by integral comparison:
/// `sqrt(pi) exp(-b ((n+1+beta/4)^e - (1+beta/4)^e) / e)` with
/// `b = (beta/2)^{1/alpha}` and `e = 1 - 1/alpha`; at `alpha = 1` the
/// exponent degenerates to a power law of exponent `-beta/2`.
pub fn good_term_integral_bound(beta: f64, alpha: f64, n: u32) -> f64 {
    let root_pi = std::f64::consts::PI.sqrt();
    let x = n as f64 + 1.0 + beta / 4.0;
    let x0 = 1.0 + beta / 4.0;
    if alpha == 1.0 {
        root_pi * (x / x0).powf(-beta / 2.0)
    } else {
        let e = 1.0 - 1.0 / alpha;
        let b = (beta / 2.0).powf(1.0 / alpha);
        root_pi * (-b * (x.powf(e) - x0.powf(e)) / e).exp()
    }
}

fn validate_beta_alpha(beta: f64, alpha: f64) -> Result<(), LabError> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(LabError::invalid("beta", format!("{beta} <= 0")));
    }
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(LabError::invalid("alpha", format!("{alpha} < 1")));
    }
    Ok(())
}

/// Parameters and derived constants for the term-decay bounds.
///
/// For `alpha > 1` the squared term norms decay subexponentially with
/// constant `C = 4 delta^{-2} Ctilde e^{2B} + 1`; at `alpha = 1` they obey
/// the power law with constant
/// `C0 = 12^{beta+3} (p/beta - 1)^{-(5+2beta)} (integral)^{(1-beta/p)/2}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayBoundParams {
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Measured `integral over the disk of exp(p K^alpha)`.
    pub exp_integral: f64,
    pub delta: f64,
    pub b: f64,
    pub big_b: f64,
    /// `C` for `alpha > 1`, `C0` for `alpha = 1`.
    pub constant: f64,
}

impl DecayBoundParams {
    pub fn new(p: f64, alpha: f64, beta: f64, exp_integral: f64) -> Result<Self, LabError> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(LabError::invalid("p", format!("{p} <= 0")));
        }
        if !(alpha >= 1.0) || !alpha.is_finite() {
            return Err(LabError::invalid("alpha", format!("{alpha} < 1")));
        }
        if !(beta >= p / 2.0 && beta < p) {
            return Err(LabError::invalid(
                "beta",
                format!("{beta} outside [p/2, p) = [{}, {})", p / 2.0, p),
            ));
        }
        if !exp_integral.is_finite() || exp_integral <= 0.0 {
            return Err(LabError::Hypothesis(format!(
                "exponential distortion integral {exp_integral} is not finite positive"
            )));
        }
        let delta = (p - beta) * (p - beta) / (beta * (p + beta));
        let b = (beta / 2.0).powf(1.0 / alpha);
        let (big_b, constant) = if alpha == 1.0 {
            let c0 = 12f64.powf(beta + 3.0)
                * (p / beta - 1.0).powf(-(5.0 + 2.0 * beta))
                * exp_integral.powf(0.5 * (1.0 - beta / p));
            (0.0, c0)
        } else {
            let c_tilde = 8.0 * p / (p - beta) * exp_integral.powf((p - beta) / (2.0 * p));
            let e = 1.0 - 1.0 / alpha;
            let big_b = (b / e * ((2.0 * b / delta).powf(alpha - 1.0) - (1.0 + beta / 4.0).powf(e)))
                .max(0.0);
            let c = 4.0 / (delta * delta) * c_tilde * (2.0 * big_b).exp() + 1.0;
            (big_b, c)
        };
        Ok(DecayBoundParams {
            p,
            alpha,
            beta,
            exp_integral,
            delta,
            b,
            big_b,
            constant,
        })
    }

    /// Midpoint of the admissible beta range.
    pub fn with_default_beta(p: f64, alpha: f64, exp_integral: f64) -> Result<Self, LabError> {
        Self::new(p, alpha, 0.75 * p, exp_integral)
    }

    /// Analytic upper bound for the squared norm of term `n`.
    pub fn decay_bound(&self, n: u32) -> f64 {
        let x = n as f64 + self.beta / 4.0 + 1.0;
        let x0 = self.beta / 4.0 + 1.0;
        if self.alpha == 1.0 {
            self.constant * (x / x0).powf(-self.beta)
        } else {
            let e = 1.0 - 1.0 / self.alpha;
            self.constant * (-2.0 * self.b * (x.powf(e) - x0.powf(e)) / e).exp()
        }
    }

    /// Chebyshev bound on the step-`n` bad-set measure.
    pub fn chebyshev_bound(&self, n: u32) -> f64 {
        self.exp_integral * (-4.0 * n as f64 * self.p / self.beta).exp()
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct VerificationRow {
    pub n: u32,
    pub term_norm_sq: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayVerification {
    pub rows: Vec<VerificationRow>,
    /// Least-squares slope of `log ||psi_n||^2` against `log n` (n >= 1).
    pub slope: f64,
    pub r_squared: f64,
    pub all_pass: bool,
}

/// Compare measured squared term norms against the analytic bound, with an
/// additive tolerance for discretization error.
pub fn verify_decay(
    report: &NeumannDecayReport,
    params: &DecayBoundParams,
    tolerance: f64,
) -> DecayVerification {
    let mut rows = Vec::with_capacity(report.term_norms.len());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (n, &norm) in report.term_norms.iter().enumerate() {
        let sq = norm * norm;
        let bound = params.decay_bound(n as u32);
        rows.push(VerificationRow {
            n: n as u32,
            term_norm_sq: sq,
            bound,
            pass: sq <= bound + tolerance,
        });
        if n >= 1 && sq > 0.0 {
            xs.push((n as f64).ln());
            ys.push(sq.ln());
        }
    }
    let fit = if xs.len() >= 2 {
        ols_fit(&xs, &ys)
    } else {
        LineFit {
            slope: f64::NAN,
            intercept: f64::NAN,
            r_squared: f64::NAN,
        }
    };
    let all_pass = rows.iter().all(|r| r.pass);
    DecayVerification {
        rows,
        slope: fit.slope,
        r_squared: fit.r_squared,
        all_pass,
    }
}

/// Write the per-term decay table. Optional columns are left empty when
/// the report does not carry them.
pub fn write_decay_csv<W: Write>(
    out: W,
    report: &NeumannDecayReport,
    params: &DecayBoundParams,
    tolerance: f64,
) -> Result<(), LabError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n",
        "term_norm_sq",
        "good_term_norm_sq",
        "bad_set_measure",
        "chebyshev_bound",
        "decay_bound",
        "pass",
    ])?;
    for (n, &norm) in report.term_norms.iter().enumerate() {
        let sq = norm * norm;
        let bound = params.decay_bound(n as u32);
        let good = report
            .good_term_norms
            .as_ref()
            .and_then(|v| v.get(n))
            .map(|g| format!("{:.12e}", g * g))
            .unwrap_or_default();
        let bad = report
            .bad_set_measures
            .as_ref()
            .and_then(|v| v.get(n))
            .map(|m| format!("{m:.12e}"))
            .unwrap_or_default();
        w.write_record([
            n.to_string(),
            format!("{sq:.12e}"),
            good,
            bad,
            format!("{:.12e}", params.chebyshev_bound(n as u32)),
            format!("{bound:.12e}"),
            (sq <= bound + tolerance).to_string(),
        ])?;
    }
    w.flush().map_err(LabError::Io)?;
    Ok(())
}

/// Full JSON document with the report and the parameters that judged it.
pub fn decay_document_json(
    report: &NeumannDecayReport,
    params: &DecayBoundParams,
) -> String {
    serde_json::json!({ "report": report, "params": params }).to_string()
}
