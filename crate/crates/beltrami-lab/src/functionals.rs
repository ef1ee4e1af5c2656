//! Weighted energy functionals and integral comparison checks.
//!
//! The weights all measure how much derivative mass a mapping carries once
//! the degeneracy of its coefficient is discounted, in one of two ways: by
//! dividing with a power of `log(e + K)`, or by damping with powers of
//! `1 - |mu|`. Each weight can be evaluated pointwise on grid fields and,
//! for radial model maps, in log coordinates where nothing overflows until
//! the integral is genuinely infinite.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::LabError;
use crate::grid::{ComplexGrid, PixelSet};
use crate::neumann::{BeltramiField, SolutionField};
use crate::stats::{ols_fit, pairwise_sum_by};

const E: f64 = std::f64::consts::E;

/// `log(e + x)` from `l = log(x)`, stable for any `l`.
pub(crate) fn log_e_plus_exp(l: f64) -> f64 {
    if l > 40.0 {
        // log(e + e^l) = l + log1p(e^{1-l}); the correction is below 1 ulp.
        l
    } else {
        (E + l.exp()).ln()
    }
}

/// `log(x + 10)` from `l = log(x)`, stable for any `l`.
pub(crate) fn log_10_plus_exp(l: f64) -> f64 {
    if l > 40.0 {
        l
    } else {
        (l.exp() + 10.0).ln()
    }
}

/// A pointwise weight on map derivatives. `|Df|` denotes the operator norm
/// `|df| + |dbar f|`, `K = (1 + |mu|)/(1 - |mu|)` the distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    /// `|Df|^2 / log^exponent(e + K)`: integrability of the derivative with
    /// the distortion discounted logarithmically. Small exponents diverge
    /// for degenerate maps, large ones converge; the crossover is the
    /// interesting regime.
    InvLogDistortion { exponent: f64 },
    /// `|Df|^2 log^{p-1}(e + |Df|) / (log log(|Df| + 10))^loglog_exponent`:
    /// the borderline Orlicz scale above square integrability.
    LogDerivLogLog { p: f64, loglog_exponent: f64 },
    /// `|Df|^2 exp(log^beta(e + |Df|))` for `0 < beta < 1`.
    ExpLogPower { beta: f64 },
    /// `(1 - |mu|)^eps |df|^2`: degeneracy-damped Dirichlet density.
    EpsPower { eps: f64 },
}

impl WeightSpec {
    pub fn validate(&self) -> Result<(), LabError> {
        match *self {
            WeightSpec::InvLogDistortion { exponent } => {
                if !(exponent > 0.0) || !exponent.is_finite() {
                    return Err(LabError::invalid("exponent", format!("{exponent} <= 0")));
                }
            }
            WeightSpec::LogDerivLogLog {
                p,
                loglog_exponent,
            } => {
                if !(p >= 1.0) || !p.is_finite() {
                    return Err(LabError::invalid("p", format!("{p} < 1")));
                }
                if !(loglog_exponent >= 0.0) || !loglog_exponent.is_finite() {
                    return Err(LabError::invalid(
                        "loglog_exponent",
                        format!("{loglog_exponent} < 0"),
                    ));
                }
            }
            WeightSpec::ExpLogPower { beta } => {
                if !(0.0 < beta && beta < 1.0) {
                    return Err(LabError::invalid("beta", format!("{beta} outside (0, 1)")));
                }
            }
            WeightSpec::EpsPower { eps } => {
                if !(eps > 0.0) || !eps.is_finite() {
                    return Err(LabError::invalid("eps", format!("{eps} <= 0")));
                }
            }
        }
        Ok(())
    }

    /// Pointwise weight from grid data. Grid fields stay in double range,
    /// so this is evaluated directly rather than in logs.
    pub fn evaluate(&self, d: Complex64, dbar: Complex64, mu_abs: f64) -> f64 {
        let op = d.norm() + dbar.norm();
        match *self {
            WeightSpec::InvLogDistortion { exponent } => {
                let k = (1.0 + mu_abs) / (1.0 - mu_abs);
                op * op / (E + k).ln().powf(exponent)
            }
            WeightSpec::LogDerivLogLog {
                p,
                loglog_exponent,
            } => {
                op * op * (E + op).ln().powf(p - 1.0)
                    / (op + 10.0).ln().ln().powf(loglog_exponent)
            }
            WeightSpec::ExpLogPower { beta } => op * op * (E + op).ln().powf(beta).exp(),
            WeightSpec::EpsPower { eps } => (1.0 - mu_abs).powf(eps) * d.norm_sqr(),
        }
    }

    /// Log of `weight * r^2`, the radial integrand against `dt`, from
    /// `log_phi = log phi(e^{-t})` and `ratio = r phi'/phi`.
    ///
    /// The derivative scale is `phi/r`, so the weight carries a factor
    /// `e^{2t}` that the area element cancels. The cancellation happens
    /// here in exact arithmetic: radial tails are integrated out to depths
    /// where `t` alone would swallow `log_phi` in floating point. `t`
    /// still enters the slowly varying log factors, where absolute error
    /// of a few ulps is harmless.
    pub fn log_density_radial(&self, log_phi: f64, t: f64, ratio: f64) -> f64 {
        // |Df| = (phi/r) max(1, rho); |df| = (phi/r)(1+rho)/2.
        let log_df_r = log_phi + ratio.max(1.0).ln();
        let log_df = log_df_r + t;
        match *self {
            WeightSpec::InvLogDistortion { exponent } => {
                let k = ratio.max(1.0 / ratio);
                2.0 * log_df_r - exponent * (E + k).ln().ln()
            }
            WeightSpec::LogDerivLogLog {
                p,
                loglog_exponent,
            } => {
                2.0 * log_df_r + (p - 1.0) * log_e_plus_exp(log_df).ln()
                    - loglog_exponent * log_10_plus_exp(log_df).ln().ln()
            }
            WeightSpec::ExpLogPower { beta } => {
                2.0 * log_df_r + log_e_plus_exp(log_df).powf(beta)
            }
            WeightSpec::EpsPower { eps } => {
                let one_minus_mu = 2.0 * ratio.min(1.0) / (1.0 + ratio);
                eps * one_minus_mu.ln() + 2.0 * (log_phi + ((1.0 + ratio) * 0.5).ln())
            }
        }
    }

    /// Log of the pointwise weight on radial map data; only safe while
    /// `2t` stays within float resolution of the result.
    pub fn log_value_radial(&self, log_phi: f64, t: f64, ratio: f64) -> f64 {
        self.log_density_radial(log_phi, t, ratio) + 2.0 * t
    }
}

/// Integrate a weight over the cells of `region`, given the derivative and
/// coefficient fields of a mapping.
pub fn weighted_integral_2d(
    w: &WeightSpec,
    d: &ComplexGrid,
    dbar: &ComplexGrid,
    mu: &ComplexGrid,
    region: &PixelSet,
) -> Result<f64, LabError> {
    d.check_same_grid(dbar)?;
    d.check_same_grid(mu)?;
    if region.descriptor() != d.descriptor() {
        return Err(LabError::GridMismatch("region on a different grid".into()));
    }
    let dv = d.values().as_slice().expect("standard layout");
    let bv = dbar.values().as_slice().expect("standard layout");
    let mv = mu.values().as_slice().expect("standard layout");
    let mask = region.mask();
    let sum = pairwise_sum_by(dv.len(), |i| {
        if mask[i] {
            w.evaluate(dv[i], bv[i], mv[i].norm())
        } else {
            0.0
        }
    });
    Ok(sum * d.descriptor().cell_area())
}

/// The damped-degeneracy coefficient family: `nu = (mu/|mu|) |mu|^{w + eps}`.
///
/// Raising `|mu|` to a power above 1 pulls the coefficient away from the
/// unit circle everywhere except where it was already degenerate, which
/// trades distortion growth for integrability. The exponent-one member is
/// returned as an exact copy.
pub fn family_coefficient(mu: &ComplexGrid, w: f64, eps: f64) -> Result<ComplexGrid, LabError> {
    if !(w >= 1.0) || !w.is_finite() {
        return Err(LabError::invalid("w", format!("{w} < 1")));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(LabError::invalid("eps", format!("{eps} < 0")));
    }
    let exponent = w + eps;
    if exponent == 1.0 {
        return Ok(mu.clone());
    }
    Ok(mu.map(|v| {
        let a = v.norm();
        if a == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            v * a.powf(exponent - 1.0)
        }
    }))
}

/// Default geometric epsilon grid for [`eps_sweep`]: eight points from 0.4
/// downward, three per octave.
pub fn default_eps_grid() -> Vec<f64> {
    (0..8).map(|j| 0.4 * 2f64.powf(-(j as f64) / 3.0)).collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpsSweepRow {
    pub eps: f64,
    pub integral: f64,
}

/// Result of [`eps_sweep`]: the damped energies and the fitted growth rate.
#[derive(Debug, Clone, Serialize)]
pub struct EpsSweepReport {
    pub rows: Vec<EpsSweepRow>,
    /// Slope of `log I(eps)` against `log(1/eps)`.
    pub slope: f64,
    pub r_squared: f64,
}

/// Evaluate `I(eps) = integral of (1 - |mu|)^eps |df|^2` over `region` for
/// each epsilon and fit the growth of `log I` against `log(1/eps)`.
pub fn eps_sweep(
    d: &ComplexGrid,
    mu: &ComplexGrid,
    region: &PixelSet,
    eps_list: &[f64],
) -> Result<EpsSweepReport, LabError> {
    d.check_same_grid(mu)?;
    if region.descriptor() != d.descriptor() {
        return Err(LabError::GridMismatch("region on a different grid".into()));
    }
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(LabError::invalid("eps_list", "need positive epsilons"));
    }
    let dv = d.values().as_slice().expect("standard layout");
    let mv = mu.values().as_slice().expect("standard layout");
    let mask = region.mask();
    let area = d.descriptor().cell_area();
    let rows: Vec<EpsSweepRow> = eps_list
        .iter()
        .map(|&eps| {
            let sum = pairwise_sum_by(dv.len(), |i| {
                if mask[i] {
                    (1.0 - mv[i].norm()).powf(eps) * dv[i].norm_sqr()
                } else {
                    0.0
                }
            });
            EpsSweepRow {
                eps,
                integral: sum * area,
            }
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| (1.0 / r.eps).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.integral.ln()).collect();
    let fit = ols_fit(&xs, &ys);
    Ok(EpsSweepReport {
        rows,
        slope: fit.slope,
        r_squared: fit.r_squared,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConversionRatioRow {
    pub eta: f64,
    /// `B(eta) = integral of h / log^{alpha+eta}(e + 1/W)`.
    pub log_moment: f64,
    /// `eta * B(eta)`, the quantity expected to stay of one magnitude.
    pub scaled: f64,
}

/// Result of [`weight_conversion_check`]; see there for the two metrics.
#[derive(Debug, Clone, Serialize)]
pub struct WeightConversionReport {
    /// `max over eps of A(eps) * eps^alpha`.
    pub hypothesis_constant: f64,
    /// Fitted slope of `log A(eps)` against `log(1/eps)`.
    pub hypothesis_slope: f64,
    /// Whether the fitted slope stays within `alpha + slope_margin`.
    pub hypothesis_ok: bool,
    pub ratio_rows: Vec<ConversionRatioRow>,
    /// `max scaled / scaled at the largest eta`: growth toward small eta.
    pub max_upward_variation: f64,
    /// `max scaled / min scaled` across all requested etas.
    pub total_variation: f64,
    /// Upward variation within 20 percent.
    pub bounded: bool,
}

/// Convert a power-type smallness hypothesis on a weight `W <= 1` into a
/// logarithmic moment bound, empirically.
///
/// Hypothesis: `A(eps) = integral of W^eps h <= C eps^{-alpha}`, probed by
/// fitting the growth rate of `A` on `eps_grid` and recording the constant.
/// Conclusion: `B(eta) = integral of h / log^{alpha+eta}(e + 1/W)` becomes
/// finite for every `eta > 0` with `eta * B(eta)` controlled by `C`. The
/// report carries two variation metrics for `eta * B(eta)`: growth toward
/// small eta (`max_upward_variation`, the boundedness claim) and the plain
/// spread (`total_variation`), which grows as eta sweeps through orders of
/// magnitude because the integrals converge to different limits.
#[allow(clippy::too_many_arguments)]
pub fn weight_conversion_check(
    w_values: &[f64],
    h_values: &[f64],
    cell_measure: f64,
    alpha: f64,
    eps_grid: &[f64],
    eta_list: &[f64],
    slope_margin: f64,
) -> Result<WeightConversionReport, LabError> {
    if w_values.len() != h_values.len() {
        return Err(LabError::invalid("w_values", "length mismatch with h_values"));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(LabError::invalid("alpha", format!("{alpha} <= 0")));
    }
    if eps_grid.is_empty() || eta_list.is_empty() {
        return Err(LabError::invalid("eps_grid", "need nonempty grids"));
    }
    if w_values.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
        return Err(LabError::invalid("w_values", "weights must lie in [0, 1]"));
    }

    let a_of = |eps: f64| -> f64 {
        let s = pairwise_sum_by(w_values.len(), |i| {
            if w_values[i] > 0.0 {
                w_values[i].powf(eps) * h_values[i]
            } else {
                0.0
            }
        });
        s * cell_measure
    };
    let a_vals: Vec<f64> = eps_grid.iter().map(|&e| a_of(e)).collect();
    let hypothesis_constant = eps_grid
        .iter()
        .zip(&a_vals)
        .map(|(&e, &a)| a * e.powf(alpha))
        .fold(0.0, f64::max);
    let xs: Vec<f64> = eps_grid.iter().map(|&e| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = a_vals.iter().map(|&a| a.ln()).collect();
    let fit = ols_fit(&xs, &ys);
    let hypothesis_ok = fit.slope <= alpha + slope_margin;

    let ratio_rows: Vec<ConversionRatioRow> = eta_list
        .iter()
        .map(|&eta| {
            let s = pairwise_sum_by(w_values.len(), |i| {
                if w_values[i] > 0.0 {
                    h_values[i] / (E + 1.0 / w_values[i]).ln().powf(alpha + eta)
                } else {
                    0.0
                }
            });
            let b = s * cell_measure;
            ConversionRatioRow {
                eta,
                log_moment: b,
                scaled: eta * b,
            }
        })
        .collect();

    let max_eta = eta_list.iter().cloned().fold(f64::MIN, f64::max);
    let scaled_at_max = ratio_rows
        .iter()
        .find(|r| r.eta == max_eta)
        .map(|r| r.scaled)
        .unwrap_or(f64::NAN);
    let max_scaled = ratio_rows.iter().map(|r| r.scaled).fold(0.0, f64::max);
    let min_scaled = ratio_rows
        .iter()
        .map(|r| r.scaled)
        .fold(f64::INFINITY, f64::min);
    let max_upward_variation = max_scaled / scaled_at_max;
    Ok(WeightConversionReport {
        hypothesis_constant,
        hypothesis_slope: fit.slope,
        hypothesis_ok,
        ratio_rows,
        max_upward_variation,
        total_variation: max_scaled / min_scaled,
        bounded: max_upward_variation <= crate::tolerances::CONVERSION_VARIATION_MAX,
    })
}

/// The decreasing rearrangement of a real grid field over a region: the
/// same multiset of values laid out as a step function on `(0, measure)`.
#[derive(Debug, Clone)]
pub struct Rearrangement {
    values: Vec<f64>,
    cell_area: f64,
    clipped: usize,
    /// prefix[i] = integral of the first i steps.
    prefix: Vec<f64>,
}

impl Rearrangement {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_area
    }

    /// Number of negative cells clipped to zero.
    pub fn clipped(&self) -> usize {
        self.clipped
    }

    pub fn total_measure(&self) -> f64 {
        self.values.len() as f64 * self.cell_area
    }

    /// Step-function value at measure coordinate `s`.
    pub fn value_at(&self, s: f64) -> f64 {
        if s < 0.0 {
            return f64::NAN;
        }
        let idx = (s / self.cell_area) as usize;
        self.values.get(idx).copied().unwrap_or(0.0)
    }

    /// Exact integral of the step function over `(0, x)`.
    pub fn partial_integral(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let full = ((x / self.cell_area) as usize).min(self.values.len());
        let mut total = self.prefix[full];
        if full < self.values.len() {
            total += (x - full as f64 * self.cell_area) * self.values[full];
        }
        total
    }

    /// Integral over the whole support; equals the integral of the original
    /// field up to the clipped cells.
    pub fn integral(&self) -> f64 {
        *self.prefix.last().unwrap()
    }
}

/// Sort the real parts of `field` over `region` into a decreasing
/// rearrangement.
///
/// Jacobians of discrete solutions can dip below zero on a few cells near
/// the degeneracy; those are clipped to zero and counted, and more than
/// 0.5 percent of them is treated as a broken input rather than noise.
pub fn decreasing_rearrangement(
    field: &ComplexGrid,
    region: &PixelSet,
) -> Result<Rearrangement, LabError> {
    if region.descriptor() != field.descriptor() {
        return Err(LabError::GridMismatch("region on a different grid".into()));
    }
    let fv = field.values().as_slice().expect("standard layout");
    let mask = region.mask();
    let mut values = Vec::with_capacity(region.count());
    let mut clipped = 0usize;
    for (i, &keep) in mask.iter().enumerate() {
        if !keep {
            continue;
        }
        let v = fv[i].re;
        if !v.is_finite() {
            return Err(LabError::Hypothesis(format!(
                "non-finite value {v} in rearrangement input"
            )));
        }
        if v < 0.0 {
            clipped += 1;
            values.push(0.0);
        } else {
            values.push(v);
        }
    }
    if clipped * 200 > values.len() {
        return Err(LabError::Hypothesis(format!(
            "{clipped} of {} cells negative; not a Jacobian-like field",
            values.len()
        )));
    }
    values.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite values"));
    let cell_area = field.descriptor().cell_area();
    let mut prefix = Vec::with_capacity(values.len() + 1);
    let mut acc = 0.0;
    prefix.push(0.0);
    for &v in &values {
        acc += v * cell_area;
        prefix.push(acc);
    }
    Ok(Rearrangement {
        values,
        cell_area,
        clipped,
        prefix,
    })
}

/// Result of [`hlp_check`].
#[derive(Debug, Clone, Serialize)]
pub struct HlpReport {
    /// `max over step boundaries x of (integral of h to x) / (g at x)`.
    pub max_partial_ratio: f64,
    pub hypothesis_holds: bool,
    /// `integral of gauge(h)` over the support of `h`.
    pub lhs: f64,
    /// `integral of gauge(g')` over the same interval.
    pub rhs: f64,
    pub conclusion_holds: bool,
}

/// Majorization check: if the partial integrals of a decreasing `h` are
/// dominated by those of an envelope (`integral of h to x <= g(x)` for all
/// `x`), then `integral of gauge(h) <= integral of gauge(g')` for every
/// convex increasing gauge. Both sides of both statements are evaluated:
/// the hypothesis exactly on the step function, the conclusion with the
/// substitution `t = u^2` so inverse square-root envelopes integrate
/// exactly.
pub fn hlp_check(
    h: &Rearrangement,
    g_integral: impl Fn(f64) -> f64,
    g_prime: impl Fn(f64) -> f64,
    gauge: impl Fn(f64) -> f64 + Copy,
) -> HlpReport {
    let total = h.total_measure();
    let mut max_ratio: f64 = 0.0;
    // Partial integrals of a step function against a concave envelope peak
    // at step boundaries; checking every boundary is exact enough and cheap.
    for i in 1..=h.values().len() {
        let x = i as f64 * h.cell_area();
        let g = g_integral(x);
        if g > 0.0 {
            max_ratio = max_ratio.max(h.partial_integral(x) / g);
        }
    }
    let lhs = pairwise_sum_by(h.values().len(), |i| gauge(h.values()[i])) * h.cell_area();
    // Inverse-power envelopes send g' to infinity at 0, so the transformed
    // integrand is singular (but integrable) at the left endpoint. Start a
    // hair inside; the clipped sliver carries O(lo log(1/lo)) mass, far
    // below the quadrature tolerance.
    let hi = total.sqrt();
    let lo = hi * 1e-12;
    let rhs = crate::quad::adaptive(|u| 2.0 * u * gauge(g_prime(u * u)), lo, hi, 1e-10);
    HlpReport {
        max_partial_ratio: max_ratio,
        hypothesis_holds: max_ratio <= 1.0,
        lhs,
        rhs,
        conclusion_holds: lhs <= rhs,
    }
}

/// One row of the Jacobian energy comparison: the squared operator-norm
/// energy of the map over the unit disk, the exponential-distortion majorant
/// `eps^{-4} integral exp((1 + eps) K)`, and their ratio.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct JacobianEnergyRow {
    pub eps: f64,
    /// `integral over the disk of (|df| + |dbar f|)^2`.
    pub energy: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Result of [`jacobian_energy_sweep`].
#[derive(Debug, Clone, Serialize)]
pub struct JacobianEnergyReport {
    pub rows: Vec<JacobianEnergyRow>,
    /// The epsilon power the energy actually needs in front of the
    /// exponential moment: 4 plus the fitted slope of `log ratio` against
    /// `log(1/eps)`. At most 4 when the majorant is honest, strictly less
    /// when the quartic prefactor is slack for this coefficient.
    pub attained_exponent: f64,
    pub r_squared: f64,
}

/// Compare the Dirichlet energy of a principal solution on the unit disk
/// with the exponential-distortion majorant `eps^{-4} integral exp((1+eps)K)`.
///
/// The distortion moment uses the truncated coefficient, which is the
/// distortion of the map the solver actually produced, so the bound is
/// finite whenever the solve was.
pub fn jacobian_energy_bound(
    sol: &SolutionField,
    field: &BeltramiField,
    eps: f64,
) -> Result<JacobianEnergyRow, LabError> {
    sol.d.check_same_grid(field.mu())?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(LabError::invalid("eps", format!("{eps} must be positive")));
    }
    let desc = sol.d.descriptor();
    let disk = PixelSet::disk(desc, Complex64::new(0.0, 0.0), 1.0);
    let dv = sol.d.values().as_slice().expect("standard layout");
    let bv = sol.dbar.values().as_slice().expect("standard layout");
    let mask = disk.mask();
    let energy = pairwise_sum_by(dv.len(), |i| {
        if mask[i] {
            let t = dv[i].norm() + bv[i].norm();
            t * t
        } else {
            0.0
        }
    }) * desc.cell_area();
    let bound = field.capped_exp_distortion_integral(1.0 + eps, 1.0) / eps.powi(4);
    Ok(JacobianEnergyRow {
        eps,
        energy,
        bound,
        ratio: energy / bound,
    })
}

/// Run [`jacobian_energy_bound`] across an epsilon grid and fit how the
/// ratio scales, estimating the epsilon exponent the energy bound attains.
pub fn jacobian_energy_sweep(
    sol: &SolutionField,
    field: &BeltramiField,
    eps_list: &[f64],
) -> Result<JacobianEnergyReport, LabError> {
    if eps_list.len() < 2 {
        return Err(LabError::invalid("eps_list", "need at least two epsilons"));
    }
    let rows: Vec<JacobianEnergyRow> = eps_list
        .iter()
        .map(|&eps| jacobian_energy_bound(sol, field, eps))
        .collect::<Result<_, _>>()?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in &rows {
        if r.ratio.is_finite() && r.ratio > 0.0 {
            xs.push((1.0 / r.eps).ln());
            ys.push(r.ratio.ln());
        }
    }
    let fit = ols_fit(&xs, &ys);
    Ok(JacobianEnergyReport {
        rows,
        attained_exponent: 4.0 + fit.slope,
        r_squared: fit.r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDescriptor;
    use crate::radial::RadialProfile;

    #[test]
    fn validation_catches_bad_parameters() {
        assert!(WeightSpec::InvLogDistortion { exponent: 0.0 }.validate().is_err());
        assert!(WeightSpec::LogDerivLogLog { p: 0.5, loglog_exponent: 0.0 }
            .validate()
            .is_err());
        assert!(WeightSpec::ExpLogPower { beta: 1.0 }.validate().is_err());
        assert!(WeightSpec::EpsPower { eps: -0.1 }.validate().is_err());
        assert!(WeightSpec::ExpLogPower { beta: 0.4 }.validate().is_ok());
    }

    #[test]
    fn log_helpers_agree_with_direct_evaluation() {
        for l in [-5.0f64, 0.0, 10.0, 39.5, 40.5, 100.0] {
            if l < 41.0 {
                let direct = (E + l.exp()).ln();
                assert!((log_e_plus_exp(l) - direct).abs() < 1e-12 * direct.max(1.0));
                let direct10 = (l.exp() + 10.0).ln();
                assert!((log_10_plus_exp(l) - direct10).abs() < 1e-12 * direct10.max(1.0));
            } else {
                assert_eq!(log_e_plus_exp(l), l);
            }
        }
    }

    #[test]
    fn radial_log_path_matches_pointwise_path() {
        // Same weight evaluated via grid data and via (log_scale, ratio)
        // must agree wherever the direct path stays finite.
        let prof = RadialProfile::g_eps(1.0, 0.5).unwrap();
        let weights = [
            WeightSpec::InvLogDistortion { exponent: 1.5 },
            WeightSpec::LogDerivLogLog { p: 2.0, loglog_exponent: 1.0 },
            WeightSpec::ExpLogPower { beta: 0.4 },
            WeightSpec::EpsPower { eps: 0.25 },
        ];
        for &r in &[0.9, 0.4, 0.05] {
            let z = Complex64::from_polar(r, 1.1);
            let s = prof.fields_at(z);
            let t = (1.0 / r).ln();
            let mu_abs = prof.mu_abs(t);
            for w in &weights {
                let direct = w.evaluate(s.d, s.dbar, mu_abs).ln();
                let logged = w.log_value_radial(prof.log_phi(t), t, prof.ratio(t));
                assert!(
                    (direct - logged).abs() < 1e-10 * direct.abs().max(1.0),
                    "{w:?} at r={r}: {direct} vs {logged}"
                );
            }
        }
    }

    #[test]
    fn family_exponent_one_is_exact_copy() {
        let d = GridDescriptor::new(32, 4.0).unwrap();
        let mu = ComplexGrid::sample(d, |z| {
            if z.norm() < 1.0 {
                Complex64::new(0.3, 0.4)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let nu = family_coefficient(&mu, 1.0, 0.0).unwrap();
        assert_eq!(nu, mu);
        let nu2 = family_coefficient(&mu, 1.0, 1.0).unwrap();
        // |mu| = 0.5 -> |nu| = 0.25, phase preserved.
        let v = nu2.get(16, 16);
        assert!((v.norm() - 0.25).abs() < 1e-12);
        assert!((v.arg() - mu.get(16, 16).arg()).abs() < 1e-12);
        assert!(family_coefficient(&mu, 0.5, 0.0).is_err());
    }

    #[test]
    fn eps_sweep_of_flat_field_has_zero_slope() {
        let d = GridDescriptor::new(32, 4.0).unwrap();
        let one = ComplexGrid::sample(d, |_| Complex64::new(1.0, 0.0));
        let zero = ComplexGrid::zeros(d);
        let disk = PixelSet::disk(d, Complex64::new(0.0, 0.0), 1.0);
        let report = eps_sweep(&one, &zero, &disk, &default_eps_grid()).unwrap();
        assert!(report.slope.abs() < 1e-12);
        for row in &report.rows {
            assert!((row.integral - disk.measure()).abs() < 1e-12);
        }
    }

    #[test]
    fn conversion_check_flags_a_false_hypothesis() {
        // W = 1 - r, h = 1/(1 - r) on (0,1): A(eps) = 1/eps, so the true
        // growth exponent is 1. Claiming alpha = 0.2 must be flagged.
        let n = 4000;
        let mut w = Vec::with_capacity(n);
        let mut h = Vec::with_capacity(n);
        for i in 0..n {
            let r = (i as f64 + 0.5) / n as f64;
            w.push(1.0 - r);
            h.push(1.0 / (1.0 - r));
        }
        // Epsilons stay moderate so the 4000-cell grid still resolves the
        // near-degenerate mass that drives A(eps).
        let eps = [0.4, 0.3, 0.2, 0.15, 0.1];
        let eta = [1.0, 0.5, 0.25];
        let report =
            weight_conversion_check(&w, &h, 1.0 / n as f64, 0.2, &eps, &eta, 0.25).unwrap();
        assert!(!report.hypothesis_ok, "slope {}", report.hypothesis_slope);
        assert!(report.hypothesis_slope > 0.5);
    }

    #[test]
    fn rearrangement_is_equimeasurable_and_sorted() {
        let d = GridDescriptor::new(32, 4.0).unwrap();
        let f = ComplexGrid::sample(d, |z| Complex64::new((3.0 * z.re).sin().abs(), 0.0));
        let disk = PixelSet::disk(d, Complex64::new(0.0, 0.0), 1.0);
        let r = decreasing_rearrangement(&f, &disk).unwrap();
        assert_eq!(r.values().len(), disk.count());
        assert!(r.values().windows(2).all(|w| w[0] >= w[1]));
        let direct = f
            .integrate_over(&disk)
            .unwrap()
            .re;
        assert!((r.integral() - direct).abs() < 1e-12 * direct.max(1.0));
        assert_eq!(r.clipped(), 0);
    }

    #[test]
    fn rearrangement_rejects_sign_changing_fields() {
        let d = GridDescriptor::new(32, 4.0).unwrap();
        let f = ComplexGrid::sample(d, |z| Complex64::new(z.re, 0.0));
        let disk = PixelSet::disk(d, Complex64::new(0.0, 0.0), 1.0);
        assert!(decreasing_rearrangement(&f, &disk).is_err());
    }

    #[test]
    fn partial_integrals_interpolate_linearly() {
        let d = GridDescriptor::new(32, 4.0).unwrap();
        let f = ComplexGrid::sample(d, |_| Complex64::new(2.0, 0.0));
        let disk = PixelSet::disk(d, Complex64::new(0.0, 0.0), 1.0);
        let r = decreasing_rearrangement(&f, &disk).unwrap();
        let x = 0.3 * r.total_measure();
        assert!((r.partial_integral(x) - 2.0 * x).abs() < 1e-12);
        assert!((r.partial_integral(2.0 * r.total_measure()) - r.integral()).abs() < 1e-12);
    }

    #[test]
    fn hlp_detects_majorization() {
        // h identically 1 on (0, 1); envelope g' = 2 - t dominates partial
        // integrals; gauge x^2 convex increasing.
        let d = GridDescriptor::new(64, 4.0).unwrap();
        let f = ComplexGrid::sample(d, |_| Complex64::new(1.0, 0.0));
        // A square region of measure close to 1.
        let sq = PixelSet::from_fn(d, |z| z.re.abs() < 0.5 && z.im.abs() < 0.5);
        let h = decreasing_rearrangement(&f, &sq).unwrap();
        let report = hlp_check(
            &h,
            |x| 2.0 * x - 0.5 * x * x,
            |t| 2.0 - t,
            |x| x * x,
        );
        assert!(report.hypothesis_holds, "ratio {}", report.max_partial_ratio);
        assert!(report.conclusion_holds, "{} vs {}", report.lhs, report.rhs);
    }

    #[test]
    fn hlp_handles_envelopes_singular_at_zero() {
        // Square-root envelopes have g' blowing up at 0; the comparison
        // integral must still come out finite.
        let d = GridDescriptor::new(64, 4.0).unwrap();
        let f = ComplexGrid::sample(d, |_| Complex64::new(0.5, 0.0));
        let sq = PixelSet::from_fn(d, |z| z.re.abs() < 0.5 && z.im.abs() < 0.5);
        let h = decreasing_rearrangement(&f, &sq).unwrap();
        let report = hlp_check(
            &h,
            |x| 2.0 * x.sqrt(),
            |x| 1.0 / x.sqrt(),
            |x| x * (std::f64::consts::E + x).ln(),
        );
        assert!(report.rhs.is_finite(), "rhs {}", report.rhs);
        assert!(report.hypothesis_holds, "ratio {}", report.max_partial_ratio);
        assert!(report.conclusion_holds, "{} vs {}", report.lhs, report.rhs);
    }

    #[test]
    fn jacobian_energy_ratio_is_exact_for_the_identity() {
        // Zero coefficient: f = z, energy = |disk|, moment = |disk| e^{1+eps},
        // and the pixelized disk areas cancel in the ratio.
        let d = GridDescriptor::new(64, 4.0).unwrap();
        let field = crate::neumann::truncate_coefficient(&ComplexGrid::zeros(d), 0.5).unwrap();
        let (sol, _) = crate::neumann::neumann_solve(&field, 2, 0.0).unwrap();
        let row = jacobian_energy_bound(&sol, &field, 0.25).unwrap();
        let disk_area = PixelSet::disk(d, Complex64::new(0.0, 0.0), 1.0).measure();
        assert!((row.energy - disk_area).abs() < 1e-12 * disk_area);
        let expected = 0.25f64.powi(4) * (-1.25f64).exp();
        assert!(
            (row.ratio - expected).abs() < 1e-12 * expected,
            "ratio {} vs {}",
            row.ratio,
            expected
        );
    }

    #[test]
    fn energy_sweep_exponent_stays_at_or_below_four() {
        let d = GridDescriptor::new(128, 4.0).unwrap();
        let prof = RadialProfile::g_eps(1.0, 0.5).unwrap();
        let mu = ComplexGrid::sample(d, |z| prof.beltrami(z));
        let field = crate::neumann::truncate_coefficient(&mu, 1.0 - 2f64.powi(-6)).unwrap();
        let (sol, _) = crate::neumann::neumann_solve(&field, 30, 0.0).unwrap();
        let report =
            jacobian_energy_sweep(&sol, &field, &[0.4, 0.2, 0.1, 0.05]).unwrap();
        assert_eq!(report.rows.len(), 4);
        for w in report.rows.windows(2) {
            assert!((w[0].energy - w[1].energy).abs() < 1e-12 * w[0].energy);
            assert!(w[0].bound < w[1].bound, "majorant grows as eps shrinks");
        }
        assert!(
            report.attained_exponent <= 4.0 + 1e-9,
            "exponent {}",
            report.attained_exponent
        );
    }
}
