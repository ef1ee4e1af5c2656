//! Calibrated tolerances shared by the verification suites and the runner.
//!
//! Every constant here guards one named check and was pinned against values
//! measured at the reference resolutions (n = 256 and n = 1024, side 4).
//! The margins are wide enough that a correct build passes on any machine
//! with strict IEEE doubles, and tight enough that a real regression trips.
//! Tests and the command-line runner must take these from here rather than
//! inlining numbers, so a recalibration is one edit.

/// Relative slack for the L2 isometry of the singular operator on zero-mean
/// fields. Measured deviation is at the 1e-13 level; the margin covers
/// accumulation-order differences across FFT backends.
pub const OPERATOR_ISOMETRY_REL: f64 = 1e-6;

/// Minimum observed convergence order for the operator evaluated on the
/// disk indicator against the lattice-corrected closed form, fitted over a
/// dyadic resolution ladder. First-order is the theoretical rate for a
/// discontinuous input; measured orders sit near 1.0 once the comparison
/// excludes the disk boundary band and the far-corner region where the
/// truncated lattice correction itself is the larger error.
pub const OPERATOR_ORDER_MIN: f64 = 1.0;

/// Relative L2 error inside the unit disk between the solved K = 2 power
/// map and its closed form at n = 1024. Scales like the first power of the
/// cell size; measured about 5e-4 at this resolution.
pub const POWER_MAP_REL_L2: f64 = 1e-3;

/// Largest distortion sup (1 + |mu|)/(1 - |mu|) at which the closed-form
/// comparison is still held to the rate above. Past this the error
/// concentrates at the degenerate point and decays sublinearly in the cell
/// size, so the comparison is reported but not enforced.
pub const CLOSED_FORM_DISTORTION_MAX: f64 = 4.0;

/// Additive discretization slack for termwise series decay bounds, in units
/// of the squared L2 norm. Covers the quadrature error of band-limited term
/// norms at n = 1024; the analytic constants in those bounds are so large
/// that this only matters when a bound is nearly saturated.
pub const DECAY_NORM_SQ_TOL: f64 = 1e-2;

/// The fitted log-log slope of the squared term norms must be at most the
/// decay exponent times this factor. Discretization flattens the observed
/// slope; 0.85 is the calibrated fraction retained at n = 1024.
pub const DECAY_SLOPE_FACTOR: f64 = 0.85;

/// Width, in cells, of the boundary band allowed when comparing a pixelized
/// threshold-set measure against the exact disk measure of its radial
/// oracle. The pixelization error of a disk of radius r is at most a band
/// of this width times the perimeter.
pub const BAD_SET_BAND_CELLS: f64 = 4.0;

/// Additive margin on the image-area-to-bound ratio for the power-map
/// quasiconformal area check, whose exact sup ratio is 1/sqrt(2). Covers
/// the Jacobian quadrature error on few-cell disks.
pub const EH_RATIO_MARGIN: f64 = 0.05;

/// Largest admissible absolute slope for the stabilized area product
/// |f(E_k)| log^p(1 + 1/|E_k|) over the last decade of a shrinking sweep.
/// A genuinely divergent or vanishing product shows slopes an order of
/// magnitude larger.
pub const AREA_PRODUCT_SLOPE_MAX: f64 = 0.05;

/// Minimum R^2 for the linear shape fit of -log|f(E_k)| against the
/// predicted power of log(1/|E_k|).
pub const SHAPE_FIT_R2_MIN: f64 = 0.98;

/// A truncation sequence counts as convergent when its tail increment
/// falls below this fraction of the running value.
pub const TAIL_INCREMENT_REL: f64 = 1e-3;

/// Fitted decay exponent of per-octave increments above which a truncation
/// ladder is called divergent. Increments of a log-log divergent integral
/// decay exactly harmonically; log corrections bias the measured slope a
/// few percent above -1, so the line sits at -1.1.
pub const OCTAVE_DIVERGENT_SLOPE_MIN: f64 = -1.1;

/// Fitted decay exponent below which octave increments are summable with
/// margin and the ladder is called convergent even though the tail has not
/// yet settled. Between this and the divergence line the verdict stays
/// open.
pub const OCTAVE_CONVERGENT_SLOPE_MAX: f64 = -1.3;

/// Relative slack between a fitted growth rate and the rate predicted by
/// the radial closed form.
pub const GROWTH_RATE_REL: f64 = 0.10;

/// Largest admissible fitted slope of log I(eps) against log(1/eps) for
/// the damped-energy sweep on 2D grid fields. The analytic exponent is 4;
/// the extra 0.2 absorbs fit noise on an eight-point geometric grid.
pub const SWEEP_SLOPE_2D_MAX: f64 = 4.2;

/// Same sweep evaluated through the radial quadrature oracle, where no
/// grid noise exists and the conjectured exponent is 1.
pub const SWEEP_SLOPE_RADIAL_MAX: f64 = 1.2;

/// The scaled conclusion moments eta * B(eta) of the weight conversion
/// check may grow by at most this factor toward small eta.
pub const CONVERSION_VARIATION_MAX: f64 = 1.2;

/// Rearrangement equimeasurability is checked at quantiles to this many
/// cell areas of set measure.
pub const QUANTILE_CELLS: f64 = 1.0;

/// Floor for the pointwise Jacobian of a solved map: J >= -this. Negative
/// values come from ringing at the coefficient truncation radius and the
/// disk boundary; calibrated on capped catalog coefficients at n >= 256.
pub const JACOBIAN_FLOOR: f64 = 5e-2;

/// Slack for the total image area of the disk, integral of J over the unit
/// disk <= pi + this, same ringing budget as [`JACOBIAN_FLOOR`].
pub const DISK_AREA_EXCESS: f64 = 0.1;

/// The epsilon exponent attained by the Jacobian energy majorant must not
/// exceed the analytic value 4 by more than fit noise.
pub const ENERGY_EXPONENT_MAX: f64 = 4.0 + 0.2;

/// Tolerance classes stamped into runner output rows, naming which kind of
/// slack the row's pass verdict used.
pub mod class {
    /// Floating-point identities: determinism, exact cancellations.
    pub const EXACT: &str = "exact";
    /// Discretization-limited comparisons that tighten under refinement.
    pub const GRID: &str = "grid";
    /// Analytic inequalities checked with a calibrated additive slack.
    pub const BOUND: &str = "bound";
    /// Regression readings: fitted slopes, growth rates, R^2 thresholds.
    pub const FIT: &str = "fit";
    /// Adaptive quadrature values, 1e-8 relative.
    pub const QUAD: &str = "quad";
}
