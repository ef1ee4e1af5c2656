//! Radial model homeomorphisms `f(z) = (z/|z|) phi(|z|)` of the unit disk.
//!
//! Every profile is defined through its log-derivative ratio
//! `rho(r) = r phi'(r) / phi(r)` and evaluated in the log coordinate
//! `t = log(1/r)`, where the degenerate region `r -> 0` becomes `t -> inf`
//! and nothing underflows until it genuinely leaves the double range. The
//! chain rule gives `d(log phi)/dt = -rho`, and all map data comes from the
//! pair `(log phi, rho)`:
//!
//! - `df   = (phi/r)(1 + rho)/2`        (real and positive),
//! - `dbar = e^{2 i theta} (phi/r)(rho - 1)/2`,
//! - `J    = rho (phi/r)^2`,
//! - `|mu| = |1 - rho|/(1 + rho)`,  `K = max(rho, 1/rho)`.
//!
//! Profiles are normalized to `phi(1) = 1` and extended by the identity
//! outside the disk, which is exactly the normalization the principal
//! solution of the Beltrami equation picks for a compactly supported radial
//! coefficient. Integrals over the disk are `2 pi * integral of
//! (integrand) e^{-2t} dt`, evaluated by adaptive quadrature in `t`.

use num_complex::Complex64;

use crate::error::LabError;
use crate::functionals::WeightSpec;
use crate::quad;

const REL_TOL: f64 = 1e-9;
/// Quadrature switches from one adaptive panel to doubling panels past this
/// depth; see `integrate_depth`.
const PANEL_START: f64 = 64.0;

/// `log(1 + e)`, the value of the smoothed log at `t = 0`.
fn l0() -> f64 {
    std::f64::consts::E.ln_1p()
}

/// Smoothed log coordinate `L(t) = t + log(1 + e^{1-t})`: behaves like
/// `log(e + 1/r)` near `t = 0` but is exactly `t` once `e^{1-t}` underflows.
fn smooth_log(t: f64) -> f64 {
    t + (1.0 - t).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ProfileKind {
    /// `phi = r^{1/k}`: constant distortion `k`.
    Power { k: f64 },
    /// `phi = (L/L0)^{-p/2} (M/M0)^{-eps/2}` with `M = log L`: distortion
    /// grows like `(2/p) log(1/r)`, the borderline family for exponential
    /// distortion integrability.
    GEps { p: f64, eps: f64 },
    /// `log phi = (2/gamma)(L0^gamma - L^gamma)`, `gamma = 1 - 1/alpha`:
    /// distortion grows like `(log(1/r))^{1/alpha} / 2`, the extremal shape
    /// for weights built from `exp(log^beta)`.
    AlphaSharp { alpha: f64 },
    /// The identity map.
    Identity,
}

/// A radial stretch map of the unit disk, identity outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialProfile {
    kind: ProfileKind,
}

/// Pointwise map data produced by [`RadialProfile::fields_at`].
#[derive(Debug, Clone, Copy)]
pub struct MapSample {
    pub f: Complex64,
    pub d: Complex64,
    pub dbar: Complex64,
    pub jacobian: f64,
}

/// One row of [`RadialProfile::annuli_bound_table`].
#[derive(Debug, Clone, Copy)]
pub struct AnnulusBoundRow {
    pub n: u32,
    pub radius: f64,
    /// `phi(e^{-n})`, the measured image radius.
    pub image_radius: f64,
    /// The chained modulus bound on that image radius.
    pub bound: f64,
    /// `bound * n^{p/2}`; its maximum over `n` is the empirical constant.
    pub scaled_bound: f64,
}

impl RadialProfile {
    pub fn power(k: f64) -> Result<Self, LabError> {
        if !(k >= 1.0) || !k.is_finite() {
            return Err(LabError::invalid("k", format!("{k} < 1")));
        }
        Ok(RadialProfile {
            kind: ProfileKind::Power { k },
        })
    }

    pub fn g_eps(p: f64, eps: f64) -> Result<Self, LabError> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(LabError::invalid("p", format!("{p} <= 0")));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(LabError::invalid("eps", format!("{eps} <= 0")));
        }
        Ok(RadialProfile {
            kind: ProfileKind::GEps { p, eps },
        })
    }

    pub fn alpha_sharp(alpha: f64) -> Result<Self, LabError> {
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(LabError::invalid("alpha", format!("{alpha} <= 1")));
        }
        Ok(RadialProfile {
            kind: ProfileKind::AlphaSharp { alpha },
        })
    }

    pub fn identity() -> Self {
        RadialProfile {
            kind: ProfileKind::Identity,
        }
    }

    pub fn describe(&self) -> String {
        match self.kind {
            ProfileKind::Power { k } => format!("power(k={k})"),
            ProfileKind::GEps { p, eps } => format!("g_eps(p={p}, eps={eps})"),
            ProfileKind::AlphaSharp { alpha } => format!("alpha_sharp(alpha={alpha})"),
            ProfileKind::Identity => "identity".into(),
        }
    }

    /// `log phi` at `t = log(1/r)`, normalized so the value at `t = 0` is 0.
    pub fn log_phi(&self, t: f64) -> f64 {
        match self.kind {
            ProfileKind::Power { k } => -t / k,
            ProfileKind::GEps { p, eps } => {
                let l = smooth_log(t);
                let m = l.ln();
                -0.5 * p * (l / l0()).ln() - 0.5 * eps * (m / l0().ln()).ln()
            }
            ProfileKind::AlphaSharp { alpha } => {
                let gamma = 1.0 - 1.0 / alpha;
                let l = smooth_log(t);
                (2.0 / gamma) * (l0().powf(gamma) - l.powf(gamma))
            }
            ProfileKind::Identity => -t,
        }
    }

    /// `rho(t) = r phi'/phi`; always in `(0, 1]` for the catalog profiles.
    pub fn ratio(&self, t: f64) -> f64 {
        match self.kind {
            ProfileKind::Power { k } => 1.0 / k,
            ProfileKind::GEps { p, eps } => {
                let l = smooth_log(t);
                let m = l.ln();
                let er = (1.0 - t).exp();
                (p * m + eps) / (2.0 * l * m * (1.0 + er))
            }
            ProfileKind::AlphaSharp { alpha } => {
                let gamma = 1.0 - 1.0 / alpha;
                let l = smooth_log(t);
                let er = (1.0 - t).exp();
                2.0 * l.powf(gamma - 1.0) / (1.0 + er)
            }
            ProfileKind::Identity => 1.0,
        }
    }

    pub fn phi(&self, r: f64) -> f64 {
        if r >= 1.0 {
            r
        } else {
            self.log_phi((1.0 / r).ln()).exp()
        }
    }

    /// Distortion `K(t) = max(rho, 1/rho)`.
    pub fn distortion(&self, t: f64) -> f64 {
        let rho = self.ratio(t);
        rho.max(1.0 / rho)
    }

    /// `|mu|(t) = |1 - rho| / (1 + rho)`.
    pub fn mu_abs(&self, t: f64) -> f64 {
        let rho = self.ratio(t);
        (1.0 - rho).abs() / (1.0 + rho)
    }

    /// The Beltrami coefficient of the map as a function on the plane:
    /// `mu(z) = (z / conj(z)) (rho - 1)/(rho + 1)` inside the disk, `0`
    /// outside.
    pub fn beltrami(&self, z: Complex64) -> Complex64 {
        let r = z.norm();
        if r >= 1.0 || r == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let rho = self.ratio((1.0 / r).ln());
        (z / z.conj()) * ((rho - 1.0) / (rho + 1.0))
    }

    /// Map value and first derivatives at `z`; identity data outside the
    /// disk. At `z = 0` the derivatives of a degenerate profile have no
    /// finite limit, so the origin returns the fixed point with zero
    /// derivative data; grids sample cell centers and never hit it.
    pub fn fields_at(&self, z: Complex64) -> MapSample {
        let r = z.norm();
        if r >= 1.0 {
            return MapSample {
                f: z,
                d: Complex64::new(1.0, 0.0),
                dbar: Complex64::new(0.0, 0.0),
                jacobian: 1.0,
            };
        }
        if r == 0.0 {
            return MapSample {
                f: Complex64::new(0.0, 0.0),
                d: Complex64::new(0.0, 0.0),
                dbar: Complex64::new(0.0, 0.0),
                jacobian: 0.0,
            };
        }
        let t = (1.0 / r).ln();
        let rho = self.ratio(t);
        // scale = phi/r; f = e^{i theta} phi = z * scale.
        let scale = (self.log_phi(t) + t).exp();
        MapSample {
            f: z * scale,
            d: Complex64::new(scale * (1.0 + rho) * 0.5, 0.0),
            dbar: (z / z.conj()) * (scale * (rho - 1.0) * 0.5),
            jacobian: rho * scale * scale,
        }
    }

    /// Integral of the weight over the annulus `e^{-t_max} < |z| < 1`,
    /// evaluated entirely in the log coordinate. `t_max` may be infinite
    /// (the full punctured disk) or enormous; radii are never materialized,
    /// so depths far beyond `1/f64::MIN_POSITIVE` are fine. A divergent
    /// combination overflows to `inf`, which is the honest answer.
    pub fn weighted_integral_to_depth(&self, w: &WeightSpec, t_max: f64) -> f64 {
        let f = |t: f64| w.log_density_radial(self.log_phi(t), t, self.ratio(t)).exp();
        std::f64::consts::TAU * integrate_depth(f, t_max)
    }

    /// [`Self::weighted_integral_to_depth`] parameterized by inner radius.
    pub fn weighted_integral(&self, w: &WeightSpec, r_inner: f64) -> f64 {
        self.weighted_integral_to_depth(w, (1.0 / r_inner).ln())
    }

    /// `integral over the disk of exp(p K^alpha)`, restricted to
    /// `|z| > e^{-t_max}`.
    pub fn exp_distortion_integral(&self, p: f64, alpha: f64, t_max: f64) -> f64 {
        let f = |t: f64| {
            let k = self.distortion(t);
            (p * k.powf(alpha) - 2.0 * t).exp()
        };
        std::f64::consts::TAU * integrate_depth(f, t_max)
    }

    /// `integral over (0,1) of (e^{p rho} + e^{p K}) r dr`: the quantity
    /// whose logarithm drives the chained annuli bound.
    pub fn condition_integral(&self, p: f64) -> f64 {
        // Exponents are combined before exponentiating: exp(p/rho) alone
        // overflows long before the integrand stops being tiny.
        let f = |t: f64| {
            let rho = self.ratio(t);
            (p * rho - 2.0 * t).exp() + (p / rho - 2.0 * t).exp()
        };
        integrate_depth(f, f64::INFINITY)
    }

    /// Area of the image of the annulus `r_in < |z| < r_out`, measured by
    /// integrating the Jacobian in the log coordinate. `r_in = 0` gives the
    /// image of the punctured disk of radius `r_out`.
    pub fn image_area(&self, r_in: f64, r_out: f64) -> Result<f64, LabError> {
        if !(0.0..=1.0).contains(&r_in) || !(0.0..=1.0).contains(&r_out) || r_in >= r_out {
            return Err(LabError::invalid(
                "radii",
                format!("need 0 <= r_in < r_out <= 1, got ({r_in}, {r_out})"),
            ));
        }
        let t_out = (1.0 / r_out).ln();
        // 2 pi * integral of J r dr = 2 pi * integral of rho phi^2 dt.
        let f = |t: f64| self.ratio(t) * (2.0 * self.log_phi(t)).exp();
        let value = if r_in == 0.0 {
            if t_out < PANEL_START {
                quad::adaptive(f, t_out, PANEL_START, REL_TOL)
                    + quad::integrate_tail(f, PANEL_START, REL_TOL)
            } else {
                quad::integrate_tail(f, t_out, REL_TOL)
            }
        } else {
            quad::adaptive(f, t_out, (1.0 / r_in).ln(), REL_TOL)
        };
        Ok(std::f64::consts::TAU * value)
    }

    /// Exact image area of the disk `|z| < r`: `pi phi(r)^2`.
    pub fn disk_image_area_exact(&self, r: f64) -> f64 {
        std::f64::consts::PI * (2.0 * self.log_phi((1.0 / r).ln())).exp()
    }

    /// Chained modulus bounds for the images of the disks `|z| < e^{-n}`.
    ///
    /// With `c = log(condition_integral(p))`, the chain over unit annuli
    /// gives `phi(e^{-n}) <= prod over k = 1..n of exp(-p / (c + 2k))`,
    /// which decays like `n^{-p/2}`; `scaled_bound` divides that rate out.
    pub fn annuli_bound_table(&self, p: f64, n_max: u32) -> Vec<AnnulusBoundRow> {
        let c = self.condition_integral(p).ln();
        let mut rows = Vec::with_capacity(n_max as usize);
        let mut log_bound = 0.0;
        for n in 1..=n_max {
            log_bound -= p / (c + 2.0 * n as f64);
            rows.push(AnnulusBoundRow {
                n,
                radius: (-(n as f64)).exp(),
                image_radius: self.log_phi(n as f64).exp(),
                bound: log_bound.exp(),
                scaled_bound: (log_bound + 0.5 * p * (n as f64).ln()).exp(),
            });
        }
        rows
    }

    /// Radius at which `phi` first drops to `level`, or `None` if it stays
    /// above it down to depth `t = 10^12`. `phi` is strictly decreasing in
    /// `t`, so bisection is safe.
    pub fn level_radius(&self, level: f64) -> Option<f64> {
        if !(0.0 < level && level <= 1.0) {
            return None;
        }
        if level == 1.0 {
            return Some(1.0);
        }
        let target = level.ln();
        let t = bisect_increasing(|t| -self.log_phi(t), -target)?;
        Some((-t).exp())
    }

    /// Radius below which `|mu| > threshold`, i.e. the radius of the
    /// degenerate "bad set" for that threshold.
    ///
    /// Returns `Some(1.0)` when even the boundary value exceeds the
    /// threshold (the whole disk is bad) and `None` when the threshold is
    /// never reached. Valid for profiles whose `|mu|` is eventually
    /// increasing in `t`, which covers the whole catalog.
    pub fn radius_where_mu_abs(&self, threshold: f64) -> Option<f64> {
        if !(0.0..1.0).contains(&threshold) {
            return None;
        }
        if self.mu_abs(0.0) >= threshold {
            return Some(1.0);
        }
        let t = bisect_increasing(|t| self.mu_abs(t), threshold)?;
        Some((-t).exp())
    }
}

/// Bisection for `g(t) = target` with `g` increasing past its last crossing;
/// expands the bracket geometrically before bisecting.
fn bisect_increasing(g: impl Fn(f64) -> f64, target: f64) -> Option<f64> {
    const T_CAP: f64 = 1e12;
    let mut hi = 1.0;
    while g(hi) < target {
        hi *= 2.0;
        if hi > T_CAP {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Integral of `f` over `(0, t_max)`: one adaptive panel up to
/// `PANEL_START`, then doubling panels (so a `t_max` of 2^34 costs ~30
/// panels, not a 2^34-wide interval handed to one recursion).
fn integrate_depth(f: impl Fn(f64) -> f64, t_max: f64) -> f64 {
    if t_max <= PANEL_START {
        return quad::adaptive(f, 0.0, t_max, REL_TOL);
    }
    if t_max.is_infinite() {
        return quad::adaptive(&f, 0.0, PANEL_START, REL_TOL)
            + quad::integrate_tail(&f, PANEL_START, REL_TOL);
    }
    let mut total = quad::adaptive(&f, 0.0, PANEL_START, REL_TOL);
    let mut lo = PANEL_START;
    while lo < t_max && total.is_finite() {
        let hi = (2.0 * lo).min(t_max);
        total += quad::adaptive(&f, lo, hi, REL_TOL);
        lo = hi;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_map_profile_is_elementary() {
        let p = RadialProfile::power(2.0).unwrap();
        assert_eq!(p.ratio(3.0), 0.5);
        assert!((p.phi(0.25) - 0.5).abs() < 1e-15);
        assert!((p.distortion(1.0) - 2.0).abs() < 1e-15);
        assert!((p.mu_abs(1.0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn profiles_are_normalized_at_the_boundary() {
        for prof in [
            RadialProfile::power(3.0).unwrap(),
            RadialProfile::g_eps(1.0, 0.5).unwrap(),
            RadialProfile::alpha_sharp(2.0).unwrap(),
            RadialProfile::identity(),
        ] {
            assert_eq!(prof.log_phi(0.0), 0.0, "{}", prof.describe());
        }
    }

    #[test]
    fn ratio_is_minus_d_log_phi() {
        // Finite-difference check of d(log phi)/dt = -rho for the two
        // nontrivial profiles.
        let h = 1e-6;
        for prof in [
            RadialProfile::g_eps(1.0, 0.5).unwrap(),
            RadialProfile::alpha_sharp(2.0).unwrap(),
        ] {
            for &t in &[0.5, 2.0, 10.0, 300.0] {
                let fd = (prof.log_phi(t + h) - prof.log_phi(t - h)) / (2.0 * h);
                assert!(
                    (fd + prof.ratio(t)).abs() < 1e-8,
                    "{} at t={t}: {fd} vs {}",
                    prof.describe(),
                    -prof.ratio(t)
                );
            }
        }
    }

    #[test]
    fn smooth_log_is_exact_for_deep_t() {
        assert_eq!(smooth_log(1e9), 1e9);
        assert!((smooth_log(0.0) - (1.0 + std::f64::consts::E).ln()).abs() < 1e-15);
    }

    #[test]
    fn beltrami_carries_the_double_phase() {
        let p = RadialProfile::power(2.0).unwrap();
        let z = Complex64::from_polar(0.5, 0.7);
        let mu = p.beltrami(z);
        // |mu| = (1 - 1/2)/(1 + 1/2) = 1/3 and arg REALmu = 2*0.7 + pi.
        assert!((mu.norm() - 1.0 / 3.0).abs() < 1e-15);
        let expected = Complex64::from_polar(1.0 / 3.0, 1.4 + std::f64::consts::PI);
        assert!((mu - expected).norm() < 1e-14);
        assert_eq!(p.beltrami(Complex64::new(1.2, 0.0)), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn map_fields_satisfy_beltrami_relation() {
        // dbar f = mu * df pointwise.
        for prof in [
            RadialProfile::g_eps(1.0, 0.5).unwrap(),
            RadialProfile::alpha_sharp(1.5).unwrap(),
        ] {
            let z = Complex64::from_polar(0.3, 2.0);
            let s = prof.fields_at(z);
            let mu = prof.beltrami(z);
            assert!((s.dbar - mu * s.d).norm() < 1e-13 * s.d.norm());
            // Jacobian identity |df|^2 - |dbar f|^2 = J.
            assert!((s.d.norm_sqr() - s.dbar.norm_sqr() - s.jacobian).abs() < 1e-12);
        }
    }

    #[test]
    fn image_area_matches_exact_form() {
        let prof = RadialProfile::g_eps(1.0, 0.5).unwrap();
        let measured = prof.image_area(0.0, 0.25).unwrap();
        let exact = prof.disk_image_area_exact(0.25);
        assert!(
            (measured - exact).abs() < 1e-9 * exact,
            "{measured} vs {exact}"
        );
        let ring = prof.image_area(0.25, 0.75).unwrap();
        let exact_ring = prof.disk_image_area_exact(0.75) - prof.disk_image_area_exact(0.25);
        assert!((ring - exact_ring).abs() < 1e-9 * exact_ring);
    }

    #[test]
    fn identity_has_unit_area() {
        let id = RadialProfile::identity();
        let a = id.image_area(0.0, 1.0).unwrap();
        assert!((a - std::f64::consts::PI).abs() < 1e-8);
    }

    #[test]
    fn level_radius_inverts_phi() {
        let prof = RadialProfile::g_eps(1.0, 0.5).unwrap();
        let r = prof.level_radius(0.5).unwrap();
        assert!((prof.phi(r) - 0.5).abs() < 1e-10);
        assert_eq!(prof.level_radius(1.0), Some(1.0));
        // The power map reaches any positive level; level 0 is invalid.
        assert_eq!(prof.level_radius(0.0), None);
    }

    #[test]
    fn mu_radius_of_constant_coefficient_profile() {
        let p = RadialProfile::power(2.0).unwrap();
        // |mu| = 1/3 everywhere: thresholds below that cover the disk,
        // thresholds above are never reached.
        assert_eq!(p.radius_where_mu_abs(0.2), Some(1.0));
        assert_eq!(p.radius_where_mu_abs(0.5), None);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(RadialProfile::power(0.5).is_err());
        assert!(RadialProfile::g_eps(0.0, 0.5).is_err());
        assert!(RadialProfile::g_eps(1.0, -1.0).is_err());
        assert!(RadialProfile::alpha_sharp(1.0).is_err());
    }

    #[test]
    fn annuli_bounds_dominate_image_radii() {
        let prof = RadialProfile::g_eps(1.0, 0.5).unwrap();
        let rows = prof.annuli_bound_table(1.0, 40);
        assert_eq!(rows.len(), 40);
        for row in &rows {
            assert!(
                row.image_radius <= row.bound,
                "n={}: phi={} > bound={}",
                row.n,
                row.image_radius,
                row.bound
            );
        }
        // The scaled bound settles instead of growing without bound.
        let last = rows.last().unwrap();
        let max_scaled = rows.iter().map(|r| r.scaled_bound).fold(0.0, f64::max);
        assert!(max_scaled < 2.0 * last.scaled_bound.max(rows[0].scaled_bound));
    }
}
