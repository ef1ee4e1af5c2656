//! Closed-form values of the Beurling and Cauchy transforms of the unit-disk
//! indicator, on the plane and on the periodic square.
//!
//! On the plane the transforms of `chi_D` are elementary: the Beurling
//! transform is `0` inside the disk and `-1/z^2` outside, the Cauchy
//! transform is `conj(z)` inside and `1/z` outside. On the torus every
//! periodic image of the disk contributes as well. Expanding the image
//! kernels around the origin turns the correction into a short polynomial
//! whose coefficients are lattice sums
//!
//! `G_w(side) = sum over m in Z^2, m != 0 of (side * (m1 + i m2))^{-w}`.
//!
//! Quarter-turn symmetry of the square lattice kills every weight that is
//! not a multiple of 4, so only `G_4, G_8, G_12, G_16` survive below degree
//! 16, and the corrections converge extremely fast inside `|z| <= side/2`.
//! The mean-zero convention of the discrete Cauchy transform contributes one
//! further term proportional to `conj(z)`, with the measured mean of the
//! sampled indicator (close to `pi / side^2`) as its coefficient.

use num_complex::Complex64;

/// Unit-lattice value of `G_4`, i.e. the fourth power of the lemniscate
/// constant divided by 15. The test module recomputes it by direct lattice
/// summation.
const G4_UNIT: f64 = 3.1512120021538976;

/// Lattice sum `G_w` over the square lattice of the given side, for
/// `w in {4, 8, 12, 16}`.
///
/// Direct summation converges too slowly for tight tolerances, so the higher
/// weights come from the classical recursion that expresses every `G_{2n}`
/// of the square lattice through `G_4` (all weights not divisible by 4
/// vanish by quarter-turn symmetry):
///
/// `7 G_8 = 3 G_4^2`, `143 G_12 = 42 G_4 G_8`,
/// `425 G_16 = 66 G_4 G_12 + 49 G_8^2`.
pub fn eisenstein_g(side: f64, weight: u32) -> f64 {
    let g4 = G4_UNIT;
    let g8 = 3.0 * g4 * g4 / 7.0;
    let unit = match weight {
        4 => g4,
        8 => g8,
        12 => 42.0 * g4 * g8 / 143.0,
        16 => {
            let g12 = 42.0 * g4 * g8 / 143.0;
            (66.0 * g4 * g12 + 49.0 * g8 * g8) / 425.0
        }
        _ => panic!("lattice sum only tabulated for weights 4, 8, 12, 16"),
    };
    unit / side.powi(weight as i32)
}

/// Degree-14 lattice correction polynomial for the Beurling transform of the
/// disk indicator. Valid for `|z| < side - 1`.
fn beurling_lattice_correction(z: Complex64, side: f64) -> Complex64 {
    let g4 = eisenstein_g(side, 4);
    let g8 = eisenstein_g(side, 8);
    let g12 = eisenstein_g(side, 12);
    let g16 = eisenstein_g(side, 16);
    let z2 = z * z;
    let z4 = z2 * z2;
    z2 * (3.0 * g4 + z4 * (7.0 * g8 + z4 * (11.0 * g12 + z4 * 15.0 * g16)))
}

/// Odd-degree lattice correction for the Cauchy transform of the disk
/// indicator. Truncated at degree 15 so that its `d`-derivative reproduces
/// [`beurling_lattice_correction`] term for term.
fn cauchy_lattice_correction(z: Complex64, side: f64) -> Complex64 {
    let g4 = eisenstein_g(side, 4);
    let g8 = eisenstein_g(side, 8);
    let g12 = eisenstein_g(side, 12);
    let g16 = eisenstein_g(side, 16);
    let z2 = z * z;
    let z4 = z2 * z2;
    z * z2 * (g4 + z4 * (g8 + z4 * (g12 + z4 * g16)))
}

/// Beurling transform of the unit-disk indicator on the plane.
pub fn disk_indicator_beurling_plane(z: Complex64) -> Complex64 {
    if z.norm() <= 1.0 {
        Complex64::new(0.0, 0.0)
    } else {
        -(z * z).inv()
    }
}

/// Cauchy transform of the unit-disk indicator on the plane.
pub fn disk_indicator_cauchy_plane(z: Complex64) -> Complex64 {
    if z.norm() <= 1.0 {
        z.conj()
    } else {
        z.inv()
    }
}

/// Beurling transform of the unit-disk indicator on the periodic square,
/// up to an additive constant fixed by the mean-zero output convention.
/// Compare against it after subtracting means from both sides.
pub fn disk_indicator_beurling_torus(z: Complex64, side: f64) -> Complex64 {
    disk_indicator_beurling_plane(z) - beurling_lattice_correction(z, side)
}

/// Cauchy transform of the unit-disk indicator on the periodic square.
///
/// `indicator_mean` is the mean of the sampled indicator over the square
/// (close to `pi / side^2`); the discrete transform solves `dbar F = chi -
/// mean`, which shows up as a `-mean * conj(z)` term. As with the Beurling
/// form, an additive constant remains free, so mean-match before comparing.
pub fn disk_indicator_cauchy_torus(z: Complex64, side: f64, indicator_mean: f64) -> Complex64 {
    disk_indicator_cauchy_plane(z) - indicator_mean * z.conj() - cauchy_lattice_correction(z, side)
}
