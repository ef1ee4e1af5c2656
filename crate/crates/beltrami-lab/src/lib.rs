// Validation guards write `!(x > 0.0)` on purpose: the negation rejects
// NaN, which the suggested `x <= 0.0` would wave through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Numerical laboratory for planar Beltrami equations whose coefficient may
//! degenerate, i.e. `|mu| -> 1` somewhere inside the unit disk.
//!
//! The crate discretizes the plane by a large periodic square so that the
//! Beurling transform becomes a Fourier multiplier, solves the equation
//! `dbar f = mu * df` through the Neumann series for `omega = dbar f`, and
//! evaluates the energy functionals, decay estimates and image-area bounds
//! that control such mappings. Radially symmetric model maps are available
//! in closed form and double as oracles for the grid pipeline.
//!
//! Layout:
//! - [`grid`]: periodic sampling grids, cell sets, norms, serialization.
//! - [`beurling`]: FFT-based Beurling and Cauchy transforms.
//! - [`oracle`]: closed-form values of those transforms on the disk
//!   indicator, including lattice (periodization) corrections.
//! - [`neumann`]: coefficient truncation, the series solver, and decay
//!   diagnostics for the series terms.
//! - [`radial`]: radial model homeomorphisms evaluated in log coordinates.
//! - [`functionals`]: weighted energy integrals, rearrangements, and
//!   integral comparison checks.
//! - [`area`]: image-area measurements and bounds for distorted sets.
//! - [`tolerances`]: the calibrated slack every check takes its numbers from.
//! - [`quad`], [`stats`]: adaptive quadrature and small numeric helpers.

pub mod area;
pub mod beurling;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod neumann;
pub mod oracle;
pub mod quad;
pub mod radial;
pub mod stats;
pub mod tolerances;

pub use error::LabError;
