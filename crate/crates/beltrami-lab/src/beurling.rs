//! The Beurling and Cauchy transforms as Fourier multipliers on the
//! periodic square, plus a direct principal-value quadrature used to
//! cross-check them.
//!
//! Conventions. A field sampled on the grid is expanded in plane waves
//! `exp(2 pi i (k1 x + k2 y) / side)` with integer frequencies `k1, k2`.
//! Writing `xi = (k1 + i k2) / side`:
//!
//! - `dbar` acts as multiplication by `pi i xi`,
//! - `d` acts as multiplication by `pi i conj(xi)`,
//! - the Cauchy transform (the zero-mean inverse of `dbar`) as `1 / (pi i xi)`,
//! - the Beurling transform `d o dbar^{-1}` as `conj(xi) / xi`.
//!
//! The Beurling multiplier is unimodular away from frequency zero, so the
//! discrete transform is an exact isometry on zero-mean fields; this is the
//! property the Neumann solver leans on. Frequency zero is always sent to
//! zero. The Nyquist rows of `cauchy` and `d` are zeroed as well because the
//! derivative of the unpaired `n/2` mode has no consistent sign; `beurling`
//! keeps those modes (any unimodular choice preserves the isometry, and the
//! fields we transform have negligible Nyquist content).

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::LabError;
use crate::grid::{ComplexGrid, GridDescriptor};

/// Signed integer frequency for DFT bin `p` of an `n`-point transform.
pub fn integer_frequency(n: usize, p: usize) -> i64 {
    debug_assert!(p < n);
    if p < n / 2 {
        p as i64
    } else {
        p as i64 - n as i64
    }
}

/// Planned two-dimensional FFT of a fixed size, unnormalized in both
/// directions (a forward/inverse roundtrip multiplies by `n^2`).
pub struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn pass(&self, data: &mut Array2<Complex64>, plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let slice = data.as_slice_mut().expect("grids are standard layout");
        slice.par_chunks_mut(n).for_each_init(
            || vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()],
            |scratch, row| plan.process_with_scratch(row, scratch),
        );
    }

    fn transform(&self, data: &mut Array2<Complex64>, plan: &Arc<dyn Fft<f64>>) {
        // Rows, transpose, rows, transpose: a full 2-d pass that leaves
        // bin [q][p] holding frequency (k1, k2) = (m(p), m(q)).
        self.pass(data, plan);
        transpose_square(data);
        self.pass(data, plan);
        transpose_square(data);
    }

    /// In-place unnormalized forward DFT.
    pub fn forward(&self, data: &mut Array2<Complex64>) {
        self.transform(data, &self.fwd.clone());
    }

    /// In-place unnormalized inverse DFT.
    pub fn inverse(&self, data: &mut Array2<Complex64>) {
        self.transform(data, &self.inv.clone());
    }
}

fn transpose_square(a: &mut Array2<Complex64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let t = a[[i, j]];
            a[[i, j]] = a[[j, i]];
            a[[j, i]] = t;
        }
    }
}

/// Which singular integral or derivative an [`OperatorPlan`] computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `conj(xi)/xi`: the Beurling transform.
    Beurling,
    /// `1/(pi i xi)`: solves `dbar F = phi` with zero-mean output.
    Cauchy,
    /// `pi i xi`: the Wirtinger derivative `dbar`.
    DBar,
    /// `pi i conj(xi)`: the Wirtinger derivative `d`.
    D,
}

/// A multiplier operator bound to one grid size: FFT plans plus the
/// precomputed symbol table.
pub struct OperatorPlan {
    desc: GridDescriptor,
    kind: OperatorKind,
    fft: Fft2,
    mult: Array2<Complex64>,
}

impl OperatorPlan {
    pub fn new(desc: GridDescriptor, kind: OperatorKind) -> Self {
        let n = desc.n();
        let mut mult = Array2::from_elem((n, n), Complex64::new(0.0, 0.0));
        for q in 0..n {
            for p in 0..n {
                mult[[q, p]] = symbol(desc, kind, q, p);
            }
        }
        OperatorPlan {
            desc,
            kind,
            fft: Fft2::new(n),
            mult,
        }
    }

    pub fn beurling(desc: GridDescriptor) -> Self {
        Self::new(desc, OperatorKind::Beurling)
    }

    pub fn cauchy(desc: GridDescriptor) -> Self {
        Self::new(desc, OperatorKind::Cauchy)
    }

    pub fn dbar(desc: GridDescriptor) -> Self {
        Self::new(desc, OperatorKind::DBar)
    }

    pub fn d(desc: GridDescriptor) -> Self {
        Self::new(desc, OperatorKind::D)
    }

    pub fn descriptor(&self) -> GridDescriptor {
        self.desc
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    /// The symbol table, indexed `[q][p]` like the DFT bins.
    pub fn multiplier(&self) -> &Array2<Complex64> {
        &self.mult
    }

    /// Apply the operator to a field on the same grid.
    pub fn apply(&self, input: &ComplexGrid) -> Result<ComplexGrid, LabError> {
        if input.descriptor() != self.desc {
            return Err(LabError::GridMismatch(
                "operator planned for a different grid".into(),
            ));
        }
        let mut data = input.values().clone();
        self.fft.forward(&mut data);
        data.zip_mut_with(&self.mult, |v, &m| *v *= m);
        self.fft.inverse(&mut data);
        let scale = 1.0 / (self.desc.len() as f64);
        data.map_inplace(|v| *v *= scale);
        ComplexGrid::from_values(self.desc, data)
    }
}

fn symbol(desc: GridDescriptor, kind: OperatorKind, q: usize, p: usize) -> Complex64 {
    let n = desc.n();
    let k1 = integer_frequency(n, p);
    let k2 = integer_frequency(n, q);
    if k1 == 0 && k2 == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let kc = Complex64::new(k1 as f64, k2 as f64);
    let nyquist = p == n / 2 || q == n / 2;
    match kind {
        OperatorKind::Beurling => kc.conj() / kc,
        OperatorKind::Cauchy => {
            if nyquist {
                Complex64::new(0.0, 0.0)
            } else {
                let xi = kc / desc.side();
                (Complex64::new(0.0, std::f64::consts::PI) * xi).inv()
            }
        }
        OperatorKind::DBar => {
            let xi = kc / desc.side();
            Complex64::new(0.0, std::f64::consts::PI) * xi
        }
        OperatorKind::D => {
            if nyquist {
                Complex64::new(0.0, 0.0)
            } else {
                let xi = kc / desc.side();
                Complex64::new(0.0, std::f64::consts::PI) * xi.conj()
            }
        }
    }
}

/// Evaluate the Beurling or Cauchy transform of `phi` at one point by direct
/// principal-value quadrature against the plane kernel, skipping the cell
/// that contains `z`.
///
/// The skipped-cell correction vanishes when `z` is that cell's center: the
/// kernel `1/w^2` integrates to zero over a square under quarter-turn
/// rotation, and `1/w` is odd. This is an `O(n^2)` sum per point, meant for
/// cross-checking the FFT path on small grids, and it computes the plane
/// transform, so comparisons on the torus must account for periodization.
pub fn pv_quadrature(
    phi: &ComplexGrid,
    z: Complex64,
    kind: OperatorKind,
) -> Result<Complex64, LabError> {
    let desc = phi.descriptor();
    let skip = desc.nearest_cell(z);
    let n = desc.n();
    let mut acc = Complex64::new(0.0, 0.0);
    for row in 0..n {
        for col in 0..n {
            if Some((row, col)) == skip {
                continue;
            }
            let w = desc.center(row, col) - z;
            let v = phi.get(row, col);
            acc += match kind {
                OperatorKind::Beurling => v / (w * w),
                OperatorKind::Cauchy => v / w,
                _ => {
                    return Err(LabError::invalid(
                        "kind",
                        "pv_quadrature handles Beurling and Cauchy only",
                    ))
                }
            };
        }
    }
    Ok(-acc * desc.cell_area() / std::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ComplexGrid;

    fn desc(n: usize) -> GridDescriptor {
        GridDescriptor::new(n, 4.0).unwrap()
    }

    #[test]
    fn frequencies_wrap_at_nyquist() {
        assert_eq!(integer_frequency(8, 0), 0);
        assert_eq!(integer_frequency(8, 3), 3);
        assert_eq!(integer_frequency(8, 4), -4);
        assert_eq!(integer_frequency(8, 7), -1);
    }

    #[test]
    fn beurling_symbol_is_unimodular_off_zero() {
        let plan = OperatorPlan::beurling(desc(16));
        for (idx, m) in plan.multiplier().indexed_iter() {
            if idx == (0, 0) {
                assert_eq!(m.norm(), 0.0);
            } else {
                assert!((m.norm() - 1.0).abs() < 1e-14, "at {idx:?}: {m}");
            }
        }
    }

    #[test]
    fn cauchy_and_d_zero_the_nyquist_lines() {
        for plan in [
            OperatorPlan::cauchy(desc(16)),
            OperatorPlan::d(desc(16)),
        ] {
            let m = plan.multiplier();
            for i in 0..16 {
                assert_eq!(m[[8, i]], Complex64::new(0.0, 0.0));
                assert_eq!(m[[i, 8]], Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn beurling_factors_through_cauchy() {
        // On every bin where the Cauchy symbol is nonzero, d(xi) * cauchy(xi)
        // equals the Beurling symbol.
        let d = desc(16);
        let s = OperatorPlan::beurling(d);
        let c = OperatorPlan::cauchy(d);
        let dd = OperatorPlan::d(d);
        for (idx, &cm) in c.multiplier().indexed_iter() {
            if cm.norm() == 0.0 {
                continue;
            }
            let lhs = dd.multiplier()[idx] * cm;
            let rhs = s.multiplier()[idx];
            assert!((lhs - rhs).norm() < 1e-13, "at {idx:?}");
        }
    }

    #[test]
    fn dbar_inverts_cauchy_on_smooth_field() {
        let d = desc(64);
        // Decay fast enough that the periodic extension is smooth to 1e-14
        // at the square boundary.
        let g = ComplexGrid::sample(d, |z| {
            let r2 = z.norm_sqr();
            Complex64::new((-8.0 * r2).exp(), 0.0) * z
        });
        let mean = g.mean();
        let centered = g.map(|v| v - mean);
        let cauchy = OperatorPlan::cauchy(d).apply(&centered).unwrap();
        let back = OperatorPlan::dbar(d).apply(&cauchy).unwrap();
        // dbar(cauchy(v)) reproduces v minus its mean, up to the dropped
        // Nyquist content of this rapidly decaying spectrum.
        let err = back.zip_map(&centered, |a, b| a - b).unwrap();
        assert!(err.sup_norm() < 1e-10, "sup err {}", err.sup_norm());
    }

    #[test]
    fn roundtrip_fft_is_identity() {
        let d = desc(32);
        let g = ComplexGrid::sample(d, |z| Complex64::new(z.re * z.im, (z.re - 0.3).cos()));
        let mut data = g.values().clone();
        let fft = Fft2::new(32);
        fft.forward(&mut data);
        fft.inverse(&mut data);
        let scale = 1.0 / (32.0 * 32.0);
        data.map_inplace(|v| *v *= scale);
        let back = ComplexGrid::from_values(d, data).unwrap();
        let err = back.zip_map(&g, |a, b| a - b).unwrap();
        assert!(err.sup_norm() < 1e-12);
    }

    #[test]
    fn pv_rejects_derivative_kinds() {
        let g = ComplexGrid::zeros(desc(8));
        assert!(pv_quadrature(&g, Complex64::new(0.0, 0.0), OperatorKind::DBar).is_err());
    }
}
