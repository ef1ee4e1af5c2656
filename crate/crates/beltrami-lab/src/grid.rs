//! Periodic sampling grids on a square centered at the origin.
//!
//! The square `[-side/2, side/2)^2` is split into `n x n` cells and fields
//! are sampled at cell centers, so every discrete sum is a midpoint-rule
//! quadrature. The side length must leave room between the unit disk, where
//! coefficients live, and the boundary where periodic images interfere;
//! `side >= 4` keeps at least one unit of padding.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::LabError;
use crate::stats::{pairwise_sum_by, pairwise_sum_complex_by};

const MAGIC: &[u8; 8] = b"CPXGRID1";

/// Geometry of a periodic grid: `n x n` cells on a square of the given side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridDescriptor {
    n: usize,
    side: f64,
}

impl GridDescriptor {
    /// `n` must be a power of two (the FFT layer relies on it) and at least 8;
    /// `side` must be at least 4 so the unit disk sits well inside the square.
    pub fn new(n: usize, side: f64) -> Result<Self, LabError> {
        if !n.is_power_of_two() || n < 8 {
            return Err(LabError::invalid(
                "n",
                format!("{n} is not a power of two >= 8"),
            ));
        }
        if !(side >= 4.0) || !side.is_finite() {
            return Err(LabError::invalid("side", format!("{side} < 4")));
        }
        Ok(GridDescriptor { n, side })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    /// Cell width `side / n`.
    pub fn spacing(&self) -> f64 {
        self.side / self.n as f64
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Center of the cell in row `row` (y index) and column `col` (x index).
    pub fn center(&self, row: usize, col: usize) -> Complex64 {
        let h = self.spacing();
        let x = -0.5 * self.side + (col as f64 + 0.5) * h;
        let y = -0.5 * self.side + (row as f64 + 0.5) * h;
        Complex64::new(x, y)
    }

    /// Indices of the cell containing `z`, or `None` if `z` is outside the
    /// square.
    pub fn nearest_cell(&self, z: Complex64) -> Option<(usize, usize)> {
        let h = self.spacing();
        let col = ((z.re + 0.5 * self.side) / h).floor();
        let row = ((z.im + 0.5 * self.side) / h).floor();
        if col < 0.0 || row < 0.0 || col >= self.n as f64 || row >= self.n as f64 {
            None
        } else {
            Some((row as usize, col as usize))
        }
    }
}

/// A complex-valued field sampled at the cell centers of a [`GridDescriptor`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    desc: GridDescriptor,
    values: Array2<Complex64>,
}

impl ComplexGrid {
    pub fn zeros(desc: GridDescriptor) -> Self {
        ComplexGrid {
            desc,
            values: Array2::from_elem((desc.n, desc.n), Complex64::new(0.0, 0.0)),
        }
    }

    /// Sample `f` at every cell center. Rows are filled in parallel; the
    /// result is deterministic because each cell is written exactly once.
    pub fn sample<F>(desc: GridDescriptor, f: F) -> Self
    where
        F: Fn(Complex64) -> Complex64 + Sync,
    {
        let n = desc.n;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        data.par_chunks_mut(n).enumerate().for_each(|(row, chunk)| {
            for (col, slot) in chunk.iter_mut().enumerate() {
                *slot = f(desc.center(row, col));
            }
        });
        let values = Array2::from_shape_vec((n, n), data).expect("shape fixed by construction");
        ComplexGrid { desc, values }
    }

    /// Wrap an existing array; fails if its shape disagrees with `desc`.
    pub fn from_values(desc: GridDescriptor, values: Array2<Complex64>) -> Result<Self, LabError> {
        if values.dim() != (desc.n, desc.n) {
            return Err(LabError::GridMismatch(format!(
                "array is {:?}, descriptor wants ({}, {})",
                values.dim(),
                desc.n,
                desc.n
            )));
        }
        Ok(ComplexGrid { desc, values })
    }

    pub fn descriptor(&self) -> GridDescriptor {
        self.desc
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.values
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.values[[row, col]]
    }

    fn slice(&self) -> &[Complex64] {
        self.values.as_slice().expect("grids are standard layout")
    }

    /// Elementwise map onto a new grid.
    pub fn map<F: Fn(Complex64) -> Complex64>(&self, f: F) -> ComplexGrid {
        ComplexGrid {
            desc: self.desc,
            values: self.values.map(|&v| f(v)),
        }
    }

    /// Elementwise combination of two fields on the same grid.
    pub fn zip_map<F>(&self, other: &ComplexGrid, f: F) -> Result<ComplexGrid, LabError>
    where
        F: Fn(Complex64, Complex64) -> Complex64,
    {
        self.check_same_grid(other)?;
        let mut values = self.values.clone();
        values.zip_mut_with(&other.values, |a, &b| *a = f(*a, b));
        Ok(ComplexGrid {
            desc: self.desc,
            values,
        })
    }

    pub fn check_same_grid(&self, other: &ComplexGrid) -> Result<(), LabError> {
        if self.desc != other.desc {
            return Err(LabError::GridMismatch(format!(
                "({}, {}) vs ({}, {})",
                self.desc.n, self.desc.side, other.desc.n, other.desc.side
            )));
        }
        Ok(())
    }

    /// Squared L2 norm: `sum |v|^2 * cell_area`.
    pub fn l2_norm_sq(&self) -> f64 {
        let s = self.slice();
        let sum = pairwise_sum_by(s.len(), |i| s[i].norm_sqr());
        sum * self.desc.cell_area()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.slice().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Plain average of the samples.
    pub fn mean(&self) -> Complex64 {
        let s = self.slice();
        pairwise_sum_complex_by(s.len(), |i| s[i]) / s.len() as f64
    }

    /// Midpoint-rule integral over the whole square.
    pub fn integral(&self) -> Complex64 {
        let s = self.slice();
        pairwise_sum_complex_by(s.len(), |i| s[i]) * self.desc.cell_area()
    }

    /// Midpoint-rule integral restricted to the cells of `set`.
    pub fn integrate_over(&self, set: &PixelSet) -> Result<Complex64, LabError> {
        if set.desc != self.desc {
            return Err(LabError::GridMismatch(
                "pixel set on a different grid".into(),
            ));
        }
        let s = self.slice();
        let m = &set.mask;
        let sum = pairwise_sum_complex_by(s.len(), |i| {
            if m[i] {
                s[i]
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Ok(sum * self.desc.cell_area())
    }

    /// Squared L2 norm restricted to the cells of `set`.
    pub fn l2_norm_sq_over(&self, set: &PixelSet) -> Result<f64, LabError> {
        if set.desc != self.desc {
            return Err(LabError::GridMismatch(
                "pixel set on a different grid".into(),
            ));
        }
        let s = self.slice();
        let m = &set.mask;
        let sum = pairwise_sum_by(s.len(), |i| if m[i] { s[i].norm_sqr() } else { 0.0 });
        Ok(sum * self.desc.cell_area())
    }

    /// Fraction of the squared mass carried by cells with `|z| > radius`.
    /// Diagnoses how much of a field leaks toward the periodic boundary.
    pub fn tail_mass_fraction(&self, radius: f64) -> f64 {
        let s = self.slice();
        let n = self.desc.n;
        let total = pairwise_sum_by(s.len(), |i| s[i].norm_sqr());
        if total == 0.0 {
            return 0.0;
        }
        let tail = pairwise_sum_by(s.len(), |i| {
            if self.desc.center(i / n, i % n).norm() > radius {
                s[i].norm_sqr()
            } else {
                0.0
            }
        });
        tail / total
    }

    /// Write in the native binary layout: an 8-byte magic, `n` as little
    /// endian u64, `side` as little endian f64, then row-major interleaved
    /// re/im doubles. The roundtrip is bit-exact.
    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<(), LabError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&(self.desc.n as u64).to_le_bytes())?;
        w.write_all(&self.desc.side.to_le_bytes())?;
        for v in self.slice() {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self, LabError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(LabError::Format("bad magic bytes".into()));
        }
        let mut buf8 = [0u8; 8];
        r.read_exact(&mut buf8)?;
        let n = u64::from_le_bytes(buf8) as usize;
        r.read_exact(&mut buf8)?;
        let side = f64::from_le_bytes(buf8);
        let desc = GridDescriptor::new(n, side)
            .map_err(|e| LabError::Format(format!("bad header: {e}")))?;
        let mut data = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            r.read_exact(&mut buf8)?;
            let re = f64::from_le_bytes(buf8);
            r.read_exact(&mut buf8)?;
            let im = f64::from_le_bytes(buf8);
            data.push(Complex64::new(re, im));
        }
        let values = Array2::from_shape_vec((n, n), data).expect("length checked");
        Ok(ComplexGrid { desc, values })
    }

    /// Write a `x,y,re,im` CSV of all samples, row-major. Mostly useful for
    /// plotting small grids; prefer the binary format for data exchange.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), LabError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "y", "re", "im"])?;
        let n = self.desc.n;
        for row in 0..n {
            for col in 0..n {
                let z = self.desc.center(row, col);
                let v = self.values[[row, col]];
                w.write_record([
                    format!("{:.12e}", z.re),
                    format!("{:.12e}", z.im),
                    format!("{:.12e}", v.re),
                    format!("{:.12e}", v.im),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// A set of grid cells, stored as a dense mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelSet {
    desc: GridDescriptor,
    mask: Vec<bool>,
}

impl PixelSet {
    pub fn empty(desc: GridDescriptor) -> Self {
        PixelSet {
            desc,
            mask: vec![false; desc.len()],
        }
    }

    /// A set from an explicit row-major mask.
    pub fn from_mask(desc: GridDescriptor, mask: Vec<bool>) -> Result<Self, LabError> {
        if mask.len() != desc.len() {
            return Err(LabError::GridMismatch(format!(
                "mask length {} for a grid of {} cells",
                mask.len(),
                desc.len()
            )));
        }
        Ok(PixelSet { desc, mask })
    }

    /// Cells whose center satisfies the predicate.
    pub fn from_fn<F: Fn(Complex64) -> bool>(desc: GridDescriptor, pred: F) -> Self {
        let n = desc.n;
        let mask = (0..desc.len())
            .map(|i| pred(desc.center(i / n, i % n)))
            .collect();
        PixelSet { desc, mask }
    }

    pub fn disk(desc: GridDescriptor, center: Complex64, radius: f64) -> Self {
        PixelSet::from_fn(desc, |z| (z - center).norm() <= radius)
    }

    pub fn annulus(desc: GridDescriptor, r_in: f64, r_out: f64) -> Self {
        PixelSet::from_fn(desc, |z| {
            let r = z.norm();
            r_in < r && r < r_out
        })
    }

    pub fn descriptor(&self) -> GridDescriptor {
        self.desc
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.desc.n + col]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Lebesgue measure of the set: cell count times cell area.
    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.desc.cell_area()
    }

    pub fn intersect(&self, other: &PixelSet) -> Result<PixelSet, LabError> {
        if self.desc != other.desc {
            return Err(LabError::GridMismatch(
                "intersecting sets on different grids".into(),
            ));
        }
        let mask = self
            .mask
            .iter()
            .zip(&other.mask)
            .map(|(&a, &b)| a && b)
            .collect();
        Ok(PixelSet {
            desc: self.desc,
            mask,
        })
    }

    pub fn union(&self, other: &PixelSet) -> Result<PixelSet, LabError> {
        if self.desc != other.desc {
            return Err(LabError::GridMismatch(
                "joining sets on different grids".into(),
            ));
        }
        let mask = self
            .mask
            .iter()
            .zip(&other.mask)
            .map(|(&a, &b)| a || b)
            .collect();
        Ok(PixelSet {
            desc: self.desc,
            mask,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GridDescriptor {
        GridDescriptor::new(64, 4.0).unwrap()
    }

    #[test]
    fn descriptor_rejects_bad_input() {
        assert!(GridDescriptor::new(100, 4.0).is_err());
        assert!(GridDescriptor::new(4, 4.0).is_err());
        assert!(GridDescriptor::new(64, 2.0).is_err());
        assert!(GridDescriptor::new(64, f64::NAN).is_err());
    }

    #[test]
    fn centers_are_symmetric() {
        let d = small();
        // Cell centers never hit the origin and come in +/- pairs.
        let z = d.center(0, 0);
        let w = d.center(d.n() - 1, d.n() - 1);
        assert!((z + w).norm() < 1e-15);
        assert!(z.norm() > 0.0);
    }

    #[test]
    fn nearest_cell_inverts_center() {
        let d = small();
        for &(r, c) in &[(0usize, 0usize), (13, 40), (63, 63)] {
            assert_eq!(d.nearest_cell(d.center(r, c)), Some((r, c)));
        }
        assert_eq!(d.nearest_cell(Complex64::new(2.5, 0.0)), None);
    }

    #[test]
    fn integral_of_constant() {
        let d = small();
        let g = ComplexGrid::sample(d, |_| Complex64::new(1.0, -2.0));
        let i = g.integral();
        let area = d.side() * d.side();
        assert!((i.re - area).abs() < 1e-12);
        assert!((i.im + 2.0 * area).abs() < 1e-12);
    }

    #[test]
    fn l2_norm_scales_exactly() {
        let d = small();
        let g = ComplexGrid::sample(d, |z| Complex64::new(z.re, z.im * 0.5));
        let doubled = g.map(|v| v * Complex64::new(0.0, 2.0));
        // Multiplying by 2i scales every |v|^2 by exactly 4.
        assert_eq!(doubled.l2_norm(), 2.0 * g.l2_norm());
    }

    #[test]
    fn disk_measure_close_to_pi() {
        let d = GridDescriptor::new(256, 4.0).unwrap();
        let disk = PixelSet::disk(d, Complex64::new(0.0, 0.0), 1.0);
        assert!((disk.measure() - std::f64::consts::PI).abs() < 4.0 * d.spacing());
    }

    #[test]
    fn integrate_over_respects_mask() {
        let d = small();
        let g = ComplexGrid::sample(d, |_| Complex64::new(1.0, 0.0));
        let ring = PixelSet::annulus(d, 0.5, 1.0);
        let v = g.integrate_over(&ring).unwrap();
        assert!((v.re - ring.measure()).abs() < 1e-12);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn tail_mass_of_compact_field_is_zero() {
        let d = small();
        let g = ComplexGrid::sample(d, |z| {
            if z.norm() < 0.8 {
                Complex64::new(1.0, 1.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        assert_eq!(g.tail_mass_fraction(1.0), 0.0);
        assert!(g.tail_mass_fraction(0.5) > 0.0);
    }

    #[test]
    fn zip_map_requires_same_grid() {
        let a = ComplexGrid::zeros(small());
        let b = ComplexGrid::zeros(GridDescriptor::new(128, 4.0).unwrap());
        assert!(a.zip_map(&b, |x, _| x).is_err());
    }
}
