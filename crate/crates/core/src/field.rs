//! Grid functions on a periodic box `[-L, L)^d` and the exact-symbol actions of the
//! heat semigroup and the nonlocal Gaussian operator.
//!
//! The unbounded domain is truncated to a periodic box; with that truncation both
//! Gaussian convolutions are diagonal in the discrete Fourier basis, so each mode is
//! multiplied by its exact symbol and the only error is round-off.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid with `points` nodes per axis on `[-half_length, half_length)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub half_length: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(dim: usize, half_length: f64, points: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half length must be > 0, got {half_length}"
            )));
        }
        if points < 16 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 16, got {points}"
            )));
        }
        Ok(Grid {
            dim,
            half_length,
            points,
        })
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.points as f64
    }

    /// Volume element `dx^d` of the discrete L² inner product.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.dx()
    }

    /// Coordinates of the node at flat (row-major) `index`.
    pub fn node(&self, index: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.coordinate(index), 0.0],
            _ => [
                self.coordinate(index / self.points),
                self.coordinate(index % self.points),
            ],
        }
    }

    /// Euclidean distance of a node from the origin.
    pub fn radius(&self, index: usize) -> f64 {
        let x = self.node(index);
        (x[0] * x[0] + x[1] * x[1]).sqrt()
    }

    /// The split ball must sit inside the box with margin: `L >= 2K`.
    pub fn check_contains_ball(&self, radius: f64) -> Result<()> {
        if self.half_length < 2.0 * radius {
            return Err(Error::InvalidGrid(format!(
                "half length {} must be at least twice the split radius {}",
                self.half_length, radius
            )));
        }
        Ok(())
    }

    /// Angular wavenumber of FFT bin `j`.
    fn wavenumber(&self, j: usize) -> f64 {
        let n = self.points as i64;
        let j = j as i64;
        let signed = if j <= n / 2 { j } else { j - n };
        std::f64::consts::PI * signed as f64 / self.half_length
    }
}

/// Real values at the nodes of a grid, row-major.
#[derive(Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("norm", &self.norm_l2())
            .finish()
    }
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Field {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| f(&grid.node(i)[..grid.dim]))
            .collect();
        Field { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Format(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Field { grid, values })
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.ensure_same_grid(other)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a + b)
    }

    /// `self += a·x`
    pub fn axpy(&mut self, a: f64, x: &Field) -> Result<()> {
        self.ensure_same_grid(x)?;
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.ensure_same_grid(other)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Grid-weighted L² norm `(Σ φ² dx^d)^{1/2}`.
    pub fn norm_l2(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Little-endian flat binary: `d: u64, n: u64, L: f64`, then row-major `f64` values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.grid.dim as u64).to_le_bytes())?;
        w.write_all(&(self.grid.points as u64).to_le_bytes())?;
        w.write_all(&self.grid.half_length.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Field> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let dim = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let points = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let half_length = f64::from_le_bytes(word);
        let grid = Grid::new(dim, half_length, points)
            .map_err(|e| Error::Format(format!("bad field header: {e}")))?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            r.read_exact(&mut word)?;
            values.push(f64::from_le_bytes(word));
        }
        Ok(Field { grid, values })
    }

    /// Plot-ready CSV: `x,u` in 1-D and `x,y,u` in 2-D.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        match self.grid.dim {
            1 => writeln!(w, "x,u")?,
            _ => writeln!(w, "x,y,u")?,
        }
        for (i, v) in self.values.iter().enumerate() {
            let x = self.grid.node(i);
            match self.grid.dim {
                1 => writeln!(w, "{},{}", x[0], v)?,
                _ => writeln!(w, "{},{},{}", x[0], x[1], v)?,
            }
        }
        Ok(())
    }
}

/// Nodewise indicator of `Ω_K = {|x| < K}` or of its complement.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    grid: Grid,
    inside: Vec<bool>,
}

impl Mask {
    pub fn ball(grid: Grid, radius: f64) -> Self {
        Mask {
            grid,
            inside: (0..grid.len()).map(|i| grid.radius(i) < radius).collect(),
        }
    }

    pub fn complement(&self) -> Self {
        Mask {
            grid: self.grid,
            inside: self.inside.iter().map(|b| !b).collect(),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn contains(&self, index: usize) -> bool {
        self.inside[index]
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.inside
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }
}

/// Nodewise product with an indicator.
pub fn apply_mask(field: &Field, mask: &Mask) -> Result<Field> {
    if field.grid != mask.grid {
        return Err(Error::GridMismatch);
    }
    Ok(Field {
        grid: field.grid,
        values: field
            .values
            .iter()
            .zip(&mask.inside)
            .map(|(&v, &m)| if m { v } else { 0.0 })
            .collect(),
    })
}

/// Per-node Fourier multiplier, laid out like the engine's transformed buffer.
#[derive(Clone, Debug)]
pub struct Multiplier(Vec<f64>);

/// FFT plans and squared wavenumbers for one grid.
#[derive(Clone)]
pub struct FieldEngine {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k2: Vec<f64>,
}

impl fmt::Debug for FieldEngine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldEngine")
            .field("grid", &self.grid)
            .finish()
    }
}

impl FieldEngine {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.points);
        let inverse = planner.plan_fft_inverse(grid.points);
        let n = grid.points;
        let k2 = match grid.dim {
            1 => (0..n).map(|j| grid.wavenumber(j).powi(2)).collect(),
            // |k|² is symmetric in the two axes, so the transposed layout used by
            // `transform` needs no special ordering
            _ => (0..n * n)
                .map(|idx| grid.wavenumber(idx / n).powi(2) + grid.wavenumber(idx % n).powi(2))
                .collect(),
        };
        FieldEngine {
            grid,
            forward,
            inverse,
            k2,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn multiplier(&self, symbol: impl Fn(f64) -> f64) -> Multiplier {
        Multiplier(self.k2.iter().map(|&k2| symbol(k2)).collect())
    }

    /// Symbol `exp(-μt - |k|² t)` of the heat semigroup.
    pub fn heat_multiplier(&self, t: f64, mu: f64) -> Multiplier {
        let decay = (-mu * t).exp();
        self.multiplier(|k2| decay * (-k2 * t).exp())
    }

    /// Symbol `exp(-ι|k|²)` of the unit-mass Gaussian of variance 2ι.
    pub fn gaussian_multiplier(&self, iota: f64) -> Multiplier {
        self.multiplier(|k2| (-iota * k2).exp())
    }

    pub fn apply(&self, field: &Field, m: &Multiplier) -> Result<Field> {
        if field.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        let n = self.grid.points;
        let mut buf: Vec<Complex64> = field
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        let scale = 1.0 / self.grid.len() as f64;
        match self.grid.dim {
            1 => {
                self.forward.process(&mut buf);
                for (c, &s) in buf.iter_mut().zip(&m.0) {
                    *c *= s * scale;
                }
                self.inverse.process(&mut buf);
            }
            _ => {
                self.forward.process(&mut buf);
                transpose(&mut buf, n);
                self.forward.process(&mut buf);
                for (c, &s) in buf.iter_mut().zip(&m.0) {
                    *c *= s * scale;
                }
                self.inverse.process(&mut buf);
                transpose(&mut buf, n);
                self.inverse.process(&mut buf);
            }
        }
        Ok(Field {
            grid: self.grid,
            values: buf.into_iter().map(|c| c.re).collect(),
        })
    }

    /// `S(t)φ`: `exp(-μt)` times convolution with the heat kernel of variance `2t`.
    pub fn heat_semigroup(&self, field: &Field, t: f64, mu: f64) -> Result<Field> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        if t == 0.0 {
            if field.grid != self.grid {
                return Err(Error::GridMismatch);
            }
            return Ok(field.clone());
        }
        self.apply(field, &self.heat_multiplier(t, mu))
    }

    /// `H(φ)`: convolution with the normalized Gaussian `Γ_ι`.
    pub fn nonlocal_h(&self, field: &Field, iota: f64) -> Result<Field> {
        if !(iota.is_finite() && iota > 0.0) {
            return Err(Error::param("iota", format!("must be > 0, got {iota}")));
        }
        self.apply(field, &self.gaussian_multiplier(iota))
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid1() -> Grid {
        Grid::new(1, 2.0 * PI, 256).unwrap()
    }

    #[test]
    fn grid_invariants() {
        assert!(Grid::new(3, 1.0, 16).is_err());
        assert!(Grid::new(1, 1.0, 8).is_err());
        assert!(Grid::new(1, 1.0, 48).is_err());
        assert!(Grid::new(1, 0.0, 16).is_err());
        let g = Grid::new(2, 1.0, 16).unwrap();
        assert_eq!(g.len(), 256);
        assert!(g.check_contains_ball(0.5).is_ok());
        assert!(g.check_contains_ball(0.6).is_err());
    }

    #[test]
    fn norm_examples() {
        let g = grid1();
        assert_eq!(Field::zeros(g).norm_l2(), 0.0);
        assert_relative_eq!(
            Field::constant(g, 1.0).norm_l2(),
            (2.0 * g.half_length).sqrt(),
            max_relative = 1e-14
        );
        let g2 = Grid::new(2, 1.5, 32).unwrap();
        assert_relative_eq!(
            Field::constant(g2, 1.0).norm_l2(),
            3.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn heat_zero_time_is_identity() {
        let g = grid1();
        let e = FieldEngine::new(g);
        let f = Field::from_fn(g, |x| (x[0] * 1.3).sin() + 0.2 * x[0]);
        assert_eq!(e.heat_semigroup(&f, 0.0, 2.0).unwrap(), f);
        assert!(matches!(
            e.heat_semigroup(&f, -1.0, 2.0),
            Err(Error::NegativeTime(_))
        ));
    }

    #[test]
    fn heat_on_constant_and_cosine() {
        let g = grid1();
        let e = FieldEngine::new(g);
        let out = e
            .heat_semigroup(&Field::constant(g, 3.0), 0.7, 1.5)
            .unwrap();
        for &v in out.values() {
            assert_relative_eq!(v, 3.0 * (-1.05f64).exp(), max_relative = 1e-13);
        }
        let k1 = PI / g.half_length;
        let cosine = Field::from_fn(g, |x| (k1 * x[0]).cos());
        let out = e.heat_semigroup(&cosine, 1.0, 0.0).unwrap();
        let expected = cosine.map(|v| v * (-k1 * k1).exp());
        assert!(out.sub(&expected).unwrap().max_abs() < 1e-13);
    }

    /// Direct quadrature of the periodised Gaussian convolution against the spectral route.
    #[test]
    fn heat_matches_direct_quadrature() {
        let g = Grid::new(1, 2.0 * PI, 128).unwrap();
        let e = FieldEngine::new(g);
        let k1 = PI / g.half_length;
        let cosine = Field::from_fn(g, |x| (k1 * x[0]).cos());
        let t = 1.0;
        let period = 2.0 * g.half_length;
        let dx = g.dx();
        let direct: Vec<f64> = (0..g.points)
            .map(|i| {
                let xi = g.coordinate(i);
                let mut s = 0.0;
                for j in 0..g.points {
                    let y = g.coordinate(j);
                    for wrap in -3..=3 {
                        let d = xi - y - wrap as f64 * period;
                        s += cosine.values()[j] * (-d * d / (4.0 * t)).exp();
                    }
                }
                s * dx / (4.0 * PI * t).sqrt()
            })
            .collect();
        let spectral = e.heat_semigroup(&cosine, t, 0.0).unwrap();
        for (a, b) in spectral.values().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn heat_2d_matches_separable_1d() {
        let g2 = Grid::new(2, PI, 32).unwrap();
        let e2 = FieldEngine::new(g2);
        let k = PI / g2.half_length;
        let f = Field::from_fn(g2, |x| (k * x[0]).cos() * (2.0 * k * x[1]).sin());
        let out = e2.heat_semigroup(&f, 0.3, 0.5).unwrap();
        let factor = (-0.5 * 0.3 - (k * k + 4.0 * k * k) * 0.3f64).exp();
        let expected = f.map(|v| v * factor);
        assert!(out.sub(&expected).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn nonlocal_h_examples() {
        let g = grid1();
        let e = FieldEngine::new(g);
        let c = e.nonlocal_h(&Field::constant(g, -2.5), 0.8).unwrap();
        for &v in c.values() {
            assert_relative_eq!(v, -2.5, max_relative = 1e-13);
        }
        let smooth = Field::from_fn(g, |x| (-x[0] * x[0]).exp() + (0.5 * x[0]).cos());
        let near = e.nonlocal_h(&smooth, 1e-6).unwrap();
        assert!(near.sub(&smooth).unwrap().norm_l2() <= 1e-3 * smooth.norm_l2());
        assert!(e.nonlocal_h(&smooth, 0.0).is_err());
        assert!(e.nonlocal_h(&smooth, -1.0).is_err());
    }

    #[test]
    fn mask_examples() {
        let g = grid1();
        let f = Field::from_fn(g, |x| x[0].sin() + 1.0);
        let all = Mask::ball(g, g.half_length * 1.01);
        assert_eq!(apply_mask(&f, &all).unwrap(), f);
        let none = Mask::ball(g, 0.0);
        assert_eq!(apply_mask(&f, &none).unwrap().max_abs(), 0.0);
        let m = Mask::ball(g, 1.0);
        let inner = apply_mask(&f, &m).unwrap();
        let outer = apply_mask(&f, &m.complement()).unwrap();
        assert_eq!(inner.add(&outer).unwrap(), f);
        let other = Field::zeros(Grid::new(1, 1.0, 16).unwrap());
        assert!(matches!(apply_mask(&other, &m), Err(Error::GridMismatch)));
    }

    #[test]
    fn binary_layout() {
        let g = Grid::new(1, 1.25, 16).unwrap();
        let f = Field::from_fn(g, |x| x[0] * 2.0);
        let mut bytes = Vec::new();
        f.write_binary(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 24 + 16 * 8);
        assert_eq!(&bytes[0..8], &1u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &16u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &1.25f64.to_le_bytes());
        assert_eq!(&bytes[24..32], &(-2.5f64).to_le_bytes());
        assert_eq!(Field::read_binary(&bytes[..]).unwrap(), f);
        assert!(Field::read_binary(&bytes[..40]).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = Grid::new(2, 1.0, 16).unwrap();
        let mut out = Vec::new();
        Field::constant(g, 1.0).write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("x,y,u\n"));
        assert_eq!(text.lines().count(), 257);
    }
}
