//! Uniform periodic grids, spectral and finite-difference differentiation,
//! and quadrature.
//!
//! Two derivative routes exist on purpose. [`spectral_derivative`] treats the
//! samples as one period of a periodic function and is exact for band-limited
//! data; it is the right tool for densities, wave functions and forces that
//! decay before the boundary. Phase and action fields (`S = p0*x + ...`) are
//! not periodic, so they go through [`fd_derivative`], a seven-point
//! finite-difference scheme that is exact for polynomials of degree six or
//! less and never wraps around.

use std::cell::RefCell;
use std::ops::Range;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic lattice `x_i = x_min + i*dx`, `i in [0, n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl Grid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::domain(format!(
                "grid bounds must satisfy x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n < Self::MIN_POINTS || !n.is_power_of_two() {
            return Err(Error::domain(format!(
                "grid point count must be a power of two >= {}, got {n}",
                Self::MIN_POINTS
            )));
        }
        Ok(Grid { x_min, x_max, n })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Wavenumber of FFT bin `j` in standard layout: `0, 1, .., n/2-1, -n/2, .., -1`
    /// in units of `2*pi/L`.
    #[inline]
    pub fn wavenumber(&self, j: usize) -> f64 {
        let n = self.n as i64;
        let j = j as i64;
        let m = if j < n / 2 { j } else { j - n };
        std::f64::consts::TAU * m as f64 / self.length()
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.wavenumber(j)).collect()
    }

    /// Largest representable |k|, i.e. the Nyquist wavenumber.
    pub fn k_max(&self) -> f64 {
        std::f64::consts::PI / self.dx()
    }

    /// Index of the grid node nearest to `x`, or `None` outside `[x_min, x_max)`.
    pub fn nearest_index(&self, x: f64) -> Option<usize> {
        if !(x >= self.x_min && x < self.x_max) {
            return None;
        }
        let i = ((x - self.x_min) / self.dx()).round() as usize;
        Some(i.min(self.n - 1))
    }

    /// Same grid spacing, domain scaled by `factor` about its centre.
    pub fn widened(&self, factor: usize) -> Result<Grid> {
        let centre = 0.5 * (self.x_min + self.x_max);
        let half = 0.5 * self.length() * factor as f64;
        Grid::new(centre - half, centre + half, self.n * factor)
    }
}

/// Real samples on a [`Grid`]; every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Grid,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::domain(format!(
                "field has {} samples but the grid has {}",
                values.len(),
                grid.n()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite field value at index {i}")));
        }
        Ok(RealField { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.n()).map(|i| f(grid.x(i))).collect();
        RealField::new(grid, values)
    }

    pub fn zeros(grid: Grid) -> Self {
        RealField { grid, values: vec![0.0; grid.n()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<RealField> {
        RealField::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Complex samples on a [`Grid`]; every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::domain(format!(
                "field has {} samples but the grid has {}",
                values.len(),
                grid.n()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::domain(format!("non-finite field value at index {i}")));
        }
        Ok(ComplexField { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn density(&self) -> RealField {
        RealField {
            grid: self.grid,
            values: self.values.iter().map(|z| z.norm_sqr()).collect(),
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward/inverse FFT plans of one size. The inverse is unnormalized, as in
/// `rustfft`; [`FftPair::inverse`] applies the `1/n`.
#[derive(Clone)]
pub(crate) struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl FftPair {
    pub(crate) fn new(n: usize) -> Self {
        PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            let forward = p.plan_fft_forward(n);
            let inverse = p.plan_fft_inverse(n);
            let scratch_len = forward
                .get_inplace_scratch_len()
                .max(inverse.get_inplace_scratch_len());
            FftPair { forward, inverse, scratch_len }
        })
    }

    pub(crate) fn scratch(&self) -> Vec<Complex64> {
        vec![Complex64::default(); self.scratch_len]
    }

    pub(crate) fn forward(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, scratch);
    }

    pub(crate) fn inverse(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, scratch);
        let scale = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }
}

/// Applies the Fourier multiplier `mult(k)` to complex samples in place.
pub(crate) fn apply_multiplier(
    grid: &Grid,
    buf: &mut [Complex64],
    mult: impl Fn(usize, f64) -> Complex64,
) {
    let fft = FftPair::new(grid.n());
    let mut scratch = fft.scratch();
    fft.forward(buf, &mut scratch);
    for (j, z) in buf.iter_mut().enumerate() {
        *z *= mult(j, grid.wavenumber(j));
    }
    fft.inverse(buf, &mut scratch);
}

fn derivative_multiplier(order: u8, n: usize) -> impl Fn(usize, f64) -> Complex64 {
    move |j, k| match order {
        // The Nyquist bin has no odd-derivative partner; drop it so real
        // input stays real.
        1 if j == n / 2 => Complex64::new(0.0, 0.0),
        1 => Complex64::new(0.0, k),
        _ => Complex64::new(-k * k, 0.0),
    }
}

fn check_order(order: u8) -> Result<()> {
    if order == 1 || order == 2 {
        Ok(())
    } else {
        Err(Error::domain(format!("derivative order must be 1 or 2, got {order}")))
    }
}

/// FFT derivative of a periodic real field.
pub fn spectral_derivative(f: &RealField, order: u8) -> Result<RealField> {
    check_order(order)?;
    let grid = *f.grid();
    let mut buf: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    apply_multiplier(&grid, &mut buf, derivative_multiplier(order, grid.n()));
    RealField::new(grid, buf.into_iter().map(|z| z.re).collect())
}

/// FFT derivative of a periodic complex field.
pub fn spectral_derivative_complex(f: &ComplexField, order: u8) -> Result<ComplexField> {
    check_order(order)?;
    let grid = *f.grid();
    let mut buf = f.values().to_vec();
    apply_multiplier(&grid, &mut buf, derivative_multiplier(order, grid.n()));
    ComplexField::new(grid, buf)
}

/// `dx * sum(f_i)`; on a periodic grid this is the trapezoid rule.
pub fn integrate(f: &RealField) -> f64 {
    f.grid().dx() * f.values().iter().sum::<f64>()
}

/// Discrete L2 norm `sqrt(dx * sum f_i^2)` over `range`.
pub fn l2_norm(values: &[f64], dx: f64, range: Range<usize>) -> f64 {
    (dx * values[range].iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// Finite-difference weights for derivatives `0..=max_order` at `z` using
/// nodes `x` (Fornberg's recursion). Returns `w[order][node]`.
pub fn fornberg_weights(z: f64, x: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Seven-point stencil width used by [`fd_derivative`].
pub const FD_POINTS: usize = 7;

/// Non-periodic finite-difference derivative of uniformly spaced samples,
/// evaluated on `range` using only samples inside `range`.
///
/// Centred seven-point stencils in the interior, shifted (one-sided) stencils
/// near the ends of `range`. Exact for polynomials up to degree six. Entries
/// outside `range` are zero.
pub fn fd_derivative(values: &[f64], dx: f64, order: u8, range: Range<usize>) -> Result<Vec<f64>> {
    check_order(order)?;
    if range.end > values.len() || range.len() < FD_POINTS {
        return Err(Error::domain(format!(
            "finite-difference range {range:?} needs at least {FD_POINTS} samples inside {} values",
            values.len()
        )));
    }
    let half = FD_POINTS / 2;
    let offsets: Vec<Vec<f64>> = (0..FD_POINTS)
        .map(|shift| {
            let nodes: Vec<f64> = (0..FD_POINTS).map(|j| j as f64).collect();
            fornberg_weights(shift as f64, &nodes, order as usize)[order as usize].clone()
        })
        .collect();
    let scale = dx.powi(order as i32);
    let mut out = vec![0.0; values.len()];
    for i in range.clone() {
        let start = i.saturating_sub(half).max(range.start).min(range.end - FD_POINTS);
        let w = &offsets[i - start];
        let acc: f64 = (0..FD_POINTS).map(|j| w[j] * values[start + j]).sum();
        out[i] = acc / scale;
    }
    Ok(out)
}

/// Local cubic (four-point Lagrange) interpolation of uniformly spaced samples
/// `values` with first node at `x0`. Returns `None` outside the sampled span.
pub fn interp_cubic(values: &[f64], x0: f64, dx: f64, x: f64) -> Option<f64> {
    let n = values.len();
    if n < 4 {
        return None;
    }
    let s = (x - x0) / dx;
    if !(s >= 0.0 && s <= (n - 1) as f64) {
        return None;
    }
    let i = (s.floor() as usize).clamp(1, n - 3);
    let t = s - i as f64;
    let (f0, f1, f2, f3) = (values[i - 1], values[i], values[i + 1], values[i + 2]);
    // Lagrange basis on nodes -1, 0, 1, 2.
    let l0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let l1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let l2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let l3 = (t + 1.0) * t * (t - 1.0) / 6.0;
    Some(l0 * f0 + l1 * f1 + l2 * f2 + l3 * f3)
}

/// Lagrange interpolation through the `points` samples (even, at least 2)
/// nearest to `x`. Returns `None` outside the sampled span.
pub fn interp_lagrange(values: &[f64], x0: f64, dx: f64, x: f64, points: usize) -> Option<f64> {
    let n = values.len();
    if n < points || points < 2 || points % 2 == 1 {
        return None;
    }
    let s = (x - x0) / dx;
    if !(s >= 0.0 && s <= (n - 1) as f64) {
        return None;
    }
    let half = points / 2;
    let start = (s.floor() as usize + 1).saturating_sub(half).min(n - points);
    let mut acc = 0.0;
    for j in 0..points {
        let mut w = 1.0;
        for k in 0..points {
            if k != j {
                w *= (s - (start + k) as f64) / (j as f64 - k as f64);
            }
        }
        acc += w * values[start + j];
    }
    Some(acc)
}

/// Cubic Hermite interpolation on one interval given end values and slopes.
#[inline]
pub fn hermite(x0: f64, x1: f64, f0: f64, f1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * f0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * f1
        + (t3 - t2) * h * d1
}
