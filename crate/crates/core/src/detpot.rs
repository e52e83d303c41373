//! Which static forces commute with Gaussian smearing?
//!
//! A force `F` passes when `F = delta_eps * F` for the normalized Gaussian
//! `delta_eps` of variance `eps/2`. Only forces of the form `a + b x`
//! (potentials up to quadratic order) do. The test is run directly, by FFT
//! convolution on the grid, and in Fourier space, where the condition reads
//! `F_hat(k) (1 - exp(-eps k^2 / 4)) = 0`.
//!
//! Polynomial forces are not periodic, so direct residuals are measured on
//! the central half of the grid, away from wrap-around. Time-dependent
//! coefficients are out of scope: forces are taken at `t = 0`.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{apply_multiplier, fd_derivative, l2_norm, FftPair, Grid, RealField};
use crate::par;
use crate::potential::PotentialSpec;

/// Default relative tolerance of [`classify`].
pub const DEFAULT_TOL: f64 = 1e-8;
/// Guard added to norms used as denominators.
const TINY: f64 = 1e-300;

fn check_width(grid: &Grid, epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::domain(format!("kernel width must be non-negative, got {epsilon}")));
    }
    if epsilon.sqrt() > grid.length() / 12.0 {
        return Err(Error::domain(format!(
            "kernel width sqrt(eps) = {} exceeds a twelfth of the domain",
            epsilon.sqrt()
        )));
    }
    Ok(())
}

/// `1 - exp(-eps k^2 / 4)`: the Fourier-space defect of smearing.
pub fn smearing_defect(epsilon: f64, k: f64) -> f64 {
    -(-0.25 * epsilon * k * k).exp_m1()
}

/// Circular convolution with `(pi eps)^(-1/2) exp(-x^2/eps)`, done as the
/// Fourier multiplier `exp(-eps k^2 / 4)`. `eps = 0` is the identity.
pub fn gaussian_convolve(f: &RealField, epsilon: f64) -> Result<RealField> {
    let grid = *f.grid();
    check_width(&grid, epsilon)?;
    let mut buf: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    apply_multiplier(&grid, &mut buf, |_, k| Complex64::new((-0.25 * epsilon * k * k).exp(), 0.0));
    RealField::new(grid, buf.into_iter().map(|z| z.re).collect())
}

/// Indices of the central half of the grid.
pub fn central_window(grid: &Grid) -> std::ops::Range<usize> {
    grid.n() / 4..3 * grid.n() / 4
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetpotResidual {
    pub epsilon: f64,
    /// `||F - delta_eps * F||` on the central window.
    pub absolute: f64,
    /// `absolute / (||F|| + tiny)`, both on the central window.
    pub relative: f64,
    /// `||F - delta_eps * F||` over the whole periodic grid.
    pub full_domain: f64,
}

pub fn force_residual(force: &RealField, epsilon: f64) -> Result<DetpotResidual> {
    let grid = *force.grid();
    let smeared = gaussian_convolve(force, epsilon)?;
    let diff: Vec<f64> = force.values().iter().zip(smeared.values()).map(|(a, b)| a - b).collect();
    let w = central_window(&grid);
    let absolute = l2_norm(&diff, grid.dx(), w.clone());
    let norm = l2_norm(force.values(), grid.dx(), w);
    Ok(DetpotResidual {
        epsilon,
        absolute,
        relative: absolute / (norm + TINY),
        full_domain: l2_norm(&diff, grid.dx(), 0..grid.n()),
    })
}

/// Residual of the smearing condition for the force of `v` at `t = 0`.
pub fn detpot_residual(v: &PotentialSpec, epsilon: f64, grid: &Grid) -> Result<DetpotResidual> {
    force_residual(&v.force_field(grid, 0.0)?, epsilon)
}

/// Per-mode Fourier residual `|F_hat(k)| |1 - exp(-eps k^2/4)|`, scaled so
/// that the modes' root sum of squares is an L2 norm over the periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierResidual {
    pub wavenumbers: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub residual: Vec<f64>,
}

impl FourierResidual {
    pub fn total(&self) -> f64 {
        self.residual.iter().map(|r| r * r).sum::<f64>().sqrt()
    }
}

pub fn fourier_residual_of(force: &RealField, epsilon: f64) -> Result<FourierResidual> {
    let grid = *force.grid();
    check_width(&grid, epsilon)?;
    let n = grid.n();
    let fft = FftPair::new(n);
    let mut scratch = fft.scratch();
    let mut buf: Vec<Complex64> = force.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut buf, &mut scratch);
    let scale = (grid.dx() / n as f64).sqrt();
    let wavenumbers = grid.wavenumbers();
    let amplitude: Vec<f64> = buf.iter().map(|z| z.norm() * scale).collect();
    let residual = amplitude.iter().zip(&wavenumbers).map(|(a, &k)| a * smearing_defect(epsilon, k)).collect();
    Ok(FourierResidual { wavenumbers, amplitude, residual })
}

pub fn fourier_residual(v: &PotentialSpec, epsilon: f64, grid: &Grid) -> Result<FourierResidual> {
    fourier_residual_of(&v.force_field(grid, 0.0)?, epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Deterministic,
    NonDeterministic,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Deterministic => "Deterministic",
            Verdict::NonDeterministic => "NonDeterministic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetpotReport {
    pub tol: f64,
    pub residuals: Vec<DetpotResidual>,
    /// Integrated Fourier residual per width.
    pub fourier_norms: Vec<f64>,
    /// Least-squares slope of `ln(relative)` against `ln(eps)`; `None` if a
    /// residual is exactly zero.
    pub scaling_exponent: Option<f64>,
    /// `||F''|| / (||F|| + tiny)` on the central window.
    pub second_derivative_norm: f64,
    pub verdict: Verdict,
    pub note: Option<String>,
}

impl DetpotReport {
    pub fn epsilon_list(&self) -> Vec<f64> {
        self.residuals.iter().map(|r| r.epsilon).collect()
    }

    pub fn max_relative(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.relative))
    }
}

/// `{1e-1, 1e-2, 1e-3} (L/12)^2`.
pub fn default_epsilons(grid: &Grid) -> Vec<f64> {
    let base = (grid.length() / 12.0).powi(2);
    vec![1e-1 * base, 1e-2 * base, 1e-3 * base]
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn classify(v: &PotentialSpec, epsilons: &[f64], tol: f64, grid: &Grid) -> Result<DetpotReport> {
    classify_force(&v.force_field(grid, 0.0)?, epsilons, tol)
}

/// Applies the smearing test at every width. Deterministic if every relative
/// residual is within `tol`, non-deterministic if none is, inconclusive
/// otherwise.
pub fn classify_force(force: &RealField, epsilons: &[f64], tol: f64) -> Result<DetpotReport> {
    if epsilons.len() < 3 {
        return Err(Error::domain("classification needs at least three widths"));
    }
    if epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::domain("widths must be positive"));
    }
    let (lo, hi) = epsilons.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &e| (l.min(e), h.max(e)));
    if hi / lo < 100.0 * (1.0 - 1e-9) {
        return Err(Error::domain("widths must span at least two decades"));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let results = par::map_collect(epsilons, |&e| -> Result<(DetpotResidual, f64)> {
        Ok((force_residual(force, e)?, fourier_residual_of(force, e)?.total()))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (residuals, fourier_norms): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let passed = residuals.iter().filter(|r| r.relative <= tol).count();
    let verdict = if passed == residuals.len() {
        Verdict::Deterministic
    } else if passed == 0 {
        Verdict::NonDeterministic
    } else {
        let table: Vec<String> = residuals.iter().map(|r| format!("eps={:e}: {:e}", r.epsilon, r.relative)).collect();
        return Err(Error::Inconclusive(format!(
            "residuals straddle tol = {tol:e} ({}); check grid resolution and window",
            table.join(", ")
        )));
    };

    let scaling_exponent = if residuals.iter().all(|r| r.relative > 0.0) {
        let x: Vec<f64> = residuals.iter().map(|r| r.epsilon.ln()).collect();
        let y: Vec<f64> = residuals.iter().map(|r| r.relative.ln()).collect();
        Some(fit_slope(&x, &y))
    } else {
        None
    };

    let grid = *force.grid();
    let w = central_window(&grid);
    let f2 = fd_derivative(force.values(), grid.dx(), 2, 0..grid.n())?;
    let second_derivative_norm = l2_norm(&f2, grid.dx(), w.clone()) / (l2_norm(force.values(), grid.dx(), w) + TINY);

    let note = match (verdict, scaling_exponent) {
        (Verdict::Deterministic, Some(s)) if (s - 1.0).abs() < 0.2 => Some(format!(
            "residuals below tolerance grow linearly in eps (exponent {s:.3}): a small non-quadratic part of the potential"
        )),
        _ => None,
    };

    Ok(DetpotReport { tol, residuals, fourier_norms, scaling_exponent, second_derivative_norm, verdict, note })
}
