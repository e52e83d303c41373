//! Madelung variables `psi = sqrt(rho) exp(i S / hbar)`, the quantum term
//! `-(hbar^2/2m) (sqrt rho)'' / sqrt rho`, and residuals of the continuity,
//! quantum Hamilton-Jacobi and classical Hamilton-Jacobi equations.
//!
//! The phase `S` is undefined where the density vanishes. Nodes below
//! `floor * max(rho)` are masked; the remaining support must be one
//! contiguous interval, otherwise unwrapping is ambiguous and a
//! [`Error::Node`] is returned. All derivatives of `S` and `ln rho` use the
//! non-periodic finite-difference route restricted to the support.
//!
//! Terminology: the `hbar^2` coupling of `rho` into `S` is called the
//! *quantum term* here, never "quantum potential"; it is not an externally
//! controlled potential.

use std::f64::consts::TAU;
use std::ops::Range;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{fd_derivative, integrate, l2_norm, ComplexField, Grid, RealField, FD_POINTS};
use crate::potential::PotentialSpec;
use crate::schrodinger::{normalize, GaussianPacketState, WaveFunction};

/// Default relative density floor below which `S` is masked.
pub const DEFAULT_FLOOR: f64 = 1e-12;
/// Largest share of probability mass allowed on masked nodes.
pub const MAX_MASKED_MASS: f64 = 0.2;

/// Contiguous index range where `rho >= floor * max(rho)`.
pub fn density_support(rho: &RealField, floor: f64) -> Result<Range<usize>> {
    let v = rho.values();
    if v.iter().any(|r| *r < 0.0) {
        return Err(Error::domain("density must be non-negative"));
    }
    let max = v.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::domain("density vanishes everywhere"));
    }
    let cut = floor * max;
    let lo = v.iter().position(|r| *r >= cut).expect("max is above the cut");
    let hi = v.iter().rposition(|r| *r >= cut).expect("max is above the cut") + 1;
    if let Some(i) = (lo..hi).find(|&i| v[i] < cut) {
        return Err(Error::Node(format!(
            "density drops below the floor at x = {} inside its support",
            rho.grid().x(i)
        )));
    }
    if hi - lo < FD_POINTS {
        return Err(Error::domain(format!(
            "density support spans {} points; at least {FD_POINTS} are needed",
            hi - lo
        )));
    }
    Ok(lo..hi)
}

/// A real field meaningful only on `support`; zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportedField {
    pub field: RealField,
    pub support: Range<usize>,
}

impl SupportedField {
    pub fn norm(&self) -> f64 {
        l2_norm(self.field.values(), self.field.grid().dx(), self.support.clone())
    }

    pub fn max_abs(&self) -> f64 {
        self.field.values()[self.support.clone()].iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MadelungFields {
    rho: RealField,
    s: RealField,
    hbar: f64,
    support: Range<usize>,
    anchor: usize,
}

impl MadelungFields {
    /// Builds fields from a density and an action; `s` is used as given.
    pub fn new(rho: RealField, s: RealField, hbar: f64, floor: f64) -> Result<Self> {
        if rho.grid() != s.grid() {
            return Err(Error::domain("rho and S live on different grids"));
        }
        if !(hbar >= 0.0) {
            return Err(Error::domain("hbar must be non-negative"));
        }
        let support = density_support(&rho, floor)?;
        let anchor = argmax(rho.values());
        let f = MadelungFields { rho, s, hbar, support, anchor };
        let norm = integrate(&f.rho);
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::domain(format!("density integrates to {norm}, expected 1")));
        }
        Ok(f)
    }

    /// Samples a closed-form Gaussian packet.
    pub fn from_analytic(state: &GaussianPacketState, grid: &Grid, floor: f64) -> Result<Self> {
        let rho = RealField::from_fn(*grid, |x| state.density(x))?;
        let s = RealField::from_fn(*grid, |x| state.action(x))?;
        MadelungFields::new(rho, s, state.hbar, floor)
    }

    pub fn rho(&self) -> &RealField {
        &self.rho
    }

    pub fn action(&self) -> &RealField {
        &self.s
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    pub fn support(&self) -> Range<usize> {
        self.support.clone()
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn mask(&self) -> Vec<bool> {
        (0..self.grid().n()).map(|i| !self.support.contains(&i)).collect()
    }

    /// Fraction of grid points that are masked.
    pub fn masked_fraction(&self) -> f64 {
        1.0 - self.support.len() as f64 / self.grid().n() as f64
    }

    /// Fraction of the probability mass sitting on masked points.
    pub fn masked_mass_fraction(&self) -> f64 {
        let v = self.rho.values();
        let total: f64 = v.iter().sum();
        let inside: f64 = v[self.support.clone()].iter().sum();
        ((total - inside) / total).max(0.0)
    }

    fn require_phase(&self) -> Result<()> {
        let f = self.masked_mass_fraction();
        if f > MAX_MASKED_MASS {
            return Err(Error::domain(format!("{:.1}% of the mass is masked; S is not usable", 100.0 * f)));
        }
        Ok(())
    }

    /// Shifts `S` by a multiple of `2 pi hbar` so it agrees with `reference`
    /// at the reference anchor.
    pub fn align_to(&mut self, reference: &MadelungFields) {
        if self.hbar == 0.0 {
            return;
        }
        let a = reference.anchor;
        let period = TAU * self.hbar;
        let turns = ((reference.s.values()[a] - self.s.values()[a]) / period).round();
        if turns != 0.0 {
            self.s = self.s.map(|v| v + turns * period).expect("finite shift of a finite field");
        }
    }

    /// `dS/dx` on the support.
    pub fn momentum_field(&self) -> Result<SupportedField> {
        self.require_phase()?;
        let d = fd_derivative(self.s.values(), self.grid().dx(), 1, self.support())?;
        Ok(SupportedField { field: RealField::new(*self.grid(), d)?, support: self.support() })
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

/// Madelung decomposition of `psi`: `rho = |psi|^2` and `S = hbar arg(psi)`
/// unwrapped outward from the density maximum (where `S` lies in `(-pi hbar, pi hbar]`).
pub fn to_madelung(psi: &WaveFunction, floor: f64) -> Result<MadelungFields> {
    let rho = psi.density();
    let support = density_support(&rho, floor)?;
    let v = psi.field().values();
    let n = v.len();
    let anchor = argmax(rho.values());
    let mut theta = vec![0.0; n];
    theta[anchor] = v[anchor].arg();
    for i in anchor + 1..n {
        theta[i] = theta[i - 1] + (v[i] * v[i - 1].conj()).arg();
    }
    for i in (0..anchor).rev() {
        theta[i] = theta[i + 1] + (v[i] * v[i + 1].conj()).arg();
    }
    let hbar = psi.hbar();
    let s = RealField::new(*psi.grid(), theta.into_iter().map(|t| hbar * t).collect())?;
    Ok(MadelungFields { rho, s, hbar, support, anchor })
}

/// `psi = sqrt(rho) exp(i S / hbar)`; masked points get phase zero.
pub fn from_madelung(f: &MadelungFields, mass: f64) -> Result<WaveFunction> {
    f.require_phase()?;
    if !(f.hbar > 0.0) {
        return Err(Error::domain("a wave function needs hbar > 0"));
    }
    let mut values: Vec<Complex64> = (0..f.grid().n())
        .map(|i| {
            let amp = f.rho.values()[i].sqrt();
            if f.support.contains(&i) {
                Complex64::from_polar(amp, f.s.values()[i] / f.hbar)
            } else {
                Complex64::new(amp, 0.0)
            }
        })
        .collect();
    normalize(&mut values, f.grid().dx())?;
    WaveFunction::new(ComplexField::new(*f.grid(), values)?, f.hbar, mass, 0.0)
}

/// `-(hbar^2 / 2m) (sqrt rho)'' / sqrt rho`, evaluated as
/// `-(hbar^2/2m)(u'' + u'^2)` with `u = ln(rho)/2` on the density support.
pub fn quantum_term(rho: &RealField, hbar: f64, mass: f64, floor: f64) -> Result<SupportedField> {
    if !(hbar >= 0.0) || !(mass > 0.0) {
        return Err(Error::domain("quantum term needs hbar >= 0 and mass > 0"));
    }
    let support = density_support(rho, floor)?;
    let values = quantum_values(rho, hbar, mass, support.clone())?;
    Ok(SupportedField { field: RealField::new(*rho.grid(), values)?, support })
}

fn quantum_values(rho: &RealField, hbar: f64, mass: f64, support: Range<usize>) -> Result<Vec<f64>> {
    let dx = rho.grid().dx();
    // relative to the peak so that flat densities difference to exact zeros
    let peak = rho.values().iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    let u: Vec<f64> = rho.values().iter().map(|r| 0.5 * (r.max(f64::MIN_POSITIVE) / peak).ln()).collect();
    let du = fd_derivative(&u, dx, 1, support.clone())?;
    let ddu = fd_derivative(&u, dx, 2, support.clone())?;
    let pref = -hbar * hbar / (2.0 * mass);
    Ok((0..u.len())
        .map(|i| if support.contains(&i) { pref * (ddu[i] + du[i] * du[i]) } else { 0.0 })
        .collect())
}

fn intersect(a: &Range<usize>, b: &Range<usize>) -> Result<Range<usize>> {
    let r = a.start.max(b.start)..a.end.min(b.end);
    if r.len() < FD_POINTS {
        return Err(Error::domain("supports of the two snapshots barely overlap"));
    }
    Ok(r)
}

/// Norms of the pieces of the continuity equation at the midpoint of two
/// snapshots `dt` apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityResidual {
    /// `|| d rho/dt + d/dx (rho S'/m) ||`
    pub residual: f64,
    /// `|| d/dx (rho S'/m) ||`
    pub transport: f64,
}

pub fn continuity_terms(f1: &MadelungFields, f2: &MadelungFields, dt: f64, mass: f64) -> Result<ContinuityResidual> {
    if f1.grid() != f2.grid() {
        return Err(Error::domain("continuity residual of snapshots on different grids"));
    }
    if !(dt > 0.0) || !(mass > 0.0) {
        return Err(Error::domain("continuity residual needs dt > 0 and mass > 0"));
    }
    f1.require_phase()?;
    f2.require_phase()?;
    let grid = *f1.grid();
    let dx = grid.dx();
    let support = intersect(&f1.support, &f2.support)?;
    let (r1, r2) = (f1.rho.values(), f2.rho.values());
    let (s1, s2) = (f1.s.values(), f2.s.values());
    let s_mid: Vec<f64> = s1.iter().zip(s2).map(|(a, b)| 0.5 * (a + b)).collect();
    let ds = fd_derivative(&s_mid, dx, 1, support.clone())?;
    let flux: Vec<f64> = (0..grid.n()).map(|i| 0.5 * (r1[i] + r2[i]) * ds[i] / mass).collect();
    let dflux = fd_derivative(&flux, dx, 1, support.clone())?;
    let resid: Vec<f64> = (0..grid.n()).map(|i| (r2[i] - r1[i]) / dt + dflux[i]).collect();
    Ok(ContinuityResidual {
        residual: l2_norm(&resid, dx, support.clone()),
        transport: l2_norm(&dflux, dx, support),
    })
}

pub fn continuity_residual(f1: &MadelungFields, f2: &MadelungFields, dt: f64, mass: f64) -> Result<f64> {
    Ok(continuity_terms(f1, f2, dt, mass)?.residual)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HjMode {
    /// Quantum Hamilton-Jacobi equation, including the quantum term.
    Quantum,
    /// Classical Hamilton-Jacobi equation; `hbar` is ignored.
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HjResidual {
    pub residual: f64,
    /// Sum of the norms of the individual terms, for relative comparisons.
    pub scale: f64,
    pub quantum_term_norm: f64,
}

impl HjResidual {
    pub fn relative(&self) -> f64 {
        self.residual / self.scale.max(f64::MIN_POSITIVE)
    }
}

/// Norm over the support of `S_t + S_x^2/2m + V + Q`, where `Q` is the
/// quantum term (quantum mode only).
pub fn hj_residual(
    f: &MadelungFields,
    ds_dt: &RealField,
    potential: &PotentialSpec,
    t: f64,
    mode: HjMode,
) -> Result<HjResidual> {
    if ds_dt.grid() != f.grid() {
        return Err(Error::domain("dS/dt lives on a different grid"));
    }
    if mode == HjMode::Quantum && !(f.hbar > 0.0) {
        return Err(Error::domain("quantum mode needs hbar > 0"));
    }
    f.require_phase()?;
    let grid = *f.grid();
    let dx = grid.dx();
    let m = potential.mass();
    let support = f.support();
    let ds = fd_derivative(f.s.values(), dx, 1, support.clone())?;
    let q = quantum_values(&f.rho, f.hbar, m, support.clone())?;
    let mut resid = vec![0.0; grid.n()];
    let (mut n_t, mut n_k, mut n_v, mut n_q) = (0.0, 0.0, 0.0, 0.0);
    for i in support.clone() {
        let st = ds_dt.values()[i];
        let kin = ds[i] * ds[i] / (2.0 * m);
        let v = potential.eval_potential(grid.x(i), t)?;
        let qi = q[i];
        resid[i] = st + kin + v + if mode == HjMode::Quantum { qi } else { 0.0 };
        n_t += st * st;
        n_k += kin * kin;
        n_v += v * v;
        n_q += qi * qi;
    }
    let norm = |s: f64| (s * dx).sqrt();
    let quantum_term_norm = norm(n_q);
    Ok(HjResidual {
        residual: l2_norm(&resid, dx, support),
        scale: norm(n_t) + norm(n_k) + norm(n_v) + if mode == HjMode::Quantum { quantum_term_norm } else { 0.0 },
        quantum_term_norm,
    })
}

fn aligned(reference: &MadelungFields, other: &MadelungFields) -> Result<Vec<f64>> {
    if reference.grid() != other.grid() {
        return Err(Error::domain("snapshots live on different grids"));
    }
    let mut o = other.clone();
    o.align_to(reference);
    Ok(o.s.into_values())
}

/// `dS/dt` at the middle of three snapshots by the centered difference
/// `(S_next - S_prev) / (2 dt)`; phases are aligned to `mid`.
pub fn action_rate_centered(prev: &MadelungFields, mid: &MadelungFields, next: &MadelungFields, dt: f64) -> Result<RealField> {
    let a = aligned(mid, prev)?;
    let b = aligned(mid, next)?;
    RealField::new(*mid.grid(), a.iter().zip(&b).map(|(a, b)| (b - a) / (2.0 * dt)).collect())
}

/// `dS/dt` at the first of three equally spaced snapshots by the one-sided
/// second-order difference `(-3 S0 + 4 S1 - S2) / (2 dt)`.
pub fn action_rate_forward(s0: &MadelungFields, s1: &MadelungFields, s2: &MadelungFields, dt: f64) -> Result<RealField> {
    let a = s0.s.values();
    let b = aligned(s0, s1)?;
    let c = aligned(s0, s2)?;
    RealField::new(
        *s0.grid(),
        (0..a.len()).map(|i| (-3.0 * a[i] + 4.0 * b[i] - c[i]) / (2.0 * dt)).collect(),
    )
}
