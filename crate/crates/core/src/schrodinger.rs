//! Split-step spectral propagation of the one-dimensional Schrödinger
//! equation with `hbar` as a runtime parameter, plus the closed-form Gaussian
//! packet solutions for the free, constant-force and harmonic potentials.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, FftPair, Grid, RealField};
use crate::potential::{PotentialKind, PotentialSpec};

/// Fraction of points on each side that count as "near the boundary".
pub const EDGE_FRACTION: f64 = 0.05;
/// Largest tolerated share of the norm in the edge points.
pub const LEAK_THRESHOLD: f64 = 1e-10;
/// Largest tolerated deviation of the norm from one.
pub const NORM_TOLERANCE: f64 = 1e-9;
/// Largest phase (radians) any split factor may apply at one grid point.
pub const MAX_SPLIT_PHASE: f64 = 0.5;

/// Steps between boundary checks inside [`propagate`].
const LEAK_CHECK_INTERVAL: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    field: ComplexField,
    hbar: f64,
    mass: f64,
    t: f64,
}

impl WaveFunction {
    /// Wraps a field that is already normalized to one.
    pub fn new(field: ComplexField, hbar: f64, mass: f64, t: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::domain(format!("hbar must be positive, got {hbar}")));
        }
        if !(mass > 0.0) {
            return Err(Error::domain(format!("mass must be positive, got {mass}")));
        }
        let psi = WaveFunction { field, hbar, mass, t };
        let norm = psi.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::domain(format!("wave function norm is {norm}, expected 1")));
        }
        Ok(psi)
    }

    pub fn field(&self) -> &ComplexField {
        &self.field
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn density(&self) -> RealField {
        self.field.density()
    }

    pub fn norm(&self) -> f64 {
        self.grid().dx() * self.field.values().iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Share of `sum |psi|^2` carried by the outer 5% of points on each side.
    pub fn boundary_leak_fraction(&self) -> f64 {
        let v = self.field.values();
        let n = v.len();
        let edge = ((n as f64) * EDGE_FRACTION).ceil() as usize;
        let total: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let outer: f64 = v[..edge].iter().chain(&v[n - edge..]).map(|z| z.norm_sqr()).sum();
        outer / total
    }

    pub fn check_boundary(&self) -> Result<()> {
        let fraction = self.boundary_leak_fraction();
        if fraction > LEAK_THRESHOLD {
            Err(Error::BoundaryLeak { fraction, t: self.t })
        } else {
            Ok(())
        }
    }

    /// Inner product `<self|other>` by quadrature.
    pub fn overlap(&self, other: &WaveFunction) -> Result<Complex64> {
        if self.grid() != other.grid() {
            return Err(Error::domain("overlap of wave functions on different grids"));
        }
        let dx = self.grid().dx();
        Ok(self
            .field
            .values()
            .iter()
            .zip(other.field.values())
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * dx)
    }
}

/// Normalized Gaussian packet `(pi eps)^(-1/4) exp(-(x-r0)^2/(2 eps)) exp(i p0 x/hbar)`,
/// so that `|psi|^2` has variance `eps/2`.
pub fn init_gaussian(grid: &Grid, epsilon: f64, r0: f64, p0: f64, hbar: f64, mass: f64) -> Result<WaveFunction> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::domain(format!("packet width epsilon must be positive, got {epsilon}")));
    }
    if !(hbar > 0.0) {
        return Err(Error::domain(format!("hbar must be positive, got {hbar}")));
    }
    let amp = (PI * epsilon).powf(-0.25);
    let mut values: Vec<Complex64> = (0..grid.n())
        .map(|i| {
            let x = grid.x(i);
            let env = amp * (-(x - r0).powi(2) / (2.0 * epsilon)).exp();
            Complex64::from_polar(env, p0 * x / hbar)
        })
        .collect();
    normalize(&mut values, grid.dx())?;
    let psi = WaveFunction::new(ComplexField::new(*grid, values)?, hbar, mass, 0.0)?;
    psi.check_boundary()?;
    Ok(psi)
}

pub(crate) fn normalize(values: &mut [Complex64], dx: f64) -> Result<()> {
    let norm = dx * values.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::domain("cannot normalize a vanishing wave function"));
    }
    let s = norm.sqrt().recip();
    values.iter_mut().for_each(|z| *z *= s);
    Ok(())
}

/// Largest step for which every split factor rotates by at most
/// [`MAX_SPLIT_PHASE`]: the full kinetic phase `hbar k^2 dt / 2m` at the
/// Nyquist wavenumber and the half potential phase `|V| dt / 2 hbar`.
pub fn max_stable_dt(grid: &Grid, potential: &PotentialSpec, hbar: f64, t: f64) -> Result<f64> {
    let m = potential.mass();
    let k = grid.k_max();
    let kinetic = MAX_SPLIT_PHASE * 2.0 * m / (hbar * k * k);
    let v_max = potential.potential_field(grid, t)?.max_abs();
    let pot = if v_max > 0.0 { MAX_SPLIT_PHASE * 2.0 * hbar / v_max } else { f64::INFINITY };
    Ok(kinetic.min(pot))
}

/// Number of equal steps of size at most `dt_max` covering `duration`.
pub fn steps_for(duration: f64, dt_max: f64) -> (usize, f64) {
    let n = (duration / dt_max).ceil().max(1.0) as usize;
    (n, duration / n as f64)
}

/// Strang-split propagation: half potential phase, full kinetic phase in
/// Fourier space, half potential phase, `n_steps` times.
///
/// On failure `psi` holds the state reached so far.
pub fn propagate(psi: &mut WaveFunction, potential: &PotentialSpec, dt: f64, n_steps: usize) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("time step must be positive, got {dt}")));
    }
    if (psi.mass - potential.mass()).abs() > 1e-12 * psi.mass {
        return Err(Error::domain("wave function and potential disagree on the mass"));
    }
    let grid = *psi.grid();
    let hbar = psi.hbar;
    let n = grid.n();
    let dt_max = max_stable_dt(&grid, potential, hbar, psi.t)?;
    if dt > dt_max * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "time step {dt:e} exceeds the split-phase limit {dt_max:e}"
        )));
    }

    let kinetic: Vec<Complex64> = (0..n)
        .map(|j| {
            let k = grid.wavenumber(j);
            Complex64::from_polar(1.0, -hbar * k * k * dt / (2.0 * psi.mass))
        })
        .collect();
    let half_phase = |t: f64| -> Result<Vec<Complex64>> {
        let v = potential.potential_field(&grid, t)?;
        Ok(v.values().iter().map(|&v| Complex64::from_polar(1.0, -v * dt / (2.0 * hbar))).collect())
    };
    let static_half = if potential.is_static() { Some(half_phase(psi.t)?) } else { None };

    let fft = FftPair::new(n);
    let mut scratch = fft.scratch();
    for step in 0..n_steps {
        let t1 = psi.t + dt;
        let dynamic;
        let (h0, h1): (&[Complex64], &[Complex64]) = match &static_half {
            Some(h) => (h, h),
            None => {
                if max_stable_dt(&grid, potential, hbar, t1)? * (1.0 + 1e-12) < dt {
                    return Err(Error::domain(format!(
                        "time step {dt:e} exceeds the split-phase limit at t = {t1}"
                    )));
                }
                dynamic = (half_phase(psi.t)?, half_phase(t1)?);
                (&dynamic.0, &dynamic.1)
            }
        };
        let buf = psi.field.values_mut();
        buf.iter_mut().zip(h0).for_each(|(z, h)| *z *= h);
        fft.forward(buf, &mut scratch);
        buf.iter_mut().zip(&kinetic).for_each(|(z, k)| *z *= k);
        fft.inverse(buf, &mut scratch);
        buf.iter_mut().zip(h1).for_each(|(z, h)| *z *= h);
        psi.t = t1;
        if (step + 1) % LEAK_CHECK_INTERVAL == 0 {
            psi.check_boundary()?;
        }
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::domain(format!("norm drifted to {norm}")));
    }
    psi.check_boundary()
}

/// Position and momentum moments of a wave function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub x_mean: f64,
    pub p_mean: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub uncertainty_product: f64,
    /// `2 var_x`, so that a packet `exp(-(x-r)^2/A)` reports width `A`.
    pub width: f64,
    pub kurtosis_excess: f64,
}

/// Momentum distribution weights `|psi_hat(k_j)|^2`, normalized to sum one.
fn momentum_weights(psi: &WaveFunction) -> Vec<f64> {
    let grid = psi.grid();
    let fft = FftPair::new(grid.n());
    let mut scratch = fft.scratch();
    let mut buf = psi.field.values().to_vec();
    fft.forward(&mut buf, &mut scratch);
    let mut w: Vec<f64> = buf.iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

pub fn observables(psi: &WaveFunction) -> Observables {
    let grid = psi.grid();
    let rho = psi.density();
    let dx = grid.dx();
    let mass: f64 = rho.values().iter().sum::<f64>() * dx;
    let moment = |f: &dyn Fn(f64) -> f64| -> f64 {
        rho.values().iter().enumerate().map(|(i, r)| r * f(grid.x(i))).sum::<f64>() * dx / mass
    };
    let x_mean = moment(&|x| x);
    let var_x = moment(&|x| (x - x_mean).powi(2));
    let m4 = moment(&|x| (x - x_mean).powi(4));

    let w = momentum_weights(psi);
    let hbar = psi.hbar;
    let k_mean: f64 = w.iter().enumerate().map(|(j, p)| p * grid.wavenumber(j)).sum();
    let var_k: f64 = w
        .iter()
        .enumerate()
        .map(|(j, p)| p * (grid.wavenumber(j) - k_mean).powi(2))
        .sum();
    let var_p = hbar * hbar * var_k;
    Observables {
        x_mean,
        p_mean: hbar * k_mean,
        var_x,
        var_p,
        uncertainty_product: (var_x * var_p).sqrt(),
        width: 2.0 * var_x,
        kurtosis_excess: m4 / (var_x * var_x) - 3.0,
    }
}

/// `<p^2>/2m + <V>` at the wave function's current time.
pub fn energy(psi: &WaveFunction, potential: &PotentialSpec) -> Result<f64> {
    let grid = psi.grid();
    let w = momentum_weights(psi);
    let kinetic: f64 = w
        .iter()
        .enumerate()
        .map(|(j, p)| p * (psi.hbar * grid.wavenumber(j)).powi(2))
        .sum::<f64>()
        / (2.0 * psi.mass);
    let v = potential.potential_field(grid, psi.t)?;
    let rho = psi.density();
    let pot: f64 = rho.values().iter().zip(v.values()).map(|(r, v)| r * v).sum::<f64>() * grid.dx();
    Ok(kinetic + pot)
}

/// The three potentials with closed-form Gaussian packet solutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticCase {
    Free,
    ConstantForce { f0: f64 },
    Harmonic { omega: f64 },
}

impl AnalyticCase {
    /// Recognizes the builtins and static polynomials `c0`, `c0 + c1 x`,
    /// `c0 + c2 x^2` (`c2 > 0`).
    pub fn from_potential(v: &PotentialSpec) -> Result<Self> {
        let unknown = || Error::domain("potential has no closed-form Gaussian packet solution");
        match v.kind() {
            PotentialKind::Free => Ok(AnalyticCase::Free),
            PotentialKind::ConstantForce { f0 } => Ok(AnalyticCase::ConstantForce { f0: *f0 }),
            PotentialKind::Harmonic { omega } => Ok(AnalyticCase::Harmonic { omega: *omega }),
            PotentialKind::Polynomial(p) if p.is_static() => {
                let c = p.coeffs_at(0.0);
                let get = |i: usize| c.get(i).copied().unwrap_or(0.0);
                if c.iter().skip(3).any(|v| *v != 0.0) {
                    return Err(unknown());
                }
                match (get(1), get(2)) {
                    (0.0, 0.0) => Ok(AnalyticCase::Free),
                    (c1, 0.0) => Ok(AnalyticCase::ConstantForce { f0: -c1 }),
                    (0.0, c2) if c2 > 0.0 => Ok(AnalyticCase::Harmonic { omega: (2.0 * c2 / v.mass()).sqrt() }),
                    _ => Err(unknown()),
                }
            }
            _ => Err(unknown()),
        }
    }
}

/// Closed-form state of a Gaussian packet at time `t`.
///
/// The density is `(pi A)^(-1/2) exp(-(x - r)^2 / A)` with `A = epsilon_t`,
/// and the action is `S = beta (x-r)^2 + p (x-r) + phi(t)`. `hbar = 0` gives
/// the classical (PHJ) limit of the same family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacketState {
    pub case: AnalyticCase,
    pub epsilon0: f64,
    pub r0: f64,
    pub p0: f64,
    pub hbar: f64,
    pub mass: f64,
    pub t: f64,
    pub epsilon_t: f64,
    pub r_t: f64,
    pub p_t: f64,
}

pub fn analytic_gaussian(
    case: AnalyticCase,
    epsilon0: f64,
    r0: f64,
    p0: f64,
    hbar: f64,
    mass: f64,
    t: f64,
) -> Result<GaussianPacketState> {
    if !(epsilon0 > 0.0) || !(mass > 0.0) || !(hbar >= 0.0) {
        return Err(Error::domain("analytic packet needs epsilon > 0, mass > 0 and hbar >= 0"));
    }
    if let AnalyticCase::Harmonic { omega } = case {
        if !(omega > 0.0) {
            return Err(Error::domain("harmonic frequency must be positive"));
        }
    }
    let mut s = GaussianPacketState {
        case,
        epsilon0,
        r0,
        p0,
        hbar,
        mass,
        t,
        epsilon_t: 0.0,
        r_t: 0.0,
        p_t: 0.0,
    };
    let (a, _, _) = s.width_derivatives();
    let (r, p) = s.newton();
    s.epsilon_t = a;
    s.r_t = r;
    s.p_t = p;
    Ok(s)
}

impl GaussianPacketState {
    /// Same packet at another time.
    pub fn at(&self, t: f64) -> GaussianPacketState {
        analytic_gaussian(self.case, self.epsilon0, self.r0, self.p0, self.hbar, self.mass, t)
            .expect("parameters were validated on construction")
    }

    fn newton(&self) -> (f64, f64) {
        let (m, t, r0, p0) = (self.mass, self.t, self.r0, self.p0);
        match self.case {
            AnalyticCase::Free => (r0 + p0 * t / m, p0),
            AnalyticCase::ConstantForce { f0 } => (r0 + p0 * t / m + f0 * t * t / (2.0 * m), p0 + f0 * t),
            AnalyticCase::Harmonic { omega } => {
                let (s, c) = (omega * t).sin_cos();
                (r0 * c + p0 / (m * omega) * s, p0 * c - m * omega * r0 * s)
            }
        }
    }

    fn force_at(&self, x: f64) -> f64 {
        match self.case {
            AnalyticCase::Free => 0.0,
            AnalyticCase::ConstantForce { f0 } => f0,
            AnalyticCase::Harmonic { omega } => -self.mass * omega * omega * x,
        }
    }

    fn potential_at(&self, x: f64) -> f64 {
        match self.case {
            AnalyticCase::Free => 0.0,
            AnalyticCase::ConstantForce { f0 } => -f0 * x,
            AnalyticCase::Harmonic { omega } => 0.5 * self.mass * omega * omega * x * x,
        }
    }

    /// `(A, dA/dt, d2A/dt2)`.
    pub fn width_derivatives(&self) -> (f64, f64, f64) {
        let (e, m, t, h) = (self.epsilon0, self.mass, self.t, self.hbar);
        match self.case {
            AnalyticCase::Free | AnalyticCase::ConstantForce { .. } => {
                let b2 = (h / (e * m)).powi(2);
                (e * (1.0 + b2 * t * t), 2.0 * e * b2 * t, 2.0 * e * b2)
            }
            AnalyticCase::Harmonic { omega } => {
                let a2 = (h / (e * m * omega)).powi(2);
                let (s, c) = (omega * t).sin_cos();
                let (s2, c2) = (2.0 * omega * t).sin_cos();
                (
                    e * (c * c + a2 * s * s),
                    e * omega * (a2 - 1.0) * s2,
                    2.0 * e * omega * omega * (a2 - 1.0) * c2,
                )
            }
        }
    }

    /// `int_0^t hbar^2 / (m A) dt'` divided by `hbar`, continuous in `t`.
    fn gouy_angle(&self) -> f64 {
        let (e, m, t, h) = (self.epsilon0, self.mass, self.t, self.hbar);
        match self.case {
            AnalyticCase::Free | AnalyticCase::ConstantForce { .. } => (h * t / (e * m)).atan(),
            AnalyticCase::Harmonic { omega } => {
                let a = h / (e * m * omega);
                let phase = omega * t;
                let turns = (phase / PI).round();
                let reduced = phase - turns * PI;
                (a * reduced.tan()).atan() + turns * PI
            }
        }
    }

    /// Classical action `int_0^t L dt'` along the centre trajectory.
    fn classical_action(&self) -> f64 {
        let (m, t, r0, p0) = (self.mass, self.t, self.r0, self.p0);
        match self.case {
            AnalyticCase::Free => p0 * p0 * t / (2.0 * m),
            AnalyticCase::ConstantForce { f0 } => {
                (p0 * p0 * t + p0 * f0 * t * t + f0 * f0 * t.powi(3) / 3.0) / (2.0 * m)
                    + f0 * (r0 * t + p0 * t * t / (2.0 * m) + f0 * t.powi(3) / (6.0 * m))
            }
            AnalyticCase::Harmonic { .. } => 0.5 * (self.p_t * self.r_t - p0 * r0),
        }
    }

    /// Time-dependent part of the action, `phi(t)`, with `S(x, 0) = p0 x`.
    pub fn phase_offset(&self) -> f64 {
        self.p0 * self.r0 + self.classical_action() - 0.5 * self.hbar * self.gouy_angle()
    }

    /// Curvature coefficient `beta = (m/4) A'/A` of the action.
    pub fn beta(&self) -> f64 {
        let (a, da, _) = self.width_derivatives();
        0.25 * self.mass * da / a
    }

    pub fn density(&self, x: f64) -> f64 {
        let a = self.epsilon_t;
        (PI * a).powf(-0.5) * (-(x - self.r_t).powi(2) / a).exp()
    }

    pub fn action(&self, x: f64) -> f64 {
        let y = x - self.r_t;
        self.beta() * y * y + self.p_t * y + self.phase_offset()
    }

    /// `dS/dt` at fixed `x`.
    pub fn action_dt(&self, x: f64) -> f64 {
        let (a, da, dda) = self.width_derivatives();
        let m = self.mass;
        let beta = 0.25 * m * da / a;
        let dbeta = 0.25 * m * (dda / a - (da / a).powi(2));
        let rdot = self.p_t / m;
        let pdot = self.force_at(self.r_t);
        let lagrangian = self.p_t * self.p_t / (2.0 * m) - self.potential_at(self.r_t);
        let dphi = lagrangian - self.hbar * self.hbar / (2.0 * m * a);
        let y = x - self.r_t;
        dbeta * y * y - 2.0 * beta * rdot * y + pdot * y - self.p_t * rdot + dphi
    }

    /// Closed-form quantum term `(hbar^2 / 2 m A^2)(A - (x-r)^2)`.
    pub fn quantum_term(&self, x: f64) -> f64 {
        let a = self.epsilon_t;
        self.hbar * self.hbar / (2.0 * self.mass * a * a) * (a - (x - self.r_t).powi(2))
    }

    /// Uncertainty product `sqrt(var_x var_p)` of the packet.
    pub fn uncertainty_product(&self) -> f64 {
        let a = self.epsilon_t;
        let var_x = 0.5 * a;
        // var_p = hbar^2/(2A) + (2 beta)^2 var_x for S = beta y^2 + ...
        let var_p = self.hbar * self.hbar / (2.0 * a) + (2.0 * self.beta()).powi(2) * var_x;
        (var_x * var_p).sqrt()
    }

    /// Samples the packet as a wave function (requires `hbar > 0`).
    pub fn wavefunction(&self, grid: &Grid) -> Result<WaveFunction> {
        if !(self.hbar > 0.0) {
            return Err(Error::domain("a wave function needs hbar > 0"));
        }
        let mut values: Vec<Complex64> = (0..grid.n())
            .map(|i| {
                let x = grid.x(i);
                Complex64::from_polar(self.density(x).sqrt(), self.action(x) / self.hbar)
            })
            .collect();
        normalize(&mut values, grid.dx())?;
        WaveFunction::new(ComplexField::new(*grid, values)?, self.hbar, self.mass, self.t)
    }
}
