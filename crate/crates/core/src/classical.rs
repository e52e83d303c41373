//! Newtonian trajectories, Liouville transport of phase-space densities, the
//! point-particle (delta) solution of the Liouville equation in weak form,
//! and Ehrenfest relations for expectation-value series.

use crate::error::{Error, Result};
use crate::madelung::MadelungFields;
use crate::par;
use crate::potential::PotentialSpec;
use crate::schrodinger::{observables, WaveFunction};

/// Default `|r|` beyond which a trajectory counts as escaped.
pub const DEFAULT_ESCAPE_BOUND: f64 = 1e6;
/// Largest tolerated change of the phase-space mass.
pub const MASS_DRIFT_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub mass: f64,
    pub times: Vec<f64>,
    pub r: Vec<f64>,
    pub p: Vec<f64>,
    pub energy: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `max |E(t) - E(0)|`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().fold(0.0, |m, e| m.max((e - e0).abs()))
    }
}

/// One velocity-Verlet step from `(x, p)` at time `t`.
pub fn verlet_step(v: &PotentialSpec, x: f64, p: f64, t: f64, dt: f64) -> Result<(f64, f64)> {
    let m = v.mass();
    let p_half = p + 0.5 * dt * v.eval_force(x, t)?;
    let x1 = x + dt * p_half / m;
    Ok((x1, p_half + 0.5 * dt * v.eval_force(x1, t + dt)?))
}

pub fn newton_integrate(v: &PotentialSpec, r0: f64, p0: f64, dt: f64, n_steps: usize) -> Result<Trajectory> {
    newton_integrate_bounded(v, r0, p0, dt, n_steps, DEFAULT_ESCAPE_BOUND)
}

/// Velocity-Verlet integration of `m r'' = -V'(r, t)` from `t = 0`, failing
/// with [`Error::Escape`] once `|r| > bound`.
pub fn newton_integrate_bounded(
    v: &PotentialSpec,
    r0: f64,
    p0: f64,
    dt: f64,
    n_steps: usize,
    bound: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("time step must be positive, got {dt}")));
    }
    let m = v.mass();
    let energy = |x: f64, p: f64, t: f64| -> Result<f64> { Ok(p * p / (2.0 * m) + v.eval_potential(x, t)?) };
    let mut tr = Trajectory {
        mass: m,
        times: Vec::with_capacity(n_steps + 1),
        r: Vec::with_capacity(n_steps + 1),
        p: Vec::with_capacity(n_steps + 1),
        energy: Vec::with_capacity(n_steps + 1),
    };
    let (mut x, mut p) = (r0, p0);
    tr.times.push(0.0);
    tr.r.push(x);
    tr.p.push(p);
    tr.energy.push(energy(x, p, 0.0)?);
    let mut force = v.eval_force(x, 0.0)?;
    for k in 0..n_steps {
        let t1 = (k + 1) as f64 * dt;
        let p_half = p + 0.5 * dt * force;
        x += dt * p_half / m;
        if !(x.abs() <= bound) {
            return Err(Error::Escape { r: x.abs(), t: t1 });
        }
        force = v.eval_force(x, t1)?;
        p = p_half + 0.5 * dt * force;
        tr.times.push(t1);
        tr.r.push(x);
        tr.p.push(p);
        tr.energy.push(energy(x, p, t1)?);
    }
    Ok(tr)
}

/// Uniform nodes `min + i (max - min) / (n - 1)`, both ends included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) || n < 2 {
            return Err(Error::domain(format!("invalid axis [{min}, {max}] with {n} nodes")));
        }
        Ok(Axis { min, max, n })
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    pub fn at(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step()
    }

    /// Cell index and fractional offset for linear interpolation.
    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let s = (x - self.min) / self.step();
        if !(s >= 0.0 && s <= (self.n - 1) as f64) {
            return None;
        }
        let i = (s.floor() as usize).min(self.n - 2);
        Some((i, s - i as f64))
    }
}

/// Density on an `x` by `p` node grid, stored with `p` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDensity {
    pub x: Axis,
    pub p: Axis,
    pub t: f64,
    values: Vec<f64>,
}

impl PhaseDensity {
    pub fn new(x: Axis, p: Axis, t: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != x.n * p.n {
            return Err(Error::domain("phase density has the wrong number of values"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::domain("phase density must be finite and non-negative"));
        }
        let d = PhaseDensity { x, p, t, values };
        if (d.mass() - 1.0).abs() > 1e-6 {
            return Err(Error::domain(format!("phase density has mass {}, expected 1", d.mass())));
        }
        Ok(d)
    }

    /// Samples `f` and normalizes the result to unit mass.
    pub fn from_fn(x: Axis, p: Axis, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values: Vec<f64> = (0..x.n).flat_map(|i| (0..p.n).map(move |j| (i, j))).map(|(i, j)| f(x.at(i), p.at(j))).collect();
        let total: f64 = values.iter().sum::<f64>() * x.step() * p.step();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::domain("cannot normalize a vanishing phase density"));
        }
        values.iter_mut().for_each(|v| *v /= total);
        PhaseDensity::new(x, p, 0.0, values)
    }

    /// Product Gaussian centred at `(x0, p0)` with standard deviations `sx`, `sp`.
    pub fn gaussian(x: Axis, p: Axis, x0: f64, p0: f64, sx: f64, sp: f64) -> Result<Self> {
        PhaseDensity::from_fn(x, p, |a, b| (-0.5 * ((a - x0) / sx).powi(2) - 0.5 * ((b - p0) / sp).powi(2)).exp())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p.n + j]
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.x.step() * self.p.step()
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        (0..self.x.n).map(|i| (0..self.p.n).map(|j| self.get(i, j)).sum::<f64>() * self.p.step()).collect()
    }

    pub fn marginal_p(&self) -> Vec<f64> {
        (0..self.p.n).map(|j| (0..self.x.n).map(|i| self.get(i, j)).sum::<f64>() * self.x.step()).collect()
    }

    /// `(<x>, <p>)`.
    pub fn mean(&self) -> (f64, f64) {
        let m = self.mass();
        let (mut sx, mut sp) = (0.0, 0.0);
        for i in 0..self.x.n {
            for j in 0..self.p.n {
                let w = self.get(i, j);
                sx += w * self.x.at(i);
                sp += w * self.p.at(j);
            }
        }
        let cell = self.x.step() * self.p.step();
        (sx * cell / m, sp * cell / m)
    }

    /// Bilinear interpolation; zero outside the grid.
    pub fn sample(&self, x: f64, p: f64) -> f64 {
        match (self.x.locate(x), self.p.locate(p)) {
            (Some((i, a)), Some((j, b))) => {
                (1.0 - a) * (1.0 - b) * self.get(i, j)
                    + a * (1.0 - b) * self.get(i + 1, j)
                    + (1.0 - a) * b * self.get(i, j + 1)
                    + a * b * self.get(i + 1, j + 1)
            }
            _ => 0.0,
        }
    }

    /// `int |f - g| dx dp` for densities on the same axes.
    pub fn l1_distance(&self, other: &PhaseDensity) -> Result<f64> {
        if self.x != other.x || self.p != other.p {
            return Err(Error::domain("phase densities live on different grids"));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * self.x.step() * self.p.step())
    }
}

/// Axes covering a Gaussian blob `(x0, p0, sx, sp)` over `[0, t_final]`:
/// points on its 6-sigma ellipse are carried by the flow and the box around
/// every visited point is padded by 10%.
pub fn fit_axes(
    v: &PotentialSpec,
    (x0, p0): (f64, f64),
    (sx, sp): (f64, f64),
    t_final: f64,
    n: usize,
) -> Result<(Axis, Axis)> {
    let steps = 400usize;
    let dt = t_final.max(1e-12) / steps as f64;
    let (mut xl, mut xh, mut pl, mut ph) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..=16 {
        let (x, p) = if k == 16 {
            (x0, p0)
        } else {
            let a = k as f64 * std::f64::consts::TAU / 16.0;
            (x0 + 6.0 * sx * a.cos(), p0 + 6.0 * sp * a.sin())
        };
        let tr = newton_integrate(v, x, p, dt, steps)?;
        for (x, p) in tr.r.iter().zip(&tr.p) {
            xl = xl.min(*x);
            xh = xh.max(*x);
            pl = pl.min(*p);
            ph = ph.max(*p);
        }
    }
    let pad = |lo: f64, hi: f64| {
        let w = 0.1 * (hi - lo);
        (lo - w, hi + w)
    };
    let (xl, xh) = pad(xl, xh);
    let (pl, ph) = pad(pl, ph);
    Ok((Axis::new(xl, xh, n)?, Axis::new(pl, ph, n)?))
}

/// Semi-Lagrangian Liouville step from `rho0.t` to `rho0.t + t`: every node
/// is traced back along the Newton flow (Verlet steps of at most `dt`) and
/// takes the bilinearly interpolated initial value found there.
pub fn liouville_evolve(rho0: &PhaseDensity, v: &PotentialSpec, t: f64, dt: f64) -> Result<PhaseDensity> {
    if !(t >= 0.0) || !(dt > 0.0) {
        return Err(Error::domain("liouville_evolve needs t >= 0 and dt > 0"));
    }
    let steps = (t / dt).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let t1 = rho0.t + t;
    let nodes: Vec<(usize, usize)> = (0..rho0.x.n).flat_map(|i| (0..rho0.p.n).map(move |j| (i, j))).collect();
    let values = par::map_collect(&nodes, |&(i, j)| -> Result<f64> {
        let (mut x, mut p) = (rho0.x.at(i), rho0.p.at(j));
        for k in 0..steps {
            (x, p) = verlet_step(v, x, p, t1 - k as f64 * h, -h)?;
        }
        Ok(rho0.sample(x, p))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let out = PhaseDensity { x: rho0.x, p: rho0.p, t: t1, values };
    let drift = (out.mass() - rho0.mass()).abs();
    if drift > MASS_DRIFT_LIMIT {
        return Err(Error::MassDrift { drift });
    }
    Ok(out)
}

/// Smooth phase-space functions used in the weak form of the delta solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    X,
    P,
    X2,
    XP,
    P2,
}

impl TestFunction {
    pub const ALL: [TestFunction; 5] = [TestFunction::X, TestFunction::P, TestFunction::X2, TestFunction::XP, TestFunction::P2];

    pub fn value(self, x: f64, p: f64) -> f64 {
        match self {
            TestFunction::X => x,
            TestFunction::P => p,
            TestFunction::X2 => x * x,
            TestFunction::XP => x * p,
            TestFunction::P2 => p * p,
        }
    }

    /// `(d/dx, d/dp)`.
    pub fn gradient(self, x: f64, p: f64) -> (f64, f64) {
        match self {
            TestFunction::X => (1.0, 0.0),
            TestFunction::P => (0.0, 1.0),
            TestFunction::X2 => (2.0 * x, 0.0),
            TestFunction::XP => (p, x),
            TestFunction::P2 => (0.0, 2.0 * p),
        }
    }
}

/// Largest `|d/dt phi(r, p) - {(p/m) phi_x - V_x phi_p}|` over the test
/// functions and the interior samples of `traj`; the time derivative is a
/// five-point centred difference along the samples.
pub fn delta_ansatz_residual(traj: &Trajectory, v: &PotentialSpec, tests: &[TestFunction]) -> Result<f64> {
    let n = traj.len();
    if n < 5 {
        return Err(Error::domain("trajectory too short for the weak-form check"));
    }
    let h = traj.times[1] - traj.times[0];
    let m = traj.mass;
    let mut worst: f64 = 0.0;
    for &phi in tests {
        let f: Vec<f64> = (0..n).map(|k| phi.value(traj.r[k], traj.p[k])).collect();
        for k in 2..n - 2 {
            let rate = (f[k - 2] - 8.0 * f[k - 1] + 8.0 * f[k + 1] - f[k + 2]) / (12.0 * h);
            let (gx, gp) = phi.gradient(traj.r[k], traj.p[k]);
            let flow = traj.p[k] / m * gx + v.eval_force(traj.r[k], traj.times[k])? * gp;
            worst = worst.max((rate - flow).abs());
        }
    }
    Ok(worst)
}

/// Integrates the point particle from `(r0, p0)` to `t_final` with step `dt`
/// and returns [`delta_ansatz_residual`] over all test functions.
pub fn delta_ansatz_check(v: &PotentialSpec, r0: f64, p0: f64, t_final: f64, dt: f64) -> Result<f64> {
    let steps = (t_final / dt).round().max(4.0) as usize;
    let traj = newton_integrate(v, r0, p0, t_final / steps as f64, steps)?;
    delta_ansatz_residual(&traj, v, &TestFunction::ALL)
}

/// Expectation values at one snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectationSample {
    pub t: f64,
    pub x_mean: f64,
    pub p_mean: f64,
    /// `<-V_x>` over the density.
    pub mean_force: f64,
    /// `-V_x(<x>)`
    pub force_at_mean: f64,
}

fn mean_force(v: &PotentialSpec, grid: &crate::grid::Grid, rho: &[f64], t: f64) -> Result<f64> {
    let f = v.force_field(grid, t)?;
    let total: f64 = rho.iter().sum();
    Ok(rho.iter().zip(f.values()).map(|(r, f)| r * f).sum::<f64>() / total)
}

impl ExpectationSample {
    pub fn from_wavefunction(psi: &WaveFunction, v: &PotentialSpec) -> Result<Self> {
        let o = observables(psi);
        let t = psi.time();
        Ok(ExpectationSample {
            t,
            x_mean: o.x_mean,
            p_mean: o.p_mean,
            mean_force: mean_force(v, psi.grid(), psi.density().values(), t)?,
            force_at_mean: v.eval_force(o.x_mean, t)?,
        })
    }

    pub fn from_madelung(f: &MadelungFields, v: &PotentialSpec, t: f64) -> Result<Self> {
        let grid = f.grid();
        let dx = grid.dx();
        let p = f.momentum_field()?;
        let rho = f.rho().values();
        let x_mean = rho.iter().enumerate().map(|(i, r)| r * grid.x(i)).sum::<f64>() * dx;
        let p_mean = p.support.clone().map(|i| rho[i] * p.field.values()[i]).sum::<f64>() * dx;
        Ok(ExpectationSample {
            t,
            x_mean,
            p_mean,
            mean_force: mean_force(v, grid, rho, t)?,
            force_at_mean: v.eval_force(x_mean, t)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EhrenfestSeries {
    pub t: Vec<f64>,
    /// `d<x>/dt - <p>/m`
    pub position: Vec<f64>,
    /// `d<p>/dt - <-V_x>`
    pub momentum: Vec<f64>,
    /// `d<p>/dt + V_x(<x>)`
    pub force_at_mean_gap: Vec<f64>,
}

impl EhrenfestSeries {
    pub fn max_position(&self) -> f64 {
        self.position.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_momentum(&self) -> f64 {
        self.momentum.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_force_gap(&self) -> f64 {
        self.force_at_mean_gap.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Second-order derivative of equally spaced samples: centred inside,
/// one-sided at both ends.
pub fn series_derivative(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|k| match k {
            0 => (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h),
            k if k == n - 1 => (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h),
            k => (y[k + 1] - y[k - 1]) / (2.0 * h),
        })
        .collect()
}

pub fn ehrenfest_residuals(series: &[ExpectationSample], mass: f64) -> Result<EhrenfestSeries> {
    if series.len() < 3 {
        return Err(Error::domain("need at least three snapshots"));
    }
    if !(mass > 0.0) {
        return Err(Error::domain("mass must be positive"));
    }
    let h = series[1].t - series[0].t;
    if !(h > 0.0) || series.windows(2).any(|w| ((w[1].t - w[0].t) - h).abs() > 1e-9 * h.max(1.0)) {
        return Err(Error::domain("snapshots must be equally spaced in time"));
    }
    let x: Vec<f64> = series.iter().map(|s| s.x_mean).collect();
    let p: Vec<f64> = series.iter().map(|s| s.p_mean).collect();
    let dx = series_derivative(&x, h);
    let dp = series_derivative(&p, h);
    Ok(EhrenfestSeries {
        t: series.iter().map(|s| s.t).collect(),
        position: series.iter().zip(&dx).map(|(s, d)| d - s.p_mean / mass).collect(),
        momentum: series.iter().zip(&dp).map(|(s, d)| d - s.mean_force).collect(),
        force_at_mean_gap: series.iter().zip(&dp).map(|(s, d)| d - s.force_at_mean).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::schrodinger::{init_gaussian, max_stable_dt, propagate, steps_for};
    use std::f64::consts::PI;

    #[test]
    fn newton_examples() {
        let h = PotentialSpec::harmonic(1.0, 1.0).unwrap();
        let n = (2.0 * PI / 1e-3).round() as usize;
        let tr = newton_integrate(&h, 1.0, 0.0, 2.0 * PI / n as f64, n).unwrap();
        assert!((tr.r[n] - 1.0).abs() < 1e-6);

        let free = PotentialSpec::free(1.0).unwrap();
        let tr = newton_integrate(&free, 0.0, 2.0, 0.25, 12).unwrap();
        assert_eq!(tr.r[12], 6.0);

        let cf = PotentialSpec::constant_force(1.0, 2.0).unwrap();
        let tr = newton_integrate(&cf, 0.0, 0.0, 0.125, 8).unwrap();
        assert!((tr.r[8] - 1.0).abs() < 1e-15 && (tr.p[8] - 2.0).abs() < 1e-15);

        assert!(matches!(newton_integrate(&free, 0.0, 1.0, 0.0, 3), Err(Error::Domain(_))));
        let push = PotentialSpec::constant_force(1.0, 1e3).unwrap();
        assert!(matches!(newton_integrate_bounded(&push, 0.0, 0.0, 0.1, 100, 50.0), Err(Error::Escape { .. })));
    }

    #[test]
    fn verlet_step_is_area_preserving() {
        let v = PotentialSpec::harmonic(1.3, 0.7).unwrap();
        let dt = 0.05;
        let step = |x, p| verlet_step(&v, x, p, 0.0, dt).unwrap();
        let (a, b) = step(1.0, 0.0);
        let (c, d) = step(0.0, 1.0);
        let det = a * d - b * c;
        assert!((det - 1.0).abs() < 1e-12, "{det}");
    }

    #[test]
    fn harmonic_energy_has_no_secular_drift() {
        let v = PotentialSpec::harmonic(1.0, 1.0).unwrap();
        let tr = newton_integrate(&v, 1.0, 0.3, 1e-2, 1_000_000).unwrap();
        let half = tr.len() / 2;
        let drift = |e: &[f64]| e.iter().fold(0.0f64, |m, v| m.max((v - tr.energy[0]).abs()));
        let early = drift(&tr.energy[..half]);
        let late = drift(&tr.energy[half..]);
        assert!(late <= 1.01 * early && early < 1e-4, "{early} {late}");
    }

    fn axes(lim: f64, n: usize) -> (Axis, Axis) {
        (Axis::new(-lim, lim, n).unwrap(), Axis::new(-lim, lim, n).unwrap())
    }

    #[test]
    fn harmonic_flow_rotates_phase_space() {
        let v = PotentialSpec::harmonic(1.0, 1.0).unwrap();
        let (ax, ap) = axes(4.0, 256);
        let rho = PhaseDensity::gaussian(ax, ap, 1.0, 0.0, 0.3, 0.3).unwrap();
        let out = liouville_evolve(&rho, &v, PI / 2.0, 1e-2).unwrap();
        let (x, p) = out.mean();
        assert!(x.abs() < ax.step() && (p + 1.0).abs() < ap.step(), "({x}, {p})");
    }

    #[test]
    fn free_flow_shears_and_keeps_momentum_marginal() {
        let v = PotentialSpec::free(1.0).unwrap();
        let ax = Axis::new(-6.0, 6.0, 256).unwrap();
        let ap = Axis::new(-3.0, 3.0, 128).unwrap();
        let rho = PhaseDensity::gaussian(ax, ap, -1.0, 0.0, 0.5, 0.6).unwrap();
        let out = liouville_evolve(&rho, &v, 1.0, 0.1).unwrap();
        for (a, b) in rho.marginal_p().iter().zip(out.marginal_p()) {
            assert!((a - b).abs() <= 1e-10);
        }
        // sheared nodes land on the same p row
        let j = 90;
        let p = ap.at(j);
        for i in (40..200).step_by(11) {
            let x = ax.at(i);
            assert!((out.get(i, j) - rho.sample(x - p, p)).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_period_returns_the_density() {
        let v = PotentialSpec::harmonic(1.0, 1.0).unwrap();
        let (ax, ap) = axes(4.0, 256);
        let rho = PhaseDensity::gaussian(ax, ap, 1.0, 0.5, 0.4, 0.4).unwrap();
        let out = liouville_evolve(&rho, &v, 2.0 * PI, 1e-2).unwrap();
        assert!(out.l1_distance(&rho).unwrap() <= 0.02);
    }

    #[test]
    fn evolution_composes() {
        let v = PotentialSpec::polynomial(1.0, vec![0.0, 0.0, 0.5, 0.0, 0.1]).unwrap();
        let (ax, ap) = axes(4.0, 256);
        let rho = PhaseDensity::gaussian(ax, ap, 0.8, 0.0, 0.4, 0.4).unwrap();
        let once = liouville_evolve(&rho, &v, 1.0, 1e-2).unwrap();
        let twice = liouville_evolve(&liouville_evolve(&rho, &v, 0.4, 1e-2).unwrap(), &v, 0.6, 1e-2).unwrap();
        assert!((once.t - twice.t).abs() < 1e-12);
        assert!(once.l1_distance(&twice).unwrap() <= 1e-3, "{}", once.l1_distance(&twice).unwrap());
    }

    #[test]
    fn coarse_grid_reports_mass_drift() {
        let v = PotentialSpec::free(1.0).unwrap();
        let (ax, ap) = axes(2.0, 32);
        let rho = PhaseDensity::gaussian(ax, ap, 1.0, 1.0, 0.4, 0.4).unwrap();
        assert!(matches!(liouville_evolve(&rho, &v, 1.0, 0.1), Err(Error::MassDrift { .. })));
    }

    #[test]
    fn fitted_axes_contain_the_flow() {
        let v = PotentialSpec::harmonic(1.0, 1.0).unwrap();
        let (ax, ap) = fit_axes(&v, (1.0, 0.0), (0.2, 0.2), PI, 256).unwrap();
        // half a turn: x sweeps both sides, p only goes negative beyond the blob
        assert!(ax.min < -2.2 && ax.max > 2.2 && ap.min < -2.2 && ap.max > 1.2);
        assert_eq!(ax.n, 256);
    }

    #[test]
    fn delta_solution_in_weak_form() {
        let h = PotentialSpec::harmonic(1.0, 1.0).unwrap();
        assert!(delta_ansatz_check(&h, 1.0, 0.5, 5.0, 1e-3).unwrap() <= 1e-6);
        let free = PotentialSpec::free(1.0).unwrap();
        let tr = newton_integrate(&free, 0.2, 0.7, 1e-2, 100).unwrap();
        assert!(delta_ansatz_residual(&tr, &free, &[TestFunction::P]).unwrap() <= 1e-12);

        let mut bad = newton_integrate(&h, 1.0, 0.5, 1e-3, 5000).unwrap();
        bad.p.iter_mut().for_each(|p| *p *= 1.01);
        let r = delta_ansatz_residual(&bad, &h, &[TestFunction::X2, TestFunction::XP, TestFunction::P2]).unwrap();
        assert!(r > 1e-3, "{r}");
    }

    fn quantum_series(v: &PotentialSpec, g: Grid, eps: f64, r0: f64, p0: f64, t_end: f64, every: f64) -> Vec<ExpectationSample> {
        let mut psi = init_gaussian(&g, eps, r0, p0, 1.0, v.mass()).unwrap();
        let dt_max = max_stable_dt(&g, v, 1.0, 0.0).unwrap();
        let (n, dt) = steps_for(every, dt_max);
        let mut out = vec![ExpectationSample::from_wavefunction(&psi, v).unwrap()];
        for _ in 0..(t_end / every).round() as usize {
            propagate(&mut psi, v, dt, n).unwrap();
            out.push(ExpectationSample::from_wavefunction(&psi, v).unwrap());
        }
        out
    }

    #[test]
    fn coherent_state_obeys_ehrenfest() {
        let v = PotentialSpec::harmonic(1.0, 1.0).unwrap();
        let s = quantum_series(&v, Grid::new(-10.0, 10.0, 256).unwrap(), 1.0, 0.0, 1.0, 2.0 * PI, 0.005);
        let e = ehrenfest_residuals(&s, 1.0).unwrap();
        assert!(e.max_position() <= 1e-5 && e.max_momentum() <= 1e-5, "{} {}", e.max_position(), e.max_momentum());
    }

    #[test]
    fn quartic_ehrenfest_holds_but_force_at_mean_fails() {
        let v = PotentialSpec::polynomial(1.0, vec![0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let s = quantum_series(&v, Grid::new(-6.0, 6.0, 128).unwrap(), 0.5, 1.0, 0.0, 2.0, 0.001);
        let e = ehrenfest_residuals(&s, 1.0).unwrap();
        assert!(e.max_position() <= 1e-4 && e.max_momentum() <= 1e-4, "{} {}", e.max_position(), e.max_momentum());
        let late = e.force_at_mean_gap[e.t.len() / 2..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(late > 1e-2, "{late}");
    }

    #[test]
    fn madelung_expectations_agree_with_wavefunction() {
        let v = PotentialSpec::harmonic(1.0, 1.0).unwrap();
        let g = Grid::new(-10.0, 10.0, 512).unwrap();
        let psi = init_gaussian(&g, 0.7, 0.4, 1.1, 1.0, 1.0).unwrap();
        let a = ExpectationSample::from_wavefunction(&psi, &v).unwrap();
        let f = crate::madelung::to_madelung(&psi, crate::madelung::DEFAULT_FLOOR).unwrap();
        let b = ExpectationSample::from_madelung(&f, &v, 0.0).unwrap();
        assert!((a.x_mean - b.x_mean).abs() < 1e-10 && (a.p_mean - b.p_mean).abs() < 1e-8);
        assert!((a.mean_force - b.mean_force).abs() < 1e-12);
    }

    #[test]
    fn derivative_endpoints_are_second_order() {
        let y: Vec<f64> = (0..6).map(|k| (k as f64 * 0.5).powi(2)).collect();
        let d = series_derivative(&y, 0.5);
        for (k, v) in d.iter().enumerate() {
            assert!((v - k as f64).abs() < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(8))]

            #[test]
            fn position_relation_holds_for_any_polynomial(
                c1 in -0.5..0.5f64,
                c2 in 0.1..1.0f64,
                c3 in -0.1..0.1f64,
                c4 in 0.0..0.2f64,
            ) {
                let v = PotentialSpec::polynomial(1.0, vec![0.0, c1, c2, c3, c4]).unwrap();
                let s = quantum_series(&v, Grid::new(-8.0, 8.0, 128).unwrap(), 0.6, 0.3, 0.2, 1.0, 0.004);
                let e = ehrenfest_residuals(&s, 1.0).unwrap();
                prop_assert!(e.max_position() <= 1e-4, "{}", e.max_position());
            }
        }
    }
}
