//! Browser bindings for the demo page in `www/`.
//!
//! The wasm-facing methods are thin wrappers; the work happens in plain
//! functions returning the core `Result`, so it can be tested natively.

use semiclassical::classical::verlet_step;
use semiclassical::detpot::{self, DEFAULT_TOL};
use semiclassical::phj::{solve_hj_partial, HjOptions};
use semiclassical::schrodinger::{init_gaussian, max_stable_dt, observables, propagate, steps_for, WaveFunction};
use semiclassical::{Error, Grid, PotentialSpec, RealField, Result};
use wasm_bindgen::prelude::*;

const MASS: f64 = 1.0;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `free`, `force` (slope `param`), `harmonic` (frequency `param`) or
/// `quartic` (`param x^4`).
pub fn potential_from(kind: &str, param: f64) -> Result<PotentialSpec> {
    match kind {
        "free" => PotentialSpec::free(MASS),
        "force" => PotentialSpec::constant_force(MASS, param),
        "harmonic" => PotentialSpec::harmonic(MASS, param),
        "quartic" => PotentialSpec::polynomial(MASS, vec![0.0, 0.0, 0.0, 0.0, param]),
        other => Err(Error::Config(format!("unknown potential {other:?}"))),
    }
}

/// A Gaussian packet under split-step evolution, with the Newton
/// trajectory of its initial centre alongside.
#[wasm_bindgen]
pub struct Packet {
    psi: WaveFunction,
    v: PotentialSpec,
    dt_max: f64,
    newton: (f64, f64),
}

impl Packet {
    pub fn create(kind: &str, param: f64, hbar: f64, epsilon: f64, r0: f64, p0: f64) -> Result<Packet> {
        let grid = Grid::new(-10.0, 10.0, 1024)?;
        let v = potential_from(kind, param)?;
        let psi = init_gaussian(&grid, epsilon, r0, p0, hbar, MASS)?;
        let dt_max = max_stable_dt(&grid, &v, hbar, 0.0)?;
        Ok(Packet { psi, v, dt_max, newton: (r0, p0) })
    }

    pub fn advance(&mut self, duration: f64) -> Result<()> {
        let (n, dt) = steps_for(duration, self.dt_max);
        let t0 = self.psi.time();
        propagate(&mut self.psi, &self.v, dt, n)?;
        for i in 0..n {
            let (x, p) = self.newton;
            self.newton = verlet_step(&self.v, x, p, t0 + i as f64 * dt, dt)?;
        }
        Ok(())
    }
}

#[wasm_bindgen]
impl Packet {
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, param: f64, hbar: f64, epsilon: f64, r0: f64, p0: f64) -> std::result::Result<Packet, JsError> {
        Packet::create(kind, param, hbar, epsilon, r0, p0).map_err(js)
    }

    pub fn step(&mut self, duration: f64) -> std::result::Result<(), JsError> {
        self.advance(duration).map_err(js)
    }

    pub fn x(&self) -> Vec<f64> {
        self.psi.grid().points()
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.density().into_values()
    }

    pub fn potential(&self) -> Vec<f64> {
        self.v
            .potential_field(self.psi.grid(), self.psi.time())
            .map(RealField::into_values)
            .unwrap_or_default()
    }

    pub fn time(&self) -> f64 {
        self.psi.time()
    }

    pub fn x_mean(&self) -> f64 {
        observables(&self.psi).x_mean
    }

    pub fn width(&self) -> f64 {
        observables(&self.psi).width
    }

    /// `Δx Δp / ħ`; one half for a minimum-uncertainty packet.
    pub fn uncertainty(&self) -> f64 {
        observables(&self.psi).uncertainty_product / self.psi.hbar()
    }

    pub fn newton_x(&self) -> f64 {
        self.newton.0
    }
}

/// Smearing test for `V = sum c_i x^i`, coefficients separated by spaces or
/// commas. Returns the verdict and the worst relative residual.
pub fn classify_text(coeffs: &str) -> Result<(String, f64)> {
    let c = coeffs
        .split(|ch: char| ch == ',' || ch.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::Config(format!("{s:?} is not a number"))))
        .collect::<Result<Vec<_>>>()?;
    if c.is_empty() {
        return Err(Error::Config("no coefficients".into()));
    }
    let grid = Grid::new(-10.0, 10.0, 2048)?;
    let v = PotentialSpec::polynomial(MASS, c)?;
    let report = detpot::classify(&v, &detpot::default_epsilons(&grid), DEFAULT_TOL, &grid)?;
    Ok((report.verdict.as_str().to_string(), report.max_relative()))
}

#[wasm_bindgen]
pub fn classify(coeffs: &str) -> std::result::Result<String, JsError> {
    let (verdict, worst) = classify_text(coeffs).map_err(js)?;
    Ok(format!("{verdict} (max relative residual {worst:.2e})"))
}

/// Characteristics of `S0 = p0 x + curvature x^2 / 2` launched from [-2, 2].
#[wasm_bindgen]
pub struct Fan {
    count: usize,
    times: Vec<f64>,
    positions: Vec<f64>,
    caustic: Option<f64>,
}

const FAN_RAYS: usize = 25;

impl Fan {
    pub fn create(kind: &str, param: f64, p0: f64, curvature: f64, t_final: f64) -> Result<Fan> {
        let grid = Grid::new(-4.0, 4.0, 256)?;
        let v = potential_from(kind, param)?;
        let s0 = RealField::from_fn(grid, |x| p0 * x + 0.5 * curvature * x * x)?;
        let opts = HjOptions { dt: 1e-3, snapshots: 80, launch: Some((-2.0, 2.0)) };
        let sol = solve_hj_partial(&s0, &v, t_final, FAN_RAYS, &opts)?;
        let times = sol.fan.snapshots.iter().map(|s| s.t).collect();
        let positions = sol.fan.snapshots.iter().flat_map(|s| s.x.iter().copied()).collect();
        Ok(Fan { count: sol.fan.x0.len(), times, positions, caustic: sol.fan.caustic })
    }
}

#[wasm_bindgen]
impl Fan {
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, param: f64, p0: f64, curvature: f64, t_final: f64) -> std::result::Result<Fan, JsError> {
        Fan::create(kind, param, p0, curvature, t_final).map_err(js)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    /// Row-major positions, one row of `count` per time.
    pub fn positions(&self) -> Vec<f64> {
        self.positions.clone()
    }

    /// Crossing time, NaN if the fan stayed single valued.
    pub fn caustic(&self) -> f64 {
        self.caustic.unwrap_or(f64::NAN)
    }
}
