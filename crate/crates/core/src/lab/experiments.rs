use crate::classical::{
    delta_ansatz_check, fit_axes, liouville_evolve, newton_integrate, verlet_step, ExpectationSample, PhaseDensity,
};
use crate::detpot::{classify, default_epsilons, fit_slope};
use crate::error::{Error, Result};
use crate::grid::{Grid, RealField};
use crate::madelung::{
    action_rate_centered, action_rate_forward, density_support, hj_residual, to_madelung, HjMode, MadelungFields,
    DEFAULT_FLOOR,
};
use crate::par;
use crate::phj::{expectations, projected_newton_check, solve_hj, transport_density, HjOptions};
use crate::potential::PotentialSpec;
use crate::schrodinger::{init_gaussian, max_stable_dt, observables, propagate, steps_for, Observables, WaveFunction};

use super::config::{Experiment, RunConfig};
use super::record::{num, FieldDump, RunRecord, ScanRecord, DETPOT_COLUMNS, LIOUVILLE_COLUMNS, PHJ_COLUMNS, QUANTUM_COLUMNS};

/// Times the grid may be doubled after a boundary leak.
pub const MAX_DOUBLINGS: usize = 2;
/// Below this, trajectory deviations count as round-off when checking that
/// they shrink along a scan.
pub const DEVIATION_FLOOR: f64 = 1e-9;
/// Half-width of the window, around the packet centre, on which the
/// coupling-term bracket is maximized.
pub const BRACKET_WINDOW: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumSettings {
    pub potential: PotentialSpec,
    pub grid: Grid,
    pub epsilon: f64,
    pub r0: f64,
    pub p0: f64,
    pub hbar: f64,
    pub t_final: f64,
    pub snapshots: usize,
    pub dt: Option<f64>,
    pub dump_fields: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumRow {
    pub t: f64,
    pub obs: Observables,
    /// NaN (like both residuals) where the density has a node.
    pub quantum_term_norm: f64,
    pub hj_residual_quantum: f64,
    pub hj_residual_classical: f64,
    pub r_newton: f64,
    pub newton_deviation: f64,
}

impl QuantumRow {
    pub fn values(&self) -> Vec<f64> {
        let o = &self.obs;
        vec![
            self.t,
            o.x_mean,
            o.p_mean,
            o.var_x,
            o.var_p,
            o.uncertainty_product,
            o.width,
            o.kurtosis_excess,
            self.quantum_term_norm,
            self.hj_residual_quantum,
            self.hj_residual_classical,
            self.newton_deviation,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct QuantumSeries {
    /// Grid actually used, after any doublings.
    pub grid: Grid,
    pub doublings: usize,
    pub rows: Vec<QuantumRow>,
    pub expectations: Vec<ExpectationSample>,
    pub fields: Vec<FieldDump>,
    pub final_state: WaveFunction,
}

impl QuantumSeries {
    pub fn max_of(&self, f: impl Fn(&QuantumRow) -> f64) -> f64 {
        self.rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_of(&self, f: impl Fn(&QuantumRow) -> f64) -> f64 {
        self.rows.iter().map(f).fold(f64::INFINITY, f64::min)
    }

    fn record(&self, label: String) -> RunRecord {
        let mut r = RunRecord::new(label, QUANTUM_COLUMNS);
        r.rows = self.rows.iter().map(QuantumRow::values).collect();
        r.fields = self.fields.clone();
        r.push_result("grid", format!("{} {} {}", num(self.grid.x_min()), num(self.grid.x_max()), self.grid.n()));
        r.push_result("grid_doublings", self.doublings.to_string());
        r.push_result("min_uncertainty_product", num(self.min_of(|r| r.obs.uncertainty_product)));
        r.push_result("max_newton_deviation", num(self.max_of(|r| r.newton_deviation)));
        r
    }
}

/// Propagates a Gaussian packet and records observables and Madelung
/// diagnostics at `snapshots + 1` equally spaced times. A boundary leak
/// doubles the domain (same spacing) up to [`MAX_DOUBLINGS`] times.
pub fn quantum_series(s: &QuantumSettings) -> Result<QuantumSeries> {
    let mut grid = s.grid;
    let mut attempt = 0;
    loop {
        match series_on(s, grid) {
            Err(Error::BoundaryLeak { .. }) if attempt < MAX_DOUBLINGS => {
                grid = grid.widened(2)?;
                attempt += 1;
            }
            other => {
                return other.map(|mut r| {
                    r.doublings = attempt;
                    r
                })
            }
        }
    }
}

/// `Ok(None)` for a density node, other errors passed on.
fn unless_node<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Node(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn stepped(psi: &WaveFunction, v: &PotentialSpec, h: f64) -> Result<WaveFunction> {
    let mut out = psi.clone();
    propagate(&mut out, v, h, 1)?;
    Ok(out)
}

/// Madelung fields of `mid` and both residual norms, with `dS/dt` centred on
/// `prev` and one step past `mid`, or one-sided when `prev` is absent.
fn madelung_diagnostics(
    prev: Option<&WaveFunction>,
    mid: &WaveFunction,
    v: &PotentialSpec,
    h: f64,
    t: f64,
) -> Result<Option<(MadelungFields, [f64; 3])>> {
    let Some(fm) = unless_node(to_madelung(mid, DEFAULT_FLOOR))? else { return Ok(None) };
    let next = stepped(mid, v, h)?;
    let Some(fn1) = unless_node(to_madelung(&next, DEFAULT_FLOOR))? else { return Ok(None) };
    let rate = match prev {
        Some(p) => {
            let Some(fp) = unless_node(to_madelung(p, DEFAULT_FLOOR))? else { return Ok(None) };
            action_rate_centered(&fp, &fm, &fn1, h)?
        }
        None => {
            let Some(fn2) = unless_node(to_madelung(&stepped(&next, v, h)?, DEFAULT_FLOOR))? else { return Ok(None) };
            action_rate_forward(&fm, &fn1, &fn2, h)?
        }
    };
    let q = hj_residual(&fm, &rate, v, t, HjMode::Quantum)?;
    let c = hj_residual(&fm, &rate, v, t, HjMode::Classical)?;
    Ok(Some((fm, [q.quantum_term_norm, q.residual, c.residual])))
}

fn step_plan(s: &QuantumSettings, grid: &Grid, t: f64, interval: f64) -> Result<(usize, f64)> {
    let limit = max_stable_dt(grid, &s.potential, s.hbar, t)?;
    match s.dt {
        Some(dt) if dt > limit => Err(Error::domain(format!(
            "numerics.dt = {dt} exceeds the stable step {limit:.3e} at hbar = {}",
            s.hbar
        ))),
        Some(dt) => Ok(steps_for(interval, dt)),
        None => Ok(steps_for(interval, limit)),
    }
}

fn series_on(s: &QuantumSettings, grid: Grid) -> Result<QuantumSeries> {
    if s.snapshots == 0 || !(s.t_final > 0.0) {
        return Err(Error::domain("a quantum run needs t_final > 0 and at least one snapshot"));
    }
    let v = &s.potential;
    let mut psi = init_gaussian(&grid, s.epsilon, s.r0, s.p0, s.hbar, v.mass())?;
    psi.check_boundary()?;
    let interval = s.t_final / s.snapshots as f64;
    let (mut xn, mut pn, mut tn) = (s.r0, s.p0, 0.0);
    let mut prev: Option<WaveFunction> = None;
    let mut h = step_plan(s, &grid, 0.0, interval)?.1;
    let mut out = QuantumSeries {
        grid,
        doublings: 0,
        rows: Vec::with_capacity(s.snapshots + 1),
        expectations: Vec::with_capacity(s.snapshots + 1),
        fields: Vec::new(),
        final_state: psi.clone(),
    };
    for k in 0..=s.snapshots {
        let t = k as f64 * interval;
        let diag = madelung_diagnostics(prev.as_ref(), &psi, v, h, t)?;
        let obs = observables(&psi);
        let [qn, hq, hc] = diag.as_ref().map_or([f64::NAN; 3], |d| d.1);
        out.rows.push(QuantumRow {
            t,
            obs,
            quantum_term_norm: qn,
            hj_residual_quantum: hq,
            hj_residual_classical: hc,
            r_newton: xn,
            newton_deviation: (obs.x_mean - xn).abs(),
        });
        out.expectations.push(ExpectationSample::from_wavefunction(&psi, v)?);
        if s.dump_fields {
            out.fields.push(FieldDump {
                t,
                x: grid.points(),
                rho: psi.density().into_values(),
                s: diag.map_or(vec![f64::NAN; grid.n()], |d| d.0.action().values().to_vec()),
            });
        }
        if k == s.snapshots {
            break;
        }
        let (n, dt) = step_plan(s, &grid, t, interval)?;
        h = dt;
        if n > 1 {
            propagate(&mut psi, v, dt, n - 1)?;
        }
        prev = Some(psi.clone());
        propagate(&mut psi, v, dt, 1)?;
        for _ in 0..n {
            (xn, pn) = verlet_step(v, xn, pn, tn, dt)?;
            tn += dt;
        }
    }
    out.final_state = psi;
    Ok(out)
}

fn settings(cfg: &RunConfig, hbar: f64, epsilon: f64, dump_fields: bool) -> QuantumSettings {
    QuantumSettings {
        potential: cfg.potential.clone(),
        grid: cfg.grid,
        epsilon,
        r0: cfg.r0,
        p0: cfg.p0,
        hbar,
        t_final: cfg.t_final,
        snapshots: cfg.snapshots,
        dt: cfg.dt,
        dump_fields,
    }
}

fn list(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(num).collect::<Vec<_>>().join(" ")
}

fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    fit_slope(&lx, &ly)
}

fn scan(cfg: &RunConfig, runs: Vec<RunRecord>, results: Vec<(String, String)>) -> ScanRecord {
    ScanRecord { experiment: cfg.experiment.name().into(), echo: cfg.echo(), runs, results, wall_clock: 0.0 }
}

fn collect<T>(items: Vec<Result<T>>) -> Result<Vec<T>> {
    items.into_iter().collect()
}

/// Fixed packet width, `hbar -> 0`: the quantum term at `t = 0` scales as
/// `hbar^2`, and the classical HJ residual tracks it.
pub fn run_standard_limit(cfg: &RunConfig, dump_fields: bool) -> Result<ScanRecord> {
    let eps = cfg.epsilon.ok_or_else(|| Error::Config("standard_limit needs packet.epsilon".into()))?;
    if cfg.hbar_list.len() < 3 {
        return Err(Error::domain("the hbar^2 fit needs at least three hbar values"));
    }
    let series = collect(par::map_collect(&cfg.hbar_list, |&h| quantum_series(&settings(cfg, h, eps, dump_fields))))?;
    let mut runs = Vec::new();
    let mut q0 = Vec::new();
    let mut worst_gap: f64 = 0.0;
    for (h, s) in cfg.hbar_list.iter().zip(&series) {
        let mut r = s.record(format!("hbar={}", num(*h)));
        let gap = s.max_of(|row| ((row.hj_residual_classical - row.quantum_term_norm) / row.quantum_term_norm).abs());
        r.push_result("quantum_term_norm_t0", num(s.rows[0].quantum_term_norm));
        r.push_result("max_quantum_term_norm", num(s.max_of(|row| row.quantum_term_norm)));
        r.push_result("max_classical_gap", num(gap));
        worst_gap = worst_gap.max(gap);
        q0.push(s.rows[0].quantum_term_norm);
        runs.push(r);
    }
    let results = vec![
        ("quantum_term_exponent".into(), num(loglog_slope(&cfg.hbar_list, &q0))),
        ("quantum_term_ratios".into(), list(q0.iter().map(|q| q / q0[0]))),
        ("max_classical_gap".into(), num(worst_gap)),
    ];
    Ok(scan(cfg, runs, results))
}

/// Maximum of `|(hbar/eps)^2 (eps - (x-r)^2) / 2m|` over grid nodes with
/// `|x - r| <= BRACKET_WINDOW`.
pub fn coupling_bracket_max(grid: &Grid, hbar: f64, epsilon: f64, mass: f64, r: f64) -> f64 {
    grid.points()
        .into_iter()
        .filter(|x| (x - r).abs() <= BRACKET_WINDOW)
        .map(|x| ((hbar / epsilon).powi(2) * (epsilon - (x - r).powi(2)) / (2.0 * mass)).abs())
        .fold(0.0, f64::max)
}

/// Fixed `hbar`, `eps -> 0`: the width at `t_star` and the coupling term
/// blow up.
pub fn run_deterministic_limit(cfg: &RunConfig, dump_fields: bool) -> Result<ScanRecord> {
    let hbar = cfg.hbar_list[0];
    let t_star = cfg.t_star.ok_or_else(|| Error::Config("deterministic_limit needs scan.t_star".into()))?;
    let series = collect(par::map_collect(&cfg.epsilon_list, |&e| {
        let mut s = settings(cfg, hbar, e, dump_fields);
        s.t_final = t_star;
        quantum_series(&s)
    }))?;
    let mut runs = Vec::new();
    let (mut widths, mut brackets) = (Vec::new(), Vec::new());
    for (e, s) in cfg.epsilon_list.iter().zip(&series) {
        let last = s.rows.last().expect("at least one snapshot");
        let bracket = coupling_bracket_max(&s.grid, hbar, *e, cfg.potential.mass(), last.obs.x_mean);
        let mut r = s.record(format!("epsilon={}", num(*e)));
        r.push_result("width_at_t_star", num(last.obs.width));
        r.push_result("width_over_epsilon", num(last.obs.width / e));
        r.push_result("bracket_max", num(bracket));
        widths.push(last.obs.width);
        brackets.push(bracket);
        runs.push(r);
    }
    let ratio: Vec<f64> = widths.iter().zip(&cfg.epsilon_list).map(|(a, e)| a / e).collect();
    let results = vec![
        ("slope_width_over_epsilon".into(), num(loglog_slope(&cfg.epsilon_list, &ratio))),
        ("slope_width".into(), num(loglog_slope(&cfg.epsilon_list, &widths))),
        ("slope_bracket".into(), num(loglog_slope(&cfg.epsilon_list, &brackets))),
    ];
    Ok(scan(cfg, runs, results))
}

fn detpot_verdict(v: &PotentialSpec, grid: &Grid, tol: f64) -> String {
    if !v.is_static() {
        return "n/a".into();
    }
    match classify(v, &default_epsilons(grid), tol, grid) {
        Ok(r) => r.verdict.as_str().into(),
        Err(Error::Inconclusive(_)) => "Inconclusive".into(),
        Err(e) => format!("error: {e}"),
    }
}

/// `eps = k hbar`, `hbar -> 0`. For deterministic potentials the centre
/// follows Newton and the width shrinks; otherwise the packet deforms.
pub fn run_combined_limit(cfg: &RunConfig, dump_fields: bool) -> Result<ScanRecord> {
    let k = cfg.k.ok_or_else(|| Error::Config("combined_limit needs packet.k".into()))?;
    let series = collect(par::map_collect(&cfg.hbar_list, |&h| quantum_series(&settings(cfg, h, k * h, dump_fields))))?;
    let mut runs = Vec::new();
    let mut deviations = Vec::new();
    let mut kurtosis = Vec::new();
    for (h, s) in cfg.hbar_list.iter().zip(&series) {
        let dev = s.max_of(|r| r.newton_deviation);
        let kurt = s.max_of(|r| r.obs.kurtosis_excess.abs());
        let last = s.rows.last().expect("at least one snapshot");
        let mut r = s.record(format!("hbar={}", num(*h)));
        r.push_result("epsilon", num(k * h));
        r.push_result("terminal_width", num(last.obs.width));
        r.push_result("max_kurtosis_excess", num(kurt));
        deviations.push(dev);
        kurtosis.push(kurt);
        runs.push(r);
    }
    let decreasing = deviations.windows(2).all(|w| w[1] <= w[0] || w[1] <= DEVIATION_FLOOR);
    let results = vec![
        ("detpot_verdict".into(), detpot_verdict(&cfg.potential, &cfg.grid, cfg.tol)),
        ("max_newton_deviations".into(), list(deviations)),
        ("deviation_decreasing".into(), decreasing.to_string()),
        ("max_kurtosis_excess".into(), list(kurtosis)),
    ];
    Ok(scan(cfg, runs, results))
}

/// `dx dp` over time against `hbar/2`, for every `hbar` of the scan.
pub fn run_uncertainty(cfg: &RunConfig, dump_fields: bool) -> Result<ScanRecord> {
    let eps: Vec<f64> = cfg.hbar_list.iter().map(|&h| cfg.epsilon_for(h)).collect::<Result<_>>()?;
    let pairs: Vec<(f64, f64)> = cfg.hbar_list.iter().copied().zip(eps).collect();
    let series = collect(par::map_collect(&pairs, |&(h, e)| quantum_series(&settings(cfg, h, e, dump_fields))))?;
    let mut runs = Vec::new();
    let mut minima = Vec::new();
    let mut all_ok = true;
    for ((h, e), s) in pairs.iter().zip(&series) {
        let min = s.min_of(|r| r.obs.uncertainty_product);
        let ok = min >= 0.5 * h * (1.0 - 1e-6);
        let products: Vec<f64> = s.rows.iter().map(|r| r.obs.uncertainty_product).collect();
        let mut r = s.record(format!("hbar={}", num(*h)));
        r.push_result("epsilon", num(*e));
        r.push_result("hbar_half", num(0.5 * h));
        r.push_result("floor_respected", ok.to_string());
        r.push_result("product_nondecreasing", products.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)).to_string());
        all_ok &= ok;
        minima.push(min);
        runs.push(r);
    }
    let mut results = vec![("floor_respected".into(), all_ok.to_string())];
    if cfg.hbar_list.len() >= 2 {
        results.push(("min_product_hbar_exponent".into(), num(loglog_slope(&cfg.hbar_list, &minima))));
    }
    Ok(scan(cfg, runs, results))
}

pub fn run_detpot(cfg: &RunConfig) -> Result<ScanRecord> {
    let eps = if cfg.epsilon_list.is_empty() { default_epsilons(&cfg.grid) } else { cfg.epsilon_list.clone() };
    let report = classify(&cfg.potential, &eps, cfg.tol, &cfg.grid)?;
    let mut r = RunRecord::new("detpot", DETPOT_COLUMNS);
    for (res, f) in report.residuals.iter().zip(&report.fourier_norms) {
        r.rows.push(vec![res.epsilon, res.absolute, res.relative, *f]);
    }
    r.push_result("verdict", report.verdict.as_str());
    r.push_result("tol", num(report.tol));
    r.push_result("max_relative_residual", num(report.max_relative()));
    r.push_result("scaling_exponent", report.scaling_exponent.map_or("n/a".into(), num));
    r.push_result("second_derivative_norm", num(report.second_derivative_norm));
    if let Some(note) = &report.note {
        r.push_result("note", note.clone());
    }
    let results = vec![("verdict".into(), report.verdict.as_str().into())];
    Ok(scan(cfg, vec![r], results))
}

/// Classical HJ by characteristics for a Gaussian density with action
/// `p0 (x - r0) + c (x - r0)^2 / 2`; fails with [`Error::Caustic`] if the
/// fan folds before `t_final`.
pub fn run_phj_demo(cfg: &RunConfig) -> Result<ScanRecord> {
    if cfg.snapshots < 4 {
        return Err(Error::Config("phj_demo needs numerics.snapshots >= 4".into()));
    }
    let g = cfg.grid;
    let v = &cfg.potential;
    let eps = cfg.epsilon_for(1.0)?;
    let (r0, p0, c) = (cfg.r0, cfg.p0, cfg.phj.curvature);
    let norm = (std::f64::consts::PI * eps).sqrt();
    let rho0 = RealField::from_fn(g, |x| (-(x - r0).powi(2) / eps).exp() / norm)?;
    let s0 = RealField::from_fn(g, |x| p0 * (x - r0) + 0.5 * c * (x - r0).powi(2))?;
    let support = density_support(&rho0, DEFAULT_FLOOR)?;
    let launch = (g.x(support.start), g.x(support.end - 1).min(g.x_max() - 2.0 * g.dx()));
    let opts = HjOptions { dt: cfg.phj.dt, snapshots: cfg.snapshots, launch: Some(launch) };
    let sol = solve_hj(&s0, v, cfg.t_final, cfg.phj.characteristics, &opts)?;

    let interval = cfg.t_final / cfg.snapshots as f64;
    let (steps, h) = steps_for(interval, cfg.phj.dt);
    let traj = newton_integrate(v, r0, p0, h, steps * cfg.snapshots)?;
    let r_newton: Vec<f64> = (0..=cfg.snapshots).map(|k| traj.r[k * steps]).collect();

    let hj = sol.hj_residuals(v)?;
    let newton = projected_newton_check(&sol, &r_newton, v)?;
    let mut rec = RunRecord::new("phj", PHJ_COLUMNS);
    let mut worst_centre: f64 = 0.0;
    for (k, t) in sol.times().into_iter().enumerate() {
        let rho = transport_density(&rho0, &sol.fan, t)?;
        let e = expectations(&rho, &sol.fields[k], v.mass())?;
        let interior = k >= 2 && k + 2 < sol.fields.len();
        let (hr, nr) = if interior { (hj[k - 2].1, newton[k - 2].residual) } else { (f64::NAN, f64::NAN) };
        worst_centre = worst_centre.max((e.x_mean - r_newton[k]).abs());
        rec.rows.push(vec![t, e.x_mean, e.p_mean, r_newton[k], hr, nr]);
    }
    rec.push_result("caustic", "none");
    rec.push_result("max_hj_residual", num(hj.iter().map(|h| h.1).fold(0.0, f64::max)));
    rec.push_result("max_newton_residual", num(newton.iter().map(|n| n.residual).fold(0.0, f64::max)));
    rec.push_result("max_centre_deviation", num(worst_centre));
    Ok(scan(cfg, vec![rec], Vec::new()))
}

/// Liouville transport of a phase-space Gaussian, each snapshot pulled back
/// from the initial density.
pub fn run_liouville_demo(cfg: &RunConfig) -> Result<ScanRecord> {
    let v = &cfg.potential;
    let l = cfg.liouville;
    let (x, p) = fit_axes(v, (cfg.r0, cfg.p0), (l.sigma_x, l.sigma_p), cfg.t_final, l.n)?;
    let rho0 = PhaseDensity::gaussian(x, p, cfg.r0, cfg.p0, l.sigma_x, l.sigma_p)?;
    let m0 = rho0.mass();
    let mut rec = RunRecord::new("liouville", LIOUVILLE_COLUMNS);
    let mut drift: f64 = 0.0;
    for k in 0..=cfg.snapshots {
        let t = cfg.t_final * k as f64 / cfg.snapshots as f64;
        let rho = liouville_evolve(&rho0, v, t, l.dt)?;
        let (xm, pm) = rho.mean();
        drift = drift.max((rho.mass() - m0).abs());
        rec.rows.push(vec![t, xm, pm, rho.mass(), rho.l1_distance(&rho0)? / m0]);
    }
    rec.push_result("max_mass_drift", num(drift));
    rec.push_result("delta_ansatz_residual", num(delta_ansatz_check(v, cfg.r0, cfg.p0, cfg.t_final, 1e-3)?));
    rec.push_result("final_l1_to_initial", num(rec.rows.last().map_or(f64::NAN, |r| r[4])));
    Ok(scan(cfg, vec![rec], Vec::new()))
}

/// One quantum run at the first `hbar` of the scan.
pub fn run_single(cfg: &RunConfig, dump_fields: bool) -> Result<ScanRecord> {
    match cfg.experiment {
        Experiment::Detpot => return run_detpot(cfg),
        Experiment::PhjDemo => return run_phj_demo(cfg),
        Experiment::LiouvilleDemo => return run_liouville_demo(cfg),
        _ => {}
    }
    let hbar = *cfg.hbar_list.first().ok_or_else(|| Error::Config("scan.hbar is empty".into()))?;
    let eps = match (cfg.k, cfg.epsilon, cfg.epsilon_list.first()) {
        (Some(k), _, _) => k * hbar,
        (None, Some(e), _) => e,
        (None, None, Some(e)) => *e,
        _ => return Err(Error::Config("set packet.epsilon, packet.k or scan.epsilon".into())),
    };
    let s = quantum_series(&settings(cfg, hbar, eps, dump_fields))?;
    let mut r = s.record(format!("hbar={} epsilon={}", num(hbar), num(eps)));
    r.push_result("terminal_width", num(s.rows.last().map_or(f64::NAN, |r| r.obs.width)));
    Ok(ScanRecord { experiment: "simulate".into(), echo: cfg.echo(), runs: vec![r], results: Vec::new(), wall_clock: 0.0 })
}

pub fn run_scan(cfg: &RunConfig, dump_fields: bool) -> Result<ScanRecord> {
    match cfg.experiment {
        Experiment::StandardLimit => run_standard_limit(cfg, dump_fields),
        Experiment::DeterministicLimit => run_deterministic_limit(cfg, dump_fields),
        Experiment::CombinedLimit => run_combined_limit(cfg, dump_fields),
        Experiment::Uncertainty => run_uncertainty(cfg, dump_fields),
        Experiment::Detpot => run_detpot(cfg),
        Experiment::PhjDemo => run_phj_demo(cfg),
        Experiment::LiouvilleDemo => run_liouville_demo(cfg),
    }
}
