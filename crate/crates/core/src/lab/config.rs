//! Run configuration: a flat `key = value` file with `[section]` headers.
//!
//! ```text
//! [run]
//! experiment = combined_limit
//! [potential]
//! kind = harmonic
//! omega = 1
//! [scan]
//! hbar = 1 0.1 0.01
//! ```
//!
//! Every key can be overridden as `section.key=value`. Quantities are in
//! natural units: mass, hbar and frequencies of order one, lengths in units
//! where the initial packet width is of order one.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::potential::{PotentialSpec, TabulatedPotential};

/// Every accepted key, by section.
const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("run", &["experiment", "output", "seed"]),
    ("potential", &["kind", "mass", "omega", "f0", "coeffs", "table"]),
    ("packet", &["epsilon", "k", "r0", "p0"]),
    ("scan", &["hbar", "epsilon", "t_star", "tol"]),
    ("numerics", &["x_min", "x_max", "n", "t_final", "snapshots", "dt"]),
    ("phj", &["curvature", "characteristics", "dt"]),
    ("liouville", &["n", "dt", "sigma_x", "sigma_p"]),
];

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Raw `section.key -> value` pairs, kept sorted so the echo is canonical.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigText {
    entries: BTreeMap<String, String>,
}

impl ConfigText {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = ConfigText::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected `key = value`, got {raw:?}", lineno + 1)))?;
            if section.is_empty() {
                return Err(config_err(format!("line {}: key outside any [section]", lineno + 1)));
            }
            out.set(&format!("{section}.{}", key.trim()), value.trim())?;
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (section, name) = key
            .split_once('.')
            .ok_or_else(|| config_err(format!("key {key:?} must look like section.key")))?;
        let known = KNOWN_KEYS
            .iter()
            .find(|(s, _)| *s == section)
            .ok_or_else(|| config_err(format!("unknown section [{section}]")))?;
        if !known.1.contains(&name) {
            return Err(config_err(format!("unknown key {name:?} in [{section}]")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies `section.key=value`.
    pub fn apply_override(&mut self, arg: &str) -> Result<()> {
        let (key, value) = arg
            .split_once('=')
            .ok_or_else(|| config_err(format!("override {arg:?} must look like section.key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Canonical text form; parsing it gives back the same entries.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (key, value) in &self.entries {
            let (section, name) = key.split_once('.').expect("keys are validated on insert");
            if section != current {
                out.push_str(&format!("[{section}]\n"));
                current = section;
            }
            out.push_str(&format!("{name} = {value}\n"));
        }
        out
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                let x: f64 = v.parse().map_err(|_| config_err(format!("{key}: {v:?} is not a number")))?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(config_err(format!("{key}: {v:?} is not finite")))
                }
            })
            .transpose()
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn require(&self, key: &str) -> Result<f64> {
        self.f64(key)?.ok_or_else(|| config_err(format!("missing {key}")))
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.get(key)
            .map(|v| v.parse().map_err(|_| config_err(format!("{key}: {v:?} is not a non-negative integer"))))
            .transpose()
            .map(|v| v.unwrap_or(default))
    }

    fn list(&self, key: &str) -> Result<Vec<f64>> {
        let Some(v) = self.get(key) else { return Ok(Vec::new()) };
        v.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| config_err(format!("{key}: {s:?} is not a number")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    StandardLimit,
    DeterministicLimit,
    CombinedLimit,
    Detpot,
    PhjDemo,
    LiouvilleDemo,
    Uncertainty,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::StandardLimit,
        Experiment::DeterministicLimit,
        Experiment::CombinedLimit,
        Experiment::Detpot,
        Experiment::PhjDemo,
        Experiment::LiouvilleDemo,
        Experiment::Uncertainty,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::StandardLimit => "standard_limit",
            Experiment::DeterministicLimit => "deterministic_limit",
            Experiment::CombinedLimit => "combined_limit",
            Experiment::Detpot => "detpot",
            Experiment::PhjDemo => "phj_demo",
            Experiment::LiouvilleDemo => "liouville_demo",
            Experiment::Uncertainty => "uncertainty",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| config_err(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhjSettings {
    /// Initial action `p0 (x - r0) + curvature (x - r0)^2 / 2`.
    pub curvature: f64,
    pub characteristics: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiouvilleSettings {
    pub n: usize,
    pub dt: f64,
    pub sigma_x: f64,
    pub sigma_p: f64,
}

/// Validated configuration of one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub potential: PotentialSpec,
    /// Fixed packet width; ignored when `k` is set.
    pub epsilon: Option<f64>,
    /// Ratio `epsilon / hbar` of the combined limit.
    pub k: Option<f64>,
    pub r0: f64,
    pub p0: f64,
    pub hbar_list: Vec<f64>,
    pub epsilon_list: Vec<f64>,
    pub t_star: Option<f64>,
    pub tol: f64,
    pub grid: Grid,
    pub t_final: f64,
    pub snapshots: usize,
    /// Time step; `None` picks the largest stable one.
    pub dt: Option<f64>,
    pub phj: PhjSettings,
    pub liouville: LiouvilleSettings,
    pub output: PathBuf,
    /// Echoed for reproducibility; no current experiment draws random numbers.
    pub seed: u64,
    pub text: ConfigText,
}

fn positive(key: &str, values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !(**v > 0.0)) {
        Some(v) => Err(config_err(format!("{key}: entries must be positive, got {v}"))),
        None => Ok(()),
    }
}

fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

fn potential_from(text: &ConfigText) -> Result<PotentialSpec> {
    let mass = text.f64_or("potential.mass", 1.0)?;
    match text.get("potential.kind").unwrap_or("free") {
        "free" => PotentialSpec::free(mass),
        "constant_force" => PotentialSpec::constant_force(mass, text.require("potential.f0")?),
        "harmonic" => PotentialSpec::harmonic(mass, text.f64_or("potential.omega", 1.0)?),
        "polynomial" => {
            let c = text.list("potential.coeffs")?;
            if c.is_empty() {
                return Err(config_err("polynomial potential needs potential.coeffs"));
            }
            PotentialSpec::polynomial(mass, c)
        }
        "tabulated" => {
            let path = text.get("potential.table").ok_or_else(|| config_err("tabulated potential needs potential.table"))?;
            let body = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_string(), source })?;
            PotentialSpec::tabulated(mass, TabulatedPotential::parse(&body)?)
        }
        other => Err(config_err(format!("unknown potential kind {other:?}"))),
    }
}

impl RunConfig {
    pub fn from_text(text: ConfigText) -> Result<Self> {
        let experiment = Experiment::from_name(text.get("run.experiment").ok_or_else(|| config_err("missing run.experiment"))?)?;
        let potential = potential_from(&text)?;
        let grid = Grid::new(
            text.f64_or("numerics.x_min", -10.0)?,
            text.f64_or("numerics.x_max", 10.0)?,
            text.usize_or("numerics.n", 1024)?,
        )
        .map_err(|e| config_err(e.to_string()))?;
        let cfg = RunConfig {
            experiment,
            potential,
            epsilon: text.f64("packet.epsilon")?,
            k: text.f64("packet.k")?,
            r0: text.f64_or("packet.r0", 0.0)?,
            p0: text.f64_or("packet.p0", 0.0)?,
            hbar_list: text.list("scan.hbar")?,
            epsilon_list: text.list("scan.epsilon")?,
            t_star: text.f64("scan.t_star")?,
            tol: text.f64_or("scan.tol", crate::detpot::DEFAULT_TOL)?,
            grid,
            t_final: text.f64_or("numerics.t_final", 1.0)?,
            snapshots: text.usize_or("numerics.snapshots", 20)?,
            dt: text.f64("numerics.dt")?,
            phj: PhjSettings {
                curvature: text.f64_or("phj.curvature", 0.0)?,
                characteristics: text.usize_or("phj.characteristics", 257)?,
                dt: text.f64_or("phj.dt", 1e-3)?,
            },
            liouville: LiouvilleSettings {
                n: text.usize_or("liouville.n", 129)?,
                dt: text.f64_or("liouville.dt", 1e-2)?,
                sigma_x: text.f64_or("liouville.sigma_x", 0.3)?,
                sigma_p: text.f64_or("liouville.sigma_p", 0.3)?,
            },
            output: PathBuf::from(text.get("run.output").unwrap_or("out")),
            seed: text.get("run.seed").map_or(Ok(0), |s| s.parse().map_err(|_| config_err(format!("run.seed: {s:?}"))))?,
            text,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_text(ConfigText::parse(text)?)
    }

    /// Config echo for record headers. `run.output` is left out so that a
    /// record does not depend on where it was written.
    pub fn echo(&self) -> String {
        let mut text = self.text.clone();
        text.entries.remove("run.output");
        text.echo()
    }

    /// Width of the packet for a run at `hbar`.
    pub fn epsilon_for(&self, hbar: f64) -> Result<f64> {
        match (self.k, self.epsilon) {
            (Some(k), _) => Ok(k * hbar),
            (None, Some(e)) => Ok(e),
            (None, None) => Err(config_err("set packet.epsilon or packet.k")),
        }
    }

    fn validate(&self) -> Result<()> {
        positive("scan.hbar", &self.hbar_list)?;
        positive("scan.epsilon", &self.epsilon_list)?;
        for (key, v) in [("packet.epsilon", self.epsilon), ("packet.k", self.k), ("scan.t_star", self.t_star), ("numerics.dt", self.dt)] {
            if let Some(v) = v {
                positive(key, &[v])?;
            }
        }
        positive("numerics.t_final", &[self.t_final])?;
        positive("scan.tol", &[self.tol])?;
        if self.snapshots == 0 {
            return Err(config_err("numerics.snapshots must be at least 1"));
        }
        let quantum = matches!(
            self.experiment,
            Experiment::StandardLimit | Experiment::DeterministicLimit | Experiment::CombinedLimit | Experiment::Uncertainty
        );
        if quantum && self.hbar_list.is_empty() {
            return Err(config_err("scan.hbar must list at least one value"));
        }
        match self.experiment {
            Experiment::StandardLimit => {
                if self.epsilon.is_none() {
                    return Err(config_err("standard_limit needs a fixed packet.epsilon"));
                }
            }
            Experiment::DeterministicLimit => {
                if self.hbar_list.len() != 1 {
                    return Err(config_err("deterministic_limit runs at one fixed hbar"));
                }
                if self.epsilon_list.len() < 3 || !strictly_decreasing(&self.epsilon_list) {
                    return Err(config_err("deterministic_limit needs at least three decreasing scan.epsilon values"));
                }
                if self.t_star.is_none() {
                    return Err(config_err("deterministic_limit needs scan.t_star"));
                }
                if let crate::potential::PotentialKind::Harmonic { omega } = self.potential.kind() {
                    let coherent = self.hbar_list[0] / (self.potential.mass() * omega);
                    if self.epsilon_list.iter().any(|e| (e - coherent).abs() <= 1e-12 * coherent) {
                        return Err(config_err(format!(
                            "epsilon = {coherent} is the coherent width and does not spread; drop it from the scan"
                        )));
                    }
                }
            }
            Experiment::CombinedLimit => {
                if self.k.is_none() {
                    return Err(config_err("combined_limit needs packet.k"));
                }
                if !strictly_decreasing(&self.hbar_list) {
                    return Err(config_err("combined_limit needs decreasing scan.hbar"));
                }
            }
            Experiment::Uncertainty => {
                self.epsilon_for(1.0)?;
            }
            Experiment::Detpot => {
                if !self.potential.is_static() {
                    return Err(config_err("detpot needs a static potential"));
                }
            }
            Experiment::PhjDemo => {
                self.epsilon_for(1.0)?;
                positive("phj.dt", &[self.phj.dt])?;
            }
            Experiment::LiouvilleDemo => {
                positive("liouville.dt", &[self.liouville.dt])?;
                positive("liouville sigmas", &[self.liouville.sigma_x, self.liouville.sigma_p])?;
                if self.liouville.n < 2 {
                    return Err(config_err("liouville.n must be at least 2"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# comment
[run]
experiment = combined_limit
[potential]
kind = harmonic   # trailing comment
omega = 2
[packet]
k = 0.5
[scan]
hbar = 1, 0.1 0.01
";

    #[test]
    fn parses_sections_and_lists() {
        let cfg = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.experiment, Experiment::CombinedLimit);
        assert_eq!(cfg.hbar_list, vec![1.0, 0.1, 0.01]);
        assert_eq!(cfg.epsilon_for(0.1).unwrap(), 0.05);
        assert_eq!(cfg.potential, PotentialSpec::harmonic(1.0, 2.0).unwrap());
    }

    #[test]
    fn echo_round_trips() {
        let text = ConfigText::parse(SAMPLE).unwrap();
        assert_eq!(ConfigText::parse(&text.echo()).unwrap(), text);
    }

    #[test]
    fn overrides_replace_values() {
        let mut text = ConfigText::parse(SAMPLE).unwrap();
        text.apply_override("potential.omega=3").unwrap();
        assert_eq!(text.get("potential.omega"), Some("3"));
        assert!(matches!(text.apply_override("potential.omgea=3"), Err(Error::Config(_))));
        assert!(matches!(text.apply_override("bogus"), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bad_scans() {
        let bad = SAMPLE.replace("hbar = 1, 0.1 0.01", "hbar = 0.01 0.1");
        assert!(matches!(RunConfig::parse(&bad), Err(Error::Config(_))));
        let neg = SAMPLE.replace("hbar = 1, 0.1 0.01", "hbar = 1 -0.1");
        assert!(matches!(RunConfig::parse(&neg), Err(Error::Config(_))));
        let standard = "[run]\nexperiment = standard_limit\n[scan]\nhbar = 1 0.1 0.01\n";
        assert!(matches!(RunConfig::parse(standard), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_scan_rejects_coherent_width() {
        let text = "[run]\nexperiment = deterministic_limit\n[potential]\nkind = harmonic\n[scan]\nhbar = 1\nepsilon = 10 1 0.1\nt_star = 1\n";
        assert!(matches!(RunConfig::parse(text), Err(Error::Config(_))));
        assert!(RunConfig::parse(&text.replace("10 1 0.1", "10 0.5 0.1")).is_ok());
    }

    #[test]
    fn missing_table_names_the_path() {
        let text = "[run]\nexperiment = detpot\n[potential]\nkind = tabulated\ntable = /nonexistent/v.txt\n";
        match RunConfig::parse(text) {
            Err(Error::Io { path, .. }) => assert_eq!(path, "/nonexistent/v.txt"),
            other => panic!("{other:?}"),
        }
    }
}
