//! Run records and their CSV / summary serialization.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const QUANTUM_COLUMNS: &[&str] = &[
    "t",
    "x_mean",
    "p_mean",
    "var_x",
    "var_p",
    "uncertainty_product",
    "width",
    "kurtosis_excess",
    "quantum_term_norm",
    "hj_residual_quantum",
    "hj_residual_classical",
    "newton_deviation",
];
pub const DETPOT_COLUMNS: &[&str] = &["epsilon", "residual_absolute", "residual_relative", "fourier_residual"];
pub const PHJ_COLUMNS: &[&str] = &["t", "x_mean", "p_mean", "r_newton", "hj_residual", "newton_residual"];
pub const LIOUVILLE_COLUMNS: &[&str] = &["t", "x_mean", "p_mean", "mass", "l1_to_initial"];

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.16e}")
    }
}

/// `x, rho, S` on the grid at one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub t: f64,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub label: String,
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<f64>>,
    pub results: Vec<(String, String)>,
    pub fields: Vec<FieldDump>,
}

impl RunRecord {
    pub fn new(label: impl Into<String>, columns: &'static [&'static str]) -> Self {
        RunRecord { label: label.into(), columns, rows: Vec::new(), results: Vec::new(), fields: Vec::new() }
    }

    pub fn push_result(&mut self, key: &str, value: impl Into<String>) {
        self.results.push((key.to_string(), value.into()));
    }

    pub fn result(&self, key: &str) -> Option<&str> {
        lookup(&self.results, key)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Header comments (schema, run label, config echo, results), the column
    /// row, then one row per snapshot.
    pub fn to_csv(&self, experiment: &str, echo: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# schema = {SCHEMA_VERSION}");
        let _ = writeln!(out, "# experiment = {experiment}");
        let _ = writeln!(out, "# run = {}", self.label);
        for line in echo.lines() {
            let _ = writeln!(out, "# config {line}");
        }
        for (k, v) in &self.results {
            let _ = writeln!(out, "# result {k} = {v}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(|x| num(*x)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

fn lookup<'a>(pairs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn fields_csv(f: &FieldDump) -> String {
    let mut out = format!("# t = {}\nx,rho,S\n", num(f.t));
    for i in 0..f.x.len() {
        let _ = writeln!(out, "{},{},{}", num(f.x[i]), num(f.rho[i]), num(f.s[i]));
    }
    out
}

/// All runs of one invocation, ordered by scan index.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRecord {
    pub experiment: String,
    pub echo: String,
    pub runs: Vec<RunRecord>,
    pub results: Vec<(String, String)>,
    pub wall_clock: f64,
}

impl ScanRecord {
    pub fn result(&self, key: &str) -> Option<&str> {
        lookup(&self.results, key)
    }

    pub fn csv_name(&self, index: usize) -> String {
        format!("{}_{index:03}.csv", self.experiment)
    }

    /// Plain-text summary. Carries the wall-clock time, so unlike the CSVs
    /// it differs between identical invocations.
    pub fn summary_text(&self) -> String {
        let mut out = format!("experiment = {}\nschema = {SCHEMA_VERSION}\nwall_clock_s = {:.3}\n", self.experiment, self.wall_clock);
        for (k, v) in &self.results {
            let _ = writeln!(out, "{k} = {v}");
        }
        for (i, run) in self.runs.iter().enumerate() {
            let _ = writeln!(out, "\n[run {i}] {} ({} rows) -> {}", run.label, run.rows.len(), self.csv_name(i));
            for (k, v) in &run.results {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        let _ = write!(out, "\n[config]\n{}", self.echo);
        out
    }

    pub fn one_line(&self) -> String {
        let verdict = ["verdict", "deviation_decreasing", "quantum_term_exponent", "slope_width_over_epsilon", "floor_respected"]
            .iter()
            .find_map(|k| self.result(k).map(|v| format!(", {k} = {v}")))
            .unwrap_or_default();
        format!("{}: {} run(s) in {:.2} s{verdict}", self.experiment, self.runs.len(), self.wall_clock)
    }

    /// Writes one CSV per run, the summary and (optionally) field dumps into
    /// `dir`, creating it if needed. Returns the paths written.
    pub fn write(&self, dir: &Path, dump_fields: bool) -> Result<Vec<PathBuf>> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| Error::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut written = Vec::new();
        let mut put = |name: String, body: String| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(io(&path))?;
            written.push(path);
            Ok(())
        };
        for (i, run) in self.runs.iter().enumerate() {
            put(self.csv_name(i), run.to_csv(&self.experiment, &self.echo))?;
            if dump_fields {
                for (j, f) in run.fields.iter().enumerate() {
                    put(format!("{}_{i:03}_fields_{j:04}.csv", self.experiment), fields_csv(f))?;
                }
            }
        }
        put(format!("{}_summary.txt", self.experiment), self.summary_text())?;
        Ok(written)
    }
}
