use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use semiclassical::lab::{self, ConfigText, Experiment, RunConfig};
use semiclassical::Error;

const PRESETS: &[(&str, &str)] = &[
    ("combined_free", include_str!("../../../configs/combined_free.ini")),
    ("combined_harmonic", include_str!("../../../configs/combined_harmonic.ini")),
    ("combined_quartic", include_str!("../../../configs/combined_quartic.ini")),
    ("deterministic_free", include_str!("../../../configs/deterministic_free.ini")),
    ("detpot_quadratic", include_str!("../../../configs/detpot_quadratic.ini")),
    ("detpot_quartic", include_str!("../../../configs/detpot_quartic.ini")),
    ("liouville_harmonic", include_str!("../../../configs/liouville_harmonic.ini")),
    ("phj_focus", include_str!("../../../configs/phj_focus.ini")),
    ("phj_harmonic", include_str!("../../../configs/phj_harmonic.ini")),
    ("standard_harmonic", include_str!("../../../configs/standard_harmonic.ini")),
    ("uncertainty_free", include_str!("../../../configs/uncertainty_free.ini")),
];

/// Semiclassical limits lab: wave-packet scans, Hamilton-Jacobi and
/// Liouville demos, deterministic-potential tests.
///
/// Any config key can be overridden with `--section.key=value`.
#[derive(Parser)]
#[command(name = "semilab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One quantum run at the first scan entry.
    Simulate(RunArgs),
    /// Every run of the configured experiment.
    Scan(RunArgs),
    /// Deterministic-potential classification.
    Detpot(RunArgs),
    /// Classical Hamilton-Jacobi fan; exits 2 on a caustic.
    Phj(RunArgs),
    /// Phase-space Liouville transport.
    Liouville(RunArgs),
    /// Summarizes the CSVs in a directory.
    Report {
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Config file, or the name of a builtin preset.
    #[arg(long)]
    config: String,
    /// Output directory (overrides run.output).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write x, rho, S per snapshot.
    #[arg(long)]
    dump_fields: bool,
}

/// `--section.key=value` arguments are config overrides; everything else
/// goes to clap.
fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<String>) {
    args.into_iter().partition(|a| {
        a.strip_prefix("--")
            .and_then(|rest| rest.split_once('='))
            .is_some_and(|(key, _)| key.contains('.'))
    })
}

fn load_config(name: &str) -> Result<ConfigText, Error> {
    let path = Path::new(name);
    if path.exists() {
        let mut text = ConfigText::load(path)?;
        if let Some(table) = text.get("potential.table").map(PathBuf::from) {
            if table.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                text.set("potential.table", &base.join(table).display().to_string())?;
            }
        }
        return Ok(text);
    }
    let stem = name.strip_suffix(".ini").unwrap_or(name);
    match PRESETS.iter().find(|(n, _)| *n == stem) {
        Some((_, body)) => ConfigText::parse(body),
        None => Err(Error::Io {
            path: name.to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such config file or builtin preset"),
        }),
    }
}

fn execute(args: &RunArgs, overrides: &[String], forced: Option<Experiment>, single: bool) -> Result<(), Error> {
    let mut text = load_config(&args.config)?;
    if let Some(e) = forced {
        text.set("run.experiment", e.name())?;
    }
    for o in overrides {
        text.apply_override(o.trim_start_matches("--"))?;
    }
    if let Some(out) = &args.output {
        text.set("run.output", &out.display().to_string())?;
    }
    let cfg = RunConfig::from_text(text)?;
    let record = lab::run(&cfg, single, args.dump_fields)?;
    record.write(&cfg.output, args.dump_fields)?;
    println!("{} -> {}", record.one_line(), cfg.output.display());
    Ok(())
}

fn report(dir: &Path) -> Result<(), Error> {
    let io = |source| Error::Io { path: dir.display().to_string(), source };
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv") && !p.to_string_lossy().contains("_fields_"))
        .collect();
    files.sort();
    for f in files {
        let body = std::fs::read_to_string(&f).map_err(|source| Error::Io { path: f.display().to_string(), source })?;
        let header = |prefix: &str| body.lines().filter_map(|l| l.strip_prefix(prefix)).map(str::to_string).collect::<Vec<_>>();
        let rows = body.lines().filter(|l| !l.starts_with('#')).count().saturating_sub(1);
        let run = header("# run = ").join("");
        let results = header("# result ");
        println!("{}: {run}, {rows} rows", f.file_name().unwrap_or_default().to_string_lossy());
        for r in results {
            println!("  {r}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let (overrides, args) = split_overrides(std::env::args().collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Simulate(a) => execute(a, &overrides, None, true),
        Command::Scan(a) => execute(a, &overrides, None, false),
        Command::Detpot(a) => execute(a, &overrides, Some(Experiment::Detpot), false),
        Command::Phj(a) => execute(a, &overrides, Some(Experiment::PhjDemo), false),
        Command::Liouville(a) => execute(a, &overrides, Some(Experiment::LiouvilleDemo), false),
        Command::Report { dir } => report(dir),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 2 } else { 1 })
        }
    }
}
