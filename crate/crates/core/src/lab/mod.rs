//! Experiment orchestration: configs in, CSV records out.
//!
//! Runs inside a scan are pure functions of the config and may execute
//! concurrently; records are always ordered by scan index.

pub mod config;
pub mod experiments;
pub mod record;

pub use config::{ConfigText, Experiment, RunConfig};
pub use experiments::{quantum_series, QuantumRow, QuantumSeries, QuantumSettings};
pub use record::{RunRecord, ScanRecord};

use crate::error::Result;

/// Runs the whole scan (`single = false`) or only its first entry, and
/// stamps the wall-clock time.
pub fn run(cfg: &RunConfig, single: bool, dump_fields: bool) -> Result<ScanRecord> {
    let start = std::time::Instant::now();
    let mut rec = if single { experiments::run_single(cfg, dump_fields)? } else { experiments::run_scan(cfg, dump_fields)? };
    rec.wall_clock = start.elapsed().as_secs_f64();
    Ok(rec)
}
