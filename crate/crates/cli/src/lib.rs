//! Command-line runner for the entroflow engine: configuration, experiment
//! orchestration, deterministic CSV emission and the invariant suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod verify;

use std::path::Path;
use std::time::Instant;

use rayon::ThreadPool;

pub use config::{ConfigFile, Experiment};
pub use error::{CliError, Result};

use output::{emit, RunOutput};

pub fn thread_pool(workers: usize) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().map_err(|e| CliError::Config(format!("--workers: {e}")))
}

/// Runs one experiment end to end and writes its outputs under `out`.
/// Partial results of a failed run land in `out/quarantine`.
pub fn run(experiment: Experiment, config: &ConfigFile, out: &Path, workers: usize) -> Result<()> {
    let start = Instant::now();
    let pool = thread_pool(workers)?;
    let (run, unit, echo, failed_invariants) = match experiment {
        Experiment::Drive => {
            let s = config.drive_setup()?;
            (experiments::drive(&s, &pool), s.energy_unit.clone(), serde_json::to_value(&s), 0)
        }
        Experiment::Ring => {
            let s = config.ring_setup()?;
            (experiments::ring(&s, &pool), s.energy_unit.clone(), serde_json::to_value(&s), 0)
        }
        Experiment::Probes => {
            let s = config.probe_setup()?;
            (experiments::probes(&s, &pool), s.energy_unit.clone(), serde_json::to_value(&s), 0)
        }
        Experiment::Verify => {
            let s = config.verify_setup()?;
            let rows = verify::run_suite(&s, &pool);
            let failed = rows.iter().filter(|r| !r.pass()).count();
            for r in rows.iter().filter(|r| !r.pass()) {
                log::error!("invariant {} failed: value {:e}, bound {:?}", r.name, r.value, r.bound);
            }
            let run = RunOutput { tables: vec![verify::table(&rows)], failure: None };
            (run, "mixed".to_owned(), serde_json::to_value(&s), failed)
        }
    };
    let echo = echo.map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    let dir = emit(out, &experiment.to_string(), &unit, &echo, &run, workers, start.elapsed())?;
    log::info!("{experiment}: wrote {} table(s) to {}", run.tables.len(), dir.display());
    if let Some(e) = run.failure {
        return Err(e);
    }
    if failed_invariants > 0 {
        return Err(CliError::Invariants(failed_invariants));
    }
    Ok(())
}
