//! Experiment pipelines E1–E7. Each writes checks, metrics and tables into a
//! [`RunReport`]; the verdict is a pure function of the stored checks.

pub mod e1;
pub mod e2;
pub mod e3;
pub mod e4;
pub mod e5;
pub mod e6;
pub mod e7;

use std::time::Instant;

use crate::config::{ExperimentConfig, Params};
use crate::error::Result;
use crate::report::RunReport;

pub const DEFAULT_SEED: u64 = 42;

/// Runs one experiment on the current rayon pool.
pub fn run(cfg: &ExperimentConfig, seed: u64) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport::new(&cfg.id().to_string(), seed, cfg.resolved());
    match &cfg.params {
        Params::E1(c) => e1::run(c, seed, &mut report)?,
        Params::E2(c) => e2::run(c, seed, &mut report)?,
        Params::E3(c) => e3::run(c, seed, &mut report)?,
        Params::E4(c) => e4::run(c, seed, &mut report)?,
        Params::E5(c) => e5::run(c, seed, &mut report)?,
        Params::E6(c) => e6::run(c, seed, &mut report)?,
        Params::E7(c) => e7::run(c, seed, &mut report)?,
    }
    report.wall_clock_s = start.elapsed().as_secs_f64();
    Ok(report)
}
