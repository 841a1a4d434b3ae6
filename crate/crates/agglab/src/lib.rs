//! Experiment pipelines, reports and the command-line front end for the
//! aggregation lab. Numerics live in `agglab-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod par;
pub mod report;
pub mod stats;
pub mod suites;
