//! Configuration files, CSV outputs, the paired experiment runner and the
//! change-point benchmark.

pub mod config_file;
pub mod cpd_bench;
pub mod experiment;
pub mod metrics;
pub mod scorecard;
