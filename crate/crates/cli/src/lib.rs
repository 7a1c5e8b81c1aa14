//! Command-line front end: solution files, sweeps and benchmarks on top of
//! `bclm_core`.

pub mod commands;
pub mod format;
