//! Simulation, report formats and the command-line front end built on
//! `latred-core`.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod oracles;
pub mod report;
pub mod simulate;
