//! Command-line verification suites for the sl2pc kernels: configuration,
//! suite definitions and one-JSON-object-per-line reports.

pub mod config;
pub mod report;
pub mod suites;
