//! Batch front end for the suspension-flow toolkit: configuration, the
//! verification suites and their JSON/CSV reports.

pub mod config;
pub mod report;
pub mod suites;

pub use config::RunConfig;
pub use report::{Check, SuiteReport, Table};
