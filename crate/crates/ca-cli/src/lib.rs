//! Subcommand implementations and the run-report format behind the `ca` binary.

pub mod continuous;
pub mod finite;
pub mod report;
