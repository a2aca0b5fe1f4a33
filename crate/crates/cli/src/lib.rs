//! Experiment harness and live session server for the `ldmp` binary.

pub mod experiments;
pub mod output;
pub mod serve;
