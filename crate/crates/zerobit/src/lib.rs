//! Experiment runner for zero-bit watermarking fundamental solutions: JSON
//! configuration and descriptors, CSV/JSON reports, and the `zerobit` CLI.

pub mod cli;
pub mod config;
pub mod descriptors;
pub mod experiments;
pub mod report;
