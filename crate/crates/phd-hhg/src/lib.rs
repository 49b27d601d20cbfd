//! Batch front-end for PHD harmonic-generation runs: configuration with
//! presets, run orchestration and the auxiliary verification commands.

pub mod commands;
pub mod config;
pub mod run;
