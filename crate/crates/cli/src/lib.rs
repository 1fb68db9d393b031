//! Experiment runner for stochastic vector quantisers: spec files, data
//! scenes, training runs, analyses and artifact directories.

pub mod artifacts;
pub mod bundled;
pub mod commands;
pub mod error;
pub mod experiment;
pub mod scene;
pub mod spec;
