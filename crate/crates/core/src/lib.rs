//! Paired-comparison interactive evolution.
//!
//! Gaussian-mixture landscapes stand in for a human's hidden preferences;
//! a pseudo-user quantizes them into coarse, per-generation judgments; four
//! engines (GA, two tournament GAs, DE/best/1/bin) search using only what the
//! judge reports. [`simulation`] runs whole experiment grids and [`stats`]
//! decides, generation by generation, which engine is significantly ahead.

pub mod ea;
pub mod error;
pub mod fitness;
pub mod genotype;
pub mod landscape;
pub mod simulation;
pub mod stats;

pub use error::{CoreError, Result};
