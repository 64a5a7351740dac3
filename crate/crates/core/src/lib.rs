//! Benchmarks for parallel mini-batch SGD, genetic training of small neural
//! models, and TDP-based performance and energy accounting.

pub mod datasets;
pub mod error;
pub mod experiment;
pub mod genetic;
pub mod logreg;
pub mod neuro_models;
pub mod parallel_sgd;
pub mod perf_energy;
pub mod rng;

pub use error::{Error, Result};
