//! Leakage-safe temporal graph features and fraud classification.
//!
//! The crate covers the whole pipeline: ingesting Elliptic-format transaction
//! files into a [`graph::TemporalGraph`], computing structural descriptors on
//! time-respecting snapshots ([`features`]), chronological splitting
//! ([`dataset`]), a class-weighted random forest ([`forest`]), probability
//! calibration ([`calibration`]) and imbalance-aware evaluation ([`metrics`]).
//! [`pipeline`] ties the stages together for the `fraudkit` binary.

pub mod calibration;
pub mod dataset;
pub mod error;
pub mod features;
pub mod forest;
pub mod graph;
pub mod matrix;
pub mod metrics;
pub mod pipeline;

pub use error::{Error, Result};

pub const VERSION: &str = concat!("fraudkit ", env!("CARGO_PKG_VERSION"));
