//! Core library for `tripforge`: bike-share trip data ingestion, descriptive
//! usage analysis, and trip prediction.
//!
//! The pipeline, bottom to top:
//!
//! * [`domain`] — immutable trip/station/user value types.
//! * [`ingest`] — Divvy-format CSV parsing with per-release column presets.
//! * [`synth`] — seeded synthetic corpus generation for desk-scale testing.
//! * [`analysis`] — user composition, temporal, duration, and spatial reports.
//! * [`features`] — the 13-dimensional station-pair feature vector and its
//!   user/time/station ablation masks.
//! * [`dataset`] — labeled example assembly: positives from history, seeded
//!   negative sampling, and the 4:1 time-ordered train/test split.
//! * [`gbdt`] — gradient-boosted binary decision trees (log-loss, Newton
//!   leaf values) for destination classification.
//! * [`lasso`] — L1-regularized linear regression by cyclic coordinate
//!   descent for trip duration.
//! * [`metrics`] — classification and regression evaluation.
//!
//! With the `parallel` feature (default) the batch-oriented operations fan
//! out over rayon; built with `--no-default-features` every code path runs
//! sequentially.

pub mod analysis;
pub mod dataset;
pub mod domain;
mod error;
pub mod features;
pub mod gbdt;
pub mod ingest;
pub mod lasso;
pub mod metrics;
pub(crate) mod parallel;
pub mod synth;

pub use error::{Error, Result};
