//! Offline toolkit for studying hybrid music recommendation at desk scale.
//!
//! The pipeline ingests raw listening events into a user-artist playcount
//! matrix, trains an implicit-feedback matrix factorization model alongside
//! popularity and random baselines, scores full rankings with a family of
//! top-k metrics, extracts listening-behavior features per user, and fits
//! per-metric linear regressions that steer per-user combinations of the
//! factorization and popularity rankers (selection or weighted rank fusion).
//!
//! Everything is deterministic: one root seed fans out into named
//! substreams, parallel loops write index-ordered results, and reductions
//! run sequentially, so reruns and worker counts never change output bytes.

pub mod behavior;
pub mod corpus;
pub mod error;
pub mod hybrid;
pub mod linalg;
pub mod metrics;
pub mod parallel;
pub mod perfreg;
pub mod recsys;
pub mod report;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
