//! Export-status prediction from firm financial accounts.
//!
//! The crate covers the whole pipeline: panel ingestion and derived
//! predictors ([`dataset`]), a probit sum-of-trees model with
//! missingness-aware splits ([`bart`]), comparison classifiers
//! ([`baselines`]), evaluation ([`metrics`]), exporting scores and the premia
//! regression ([`scoring`]), location quotients and score summaries
//! ([`analytics`]) and a synthetic panel generator ([`synth`]).

pub mod analytics;
pub mod bart;
pub mod baselines;
pub mod dataset;
pub mod error;
pub mod features;
pub mod metrics;
pub mod models;
pub mod scoring;
pub mod stats;
pub mod synth;

pub use dataset::{FirmPanel, LabelDefinition, LabelSet, Partition, PatternClass, RowKey, Schema};
pub use error::{Error, Result};
pub use features::{Dataset, FeatureMatrix, PredictionTable};
