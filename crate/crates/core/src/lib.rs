//! Configuration-driven crop-yield data pipeline.
//!
//! Stages: feature mapping and fetch plan ([`schema`]), acquisition
//! ([`acquire`]), harmonisation ([`harmonize`]), agronomic feature engineering
//! ([`engineer`]), and fold-local modelling ([`evaluate`]) which drives
//! screening and mRMR selection ([`select`]), imputation and scaling
//! ([`preprocess`]) and the baseline regressors ([`learners`]). [`pipeline`]
//! chains the stages with resume; [`synth`] writes a benchmark with known signal.

pub mod acquire;
pub mod error;
pub mod evaluate;
pub mod engineer;
pub mod family;
pub mod frame;
pub mod harmonize;
pub mod learners;
mod par;
pub mod pipeline;
pub mod preprocess;
pub mod select;
pub mod schema;
pub mod series;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use family::{Derivation, Family};
