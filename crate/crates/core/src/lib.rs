//! Exposure-weighted prevalence measurement from ML-assisted probability
//! samples of impression logs.
//!
//! The crate is organised along the measurement flow:
//!
//! - [`sampler`]: weights, weighted reservoir (PPSWOR) and multinomial
//!   (PPSWR) draws over a day's impression stream;
//! - [`labeling`]: pluggable label providers and gold-set quality gating;
//! - [`estimator`]: ratio estimators, segment drill-downs, variance, CIs,
//!   effective sample size and label-error correction;
//! - [`alerting`]: sensitivity, minimum detectable effects and weekly alerts;
//! - [`simlab`]: the synthetic Monte Carlo study of CI width versus budget;
//! - [`pipeline`]: config-driven daily runs with persisted lineage.

pub mod alerting;
pub mod error;
pub mod jsonl;
pub mod estimator;
pub mod labeling;
pub mod numeric;
pub mod pipeline;
pub mod sampler;
pub mod simlab;

pub use error::{Error, Result};
