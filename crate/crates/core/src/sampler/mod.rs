//! Probability sampling from a day's impression stream.
//!
//! Two designs are supported over the weight `C^nu * (s^gamma + epsilon)`:
//! a one-pass weighted reservoir (PPSWOR) and multinomial with-replacement
//! draws (PPSWR) over a materialized weight list.

mod ppswr;
mod record;
mod reservoir;
mod uniform;
mod weight;

pub use ppswr::{ppswr_sample, PpswrDesign};
pub use record::{ContentRecord, Label, SampleDraw};
pub use reservoir::{
    inclusion_probability, reservoir_key, PpsworSample, PpsworSampler, Reservoir, ReservoirEntry,
};
pub use uniform::{unit_interval_open_closed, ItemUniforms};
pub use weight::{
    compute_weight, impute_scores, SamplingConfig, Scheme, ScoreImputation, DEFAULT_EPSILON,
};
pub(crate) use weight::weight_from_parts;
