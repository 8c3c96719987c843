//! Design-based prevalence estimation from a labeled probability sample.
//!
//! All estimators share one core: per-draw observations `(x, z, p)` with
//! `x` the unit's impressions (in the segment of interest), `z = x * Y`, and
//! `p` the per-draw selection probability. The point estimate is the ratio
//! `sum(z/p) / sum(x/p)`; its variance is the Taylor-linearized
//! with-replacement variance of that ratio.

mod correction;
mod ratio;
mod segment;

use serde::{Deserialize, Serialize};

pub use correction::{rogan_gladen_correct, LabelerQuality};
pub use ratio::{
    confidence_interval, estimate_from_observations, hh_ratio, ht_hajek, kish_ess,
    kish_ess_from_weights, residuals, variance_taylor, ConfidenceInterval, Observation,
};
pub use segment::{
    estimate_segment, segment_estimate_known_denominator, segment_estimate_ratio,
    segment_known_denominator_with, WeightBasis, ALL_SEGMENTS,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Hansen-Hurwitz ratio for with-replacement draws.
    HhRatio,
    /// Estimated numerator over a denominator known exactly from logs.
    HtKnownDenominator,
    /// Hajek ratio with approximate inclusion probabilities.
    HtHajek,
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EstimatorKind::HhRatio => "hh_ratio",
            EstimatorKind::HtKnownDenominator => "ht_known_denominator",
            EstimatorKind::HtHajek => "ht_hajek",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateFlags {
    /// Reported CI bounds were clamped into [0, 1].
    pub clamped: bool,
    /// Fewer than two draws: no variance, CI collapsed to the point.
    pub variance_unavailable: bool,
    pub rg_corrected: bool,
    /// The corrected point estimate fell outside [0, 1] and was clamped.
    pub rg_clamped: bool,
    /// Variance uses the with-replacement formula on without-replacement
    /// weights (conservative approximation).
    pub approximate_variance: bool,
}

/// Point estimate, uncertainty and diagnostics for a day or a segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceEstimate {
    pub kind: EstimatorKind,
    pub theta_hat: f64,
    pub variance: Option<f64>,
    /// Reported bounds, clamped to [0, 1].
    pub ci_low: f64,
    pub ci_high: f64,
    /// Unclamped `theta_hat -/+ 1.96 sd`.
    pub raw_ci_low: f64,
    pub raw_ci_high: f64,
    pub ess: f64,
    pub sample_positive_rate: f64,
    pub n_draws: usize,
    pub abstentions: usize,
    /// Estimated violative-impression total (per draw mean, `Z-hat`).
    pub numerator: f64,
    /// Estimated or known impression total (`X-hat` or `D`).
    pub denominator: f64,
    pub flags: EstimateFlags,
}

impl PrevalenceEstimate {
    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    pub fn standard_error(&self) -> Option<f64> {
        self.variance.map(f64::sqrt)
    }

    pub(crate) fn set_interval(&mut self) {
        match self.variance {
            Some(v) => {
                let ci = confidence_interval(self.theta_hat, v);
                self.ci_low = ci.low;
                self.ci_high = ci.high;
                self.raw_ci_low = ci.raw_low;
                self.raw_ci_high = ci.raw_high;
                self.flags.clamped = ci.clamped;
                self.flags.variance_unavailable = false;
            }
            None => {
                self.ci_low = self.theta_hat;
                self.ci_high = self.theta_hat;
                self.raw_ci_low = self.theta_hat;
                self.raw_ci_high = self.theta_hat;
                self.flags.clamped = false;
                self.flags.variance_unavailable = true;
            }
        }
    }
}
