use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    estimate_segment, rogan_gladen_correct, segment_known_denominator_with, EstimateFlags,
    EstimatorKind, LabelerQuality, PrevalenceEstimate, ALL_SEGMENTS,
};
use crate::pipeline::config::CorrectionScope;
use crate::pipeline::sample::SampleMeta;
use crate::sampler::SampleDraw;

/// One published estimate: a (day, segment, estimator) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub policy: String,
    pub day: NaiveDate,
    pub segment: String,
    pub estimator: EstimatorKind,
    pub theta_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub raw_ci_low: f64,
    pub raw_ci_high: f64,
    pub variance: Option<f64>,
    pub ci_width: f64,
    pub ess: f64,
    pub sample_positive_rate: f64,
    pub n_draws: usize,
    pub abstentions: usize,
    pub numerator: f64,
    pub denominator: f64,
    pub flags: EstimateFlags,
    pub sample_id: String,
}

impl EstimateRecord {
    pub fn from_estimate(policy: &str, day: NaiveDate, segment: &str, sample_id: &str, e: &PrevalenceEstimate) -> Self {
        Self {
            policy: policy.to_string(),
            day,
            segment: segment.to_string(),
            estimator: e.kind,
            theta_hat: e.theta_hat,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            raw_ci_low: e.raw_ci_low,
            raw_ci_high: e.raw_ci_high,
            variance: e.variance,
            ci_width: e.ci_width(),
            ess: e.ess,
            sample_positive_rate: e.sample_positive_rate,
            n_draws: e.n_draws,
            abstentions: e.abstentions,
            numerator: e.numerator,
            denominator: e.denominator,
            flags: e.flags,
            sample_id: sample_id.to_string(),
        }
    }

    /// Order of preference when one number per (day, segment) is shown:
    /// corrected over uncorrected, known denominator over ratio.
    fn rank(&self) -> (bool, bool) {
        (self.flags.rg_corrected, self.estimator == EstimatorKind::HtKnownDenominator)
    }
}

/// The record shown for `segment` among one day's estimates.
pub fn published<'a>(estimates: &'a [EstimateRecord], day: NaiveDate, segment: &str) -> Option<&'a EstimateRecord> {
    estimates
        .iter()
        .filter(|e| e.day == day && e.segment == segment)
        .max_by_key(|e| e.rank())
}

/// What to estimate from a labeled daily sample.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EstimationPlan {
    pub segments: Vec<String>,
    pub known_denominators: bool,
    pub correction: Option<(LabelerQuality, CorrectionScope)>,
}

/// Global and per-segment estimates from one labeled sample. Segments
/// without sampled impressions are skipped with a warning.
pub fn compute_estimates(
    policy: &str,
    day: NaiveDate,
    draws: &[SampleDraw],
    meta: &SampleMeta,
    plan: &EstimationPlan,
) -> Result<(Vec<EstimateRecord>, Vec<String>)> {
    let basis = meta.basis();
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    let correct = |e: &PrevalenceEstimate, global: bool| -> Result<Option<PrevalenceEstimate>> {
        match &plan.correction {
            Some((q, scope)) if global || *scope == CorrectionScope::AllSegments => {
                rogan_gladen_correct(e, q).map(Some)
            }
            _ => Ok(None),
        }
    };
    let push = |out: &mut Vec<EstimateRecord>, seg: &str, e: &PrevalenceEstimate| {
        out.push(EstimateRecord::from_estimate(policy, day, seg, &meta.sample_id, e));
    };

    let global = estimate_segment(draws, ALL_SEGMENTS, basis)?;
    push(&mut out, ALL_SEGMENTS, &global);
    if let Some(c) = correct(&global, true)? {
        push(&mut out, ALL_SEGMENTS, &c);
    }

    for seg in &plan.segments {
        let ratio = match estimate_segment(draws, seg, basis) {
            Ok(e) => e,
            Err(Error::EmptySegment(_)) => {
                warnings.push(format!("segment `{seg}` has no sampled impressions; skipped"));
                continue;
            }
            Err(e) => return Err(e),
        };
        push(&mut out, seg, &ratio);
        if let Some(c) = correct(&ratio, false)? {
            push(&mut out, seg, &c);
        }
        if plan.known_denominators {
            match meta.segment_totals.get(seg).copied().filter(|d| *d > 0) {
                Some(d) => {
                    let e = segment_known_denominator_with(draws, seg, d as f64, basis)?;
                    push(&mut out, seg, &e);
                    if let Some(c) = correct(&e, false)? {
                        push(&mut out, seg, &c);
                    }
                }
                None => warnings.push(format!("segment `{seg}` has no logged impressions; known-denominator estimate skipped")),
            }
        }
    }
    Ok((out, warnings))
}
