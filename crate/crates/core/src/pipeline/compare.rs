use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_segment, PrevalenceEstimate, ALL_SEGMENTS};
use crate::labeling::{label_sample, LabelProvider};
use crate::pipeline::config::ValidatedConfig;
use crate::pipeline::ingest::{read_scores, ImpressionLog, RecordSource, Rescored};
use crate::pipeline::run::build_provider;
use crate::pipeline::sample::{draw_daily_sample, sampling_for_day};
use crate::sampler::{ContentRecord, SamplingConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoringSummary {
    pub name: String,
    pub theta_hat: f64,
    pub variance: Option<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_width: f64,
    pub ess: f64,
    pub sample_positive_rate: f64,
    pub sample_id: String,
}

impl ScoringSummary {
    fn new(name: &str, e: &PrevalenceEstimate, sample_id: String) -> Self {
        Self {
            name: name.to_string(),
            theta_hat: e.theta_hat,
            variance: e.variance,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            ci_width: e.ci_width(),
            ess: e.ess,
            sample_positive_rate: e.sample_positive_rate,
            sample_id,
        }
    }
}

/// Whether two point estimates agree under the combined-variance test
/// `|a - b| <= z sqrt(var_a + var_b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub difference: f64,
    pub combined_se: f64,
    pub agree: bool,
    /// CI width of the second over the first.
    pub ci_width_ratio: f64,
}

fn agreement_of(a: &ScoringSummary, b: &ScoringSummary, z: f64) -> Result<Agreement> {
    let (Some(va), Some(vb)) = (a.variance, b.variance) else {
        return Err(Error::VarianceUnavailable("score comparison needs at least two draws per sample".into()));
    };
    let difference = b.theta_hat - a.theta_hat;
    let combined_se = (va + vb).sqrt();
    Ok(Agreement {
        difference,
        combined_se,
        agree: difference.abs() <= z * combined_se,
        ci_width_ratio: b.ci_width / a.ci_width,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreConsistencyReport {
    pub z: f64,
    pub previous: ScoringSummary,
    pub candidate: ScoringSummary,
    pub agreement: Agreement,
    /// Score-free design (score exponent 0) against the previous scores.
    pub impressions_only: Option<(ScoringSummary, Agreement)>,
}

fn estimate_under(
    source: &dyn RecordSource,
    sampling: &SamplingConfig,
    provider: &dyn LabelProvider,
    name: &str,
) -> Result<ScoringSummary> {
    let sample = draw_daily_sample(source, sampling)?;
    let labeled = label_sample(sample.draws, provider)?;
    let est = estimate_segment(&labeled.draws, ALL_SEGMENTS, sample.meta.basis())?;
    Ok(ScoringSummary::new(name, &est, sample.meta.sample_id))
}

fn uncovered(ids: &[&str], scores: &HashMap<String, f64>) -> Vec<String> {
    let mut missing: Vec<String> = ids
        .iter()
        .filter(|id| !scores.contains_key(**id))
        .map(|id| id.to_string())
        .collect();
    missing.sort();
    missing
}

/// Samples and estimates the same population under two score versions
/// with the same seed and labeler.
pub fn compare_scorings(
    records: &[ContentRecord],
    previous: &HashMap<String, f64>,
    candidate: &HashMap<String, f64>,
    sampling: &SamplingConfig,
    provider: &dyn LabelProvider,
    z: f64,
    include_impressions_only: bool,
) -> Result<ScoreConsistencyReport> {
    if !(z > 0.0) {
        return Err(Error::param("z", "must be positive"));
    }
    let ids: Vec<&str> = records.iter().map(|r| r.content_id.as_str()).collect();
    let mut missing = uncovered(&ids, previous);
    missing.extend(uncovered(&ids, candidate));
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(Error::MissingScores(missing));
    }
    let a = estimate_under(&Rescored { records, scores: previous }, sampling, provider, "previous")?;
    let b = estimate_under(&Rescored { records, scores: candidate }, sampling, provider, "candidate")?;
    let agreement = agreement_of(&a, &b, z)?;
    let impressions_only = if include_impressions_only {
        let flat = SamplingConfig {
            gamma: 0.0,
            ..sampling.clone()
        };
        let u = estimate_under(&Rescored { records, scores: previous }, &flat, provider, "impressions_only")?;
        let ag = agreement_of(&a, &u, z)?;
        Some((u, ag))
    } else {
        None
    };
    Ok(ScoreConsistencyReport {
        z,
        previous: a,
        candidate: b,
        agreement,
        impressions_only,
    })
}

/// Runs the configured day under two score files.
pub fn compare_score_versions(
    cfg: &ValidatedConfig,
    day: NaiveDate,
    previous_scores: &Path,
    candidate_scores: &Path,
    z: f64,
    include_impressions_only: bool,
) -> Result<ScoreConsistencyReport> {
    let log = ImpressionLog::new(cfg.impressions_path(day));
    log.check(cfg.ingest.max_error_rate)?;
    let mut records = Vec::new();
    log.for_each_record(&mut |r| {
        records.push(r);
        Ok(())
    })?;
    let provider = build_provider(cfg, day)?;
    compare_scorings(
        &records,
        &read_scores(previous_scores)?,
        &read_scores(candidate_scores)?,
        &sampling_for_day(&cfg.sampling, day),
        provider.as_ref(),
        z,
        include_impressions_only,
    )
}
