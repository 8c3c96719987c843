use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;
use crate::sampler::ContentRecord;

/// Sampling design.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Without replacement via a weighted reservoir (one pass).
    Ppswor,
    /// With replacement, multinomial draws (two passes).
    Ppswr,
}

/// How missing auxiliary scores are filled in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreImputation {
    DayMedian,
    Fixed(f64),
}

impl Default for ScoreImputation {
    fn default() -> Self {
        ScoreImputation::DayMedian
    }
}

/// Parameters of the weight `C^nu * (s^gamma + epsilon)` and the draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub sample_size: usize,
    #[serde(default = "default_exponent")]
    pub nu: f64,
    #[serde(default = "default_exponent")]
    pub gamma: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub score_imputation: ScoreImputation,
}

fn default_exponent() -> f64 {
    1.0
}

/// Floor added to the transformed score so zero-score units stay in frame.
pub const DEFAULT_EPSILON: f64 = 1e-6;

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_scheme() -> Scheme {
    Scheme::Ppswor
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            sample_size: 1000,
            nu: 1.0,
            gamma: 1.0,
            epsilon: DEFAULT_EPSILON,
            scheme: Scheme::Ppswor,
            seed: 0,
            score_imputation: ScoreImputation::DayMedian,
        }
    }
}

impl SamplingConfig {
    /// Every range violation, as (field, message) pairs.
    pub fn issues(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if self.sample_size == 0 {
            out.push(("sample_size", "must be at least 1".to_string()));
        }
        if !(self.nu.is_finite() && self.nu >= 0.0) {
            out.push(("nu", format!("must be a finite value >= 0, got {}", self.nu)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            out.push(("gamma", format!("must be a finite value >= 0, got {}", self.gamma)));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            out.push((
                "epsilon",
                format!(
                    "must be > 0 so every in-frame unit keeps a positive weight, got {}",
                    self.epsilon
                ),
            ));
        }
        if let ScoreImputation::Fixed(v) = self.score_imputation {
            if !(v > 0.0 && v <= 1.0) {
                out.push(("score_imputation", format!("fixed value {v} outside (0, 1]")));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.issues().into_iter().next() {
            None => Ok(()),
            Some((name, reason)) => Err(Error::InvalidParameter { name, reason }),
        }
    }
}

/// Sampling weight `C^nu * (s^gamma + epsilon)`.
///
/// `fallback_score` is used when the record has no score of its own.
pub fn compute_weight(
    record: &ContentRecord,
    config: &SamplingConfig,
    fallback_score: f64,
) -> Result<f64> {
    if record.impressions == 0 {
        return Err(Error::InvalidRecord {
            content_id: record.content_id.clone(),
            reason: "zero impressions (unit is out of frame)".into(),
        });
    }
    let score = record.score.unwrap_or(fallback_score);
    if !(score > 0.0) {
        return Err(Error::InvalidRecord {
            content_id: record.content_id.clone(),
            reason: format!("score {score} must be positive"),
        });
    }
    let weight = weight_from_parts(record.impressions as f64, score, config.nu, config.gamma, config.epsilon);
    if weight.is_finite() && weight > 0.0 {
        Ok(weight)
    } else {
        Err(Error::NonFiniteWeight {
            content_id: record.content_id.clone(),
            weight,
        })
    }
}

#[inline]
pub(crate) fn weight_from_parts(impressions: f64, score: f64, nu: f64, gamma: f64, epsilon: f64) -> f64 {
    impressions.powf(nu) * (score.powf(gamma) + epsilon)
}

impl ScoreImputation {
    /// Resolves the value assigned to units without a score, given the
    /// scores that are present for the day.
    pub fn resolve<I: IntoIterator<Item = f64>>(&self, present_scores: I) -> Result<f64> {
        match *self {
            ScoreImputation::Fixed(v) => {
                if v > 0.0 && v <= 1.0 {
                    Ok(v)
                } else {
                    Err(Error::param("score_imputation", format!("fixed value {v} outside (0, 1]")))
                }
            }
            ScoreImputation::DayMedian => {
                let mut scores: Vec<f64> = present_scores.into_iter().collect();
                numeric::median(&mut scores).ok_or(Error::NoScoresForImputation)
            }
        }
    }
}

/// Effective score of every record: its own score if present, otherwise the
/// imputed value under `policy`.
pub fn impute_scores(records: &[ContentRecord], policy: ScoreImputation) -> Result<Vec<f64>> {
    if records.iter().all(|r| r.score.is_some()) {
        return Ok(records.iter().map(|r| r.score.unwrap_or_default()).collect());
    }
    let fallback = policy.resolve(records.iter().filter_map(|r| r.score))?;
    Ok(records.iter().map(|r| r.score.unwrap_or(fallback)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(nu: f64, gamma: f64) -> SamplingConfig {
        SamplingConfig {
            nu,
            gamma,
            ..SamplingConfig::default()
        }
    }

    #[test]
    fn weight_direct_evaluation() {
        let rec = ContentRecord::new("a", 10).with_score(0.5);
        let w = compute_weight(&rec, &cfg(1.0, 1.0), 0.5).unwrap();
        assert!((w - 5.00001).abs() < 1e-12);
    }

    #[test]
    fn uniform_regime() {
        let rec = ContentRecord::new("a", 7).with_score(0.3);
        let w = compute_weight(&rec, &cfg(0.0, 0.0), 0.5).unwrap();
        assert_eq!(w, 1.0 + 1e-6);
    }

    #[test]
    fn impression_pps_regime() {
        let rec = ContentRecord::new("a", 12).with_score(0.9);
        let w = compute_weight(&rec, &cfg(1.0, 0.0), 0.5).unwrap();
        assert_eq!(w, 12.0 * (1.0 + 1e-6));
    }

    #[test]
    fn fallback_score_used_when_missing() {
        let rec = ContentRecord::new("a", 4);
        let w = compute_weight(&rec, &cfg(1.0, 1.0), 0.25).unwrap();
        assert!((w - 4.0 * (0.25 + 1e-6)).abs() < 1e-15);
    }

    #[test]
    fn overflow_is_rejected_with_content_id() {
        let rec = ContentRecord::new("huge", u64::MAX).with_score(0.5);
        match compute_weight(&rec, &cfg(40.0, 1.0), 0.5) {
            Err(Error::NonFiniteWeight { content_id, .. }) => assert_eq!(content_id, "huge"),
            other => panic!("expected non-finite weight error, got {other:?}"),
        }
    }

    #[test]
    fn median_imputation() {
        let recs = vec![
            ContentRecord::new("a", 1).with_score(0.2),
            ContentRecord::new("b", 1).with_score(0.4),
            ContentRecord::new("c", 1),
        ];
        let s = impute_scores(&recs, ScoreImputation::DayMedian).unwrap();
        assert_eq!(s[0], 0.2);
        assert_eq!(s[1], 0.4);
        assert!((s[2] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn fixed_imputation() {
        let recs = vec![
            ContentRecord::new("a", 1).with_score(0.5),
            ContentRecord::new("b", 1),
        ];
        let s = impute_scores(&recs, ScoreImputation::Fixed(0.1)).unwrap();
        assert_eq!(s, vec![0.5, 0.1]);
    }

    #[test]
    fn median_imputation_without_scores_fails() {
        let recs = vec![ContentRecord::new("a", 1), ContentRecord::new("b", 2)];
        assert!(matches!(
            impute_scores(&recs, ScoreImputation::DayMedian),
            Err(Error::NoScoresForImputation)
        ));
    }

    #[test]
    fn config_issues_cover_every_field() {
        let bad = SamplingConfig {
            sample_size: 0,
            nu: -1.0,
            gamma: f64::NAN,
            epsilon: 0.0,
            score_imputation: ScoreImputation::Fixed(0.0),
            ..SamplingConfig::default()
        };
        let fields: Vec<_> = bad.issues().into_iter().map(|(f, _)| f).collect();
        assert_eq!(fields, ["sample_size", "nu", "gamma", "epsilon", "score_imputation"]);
    }

    #[test]
    fn imputation_serde_forms() {
        #[derive(Deserialize)]
        struct W {
            p: ScoreImputation,
        }
        let a: W = toml::from_str("p = \"day_median\"").unwrap();
        assert_eq!(a.p, ScoreImputation::DayMedian);
        let b: W = toml::from_str("p = { fixed = 0.1 }").unwrap();
        assert_eq!(b.p, ScoreImputation::Fixed(0.1));
    }
}
