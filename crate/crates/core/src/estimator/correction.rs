use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::PrevalenceEstimate;

/// Labeler sensitivity `r` and false-positive rate `f` with their standard
/// errors, as measured on a validation or gold set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelerQuality {
    pub sensitivity: f64,
    pub false_positive_rate: f64,
    #[serde(default)]
    pub sensitivity_se: f64,
    #[serde(default)]
    pub false_positive_rate_se: f64,
}

impl LabelerQuality {
    pub fn new(sensitivity: f64, false_positive_rate: f64) -> Result<Self> {
        Self::with_standard_errors(sensitivity, false_positive_rate, 0.0, 0.0)
    }

    pub fn with_standard_errors(
        sensitivity: f64,
        false_positive_rate: f64,
        sensitivity_se: f64,
        false_positive_rate_se: f64,
    ) -> Result<Self> {
        let q = Self {
            sensitivity,
            false_positive_rate,
            sensitivity_se,
            false_positive_rate_se,
        };
        q.check()?;
        Ok(q)
    }

    fn check(&self) -> Result<()> {
        if !(self.sensitivity > 0.0 && self.sensitivity <= 1.0) {
            return Err(Error::param("sensitivity", format!("{} outside (0, 1]", self.sensitivity)));
        }
        if !(self.false_positive_rate >= 0.0 && self.false_positive_rate < 1.0) {
            return Err(Error::param(
                "false_positive_rate",
                format!("{} outside [0, 1)", self.false_positive_rate),
            ));
        }
        if !(self.sensitivity_se >= 0.0 && self.false_positive_rate_se >= 0.0) {
            return Err(Error::param("standard_error", "must be nonnegative"));
        }
        if self.sensitivity <= self.false_positive_rate {
            return Err(Error::CorrectionUndefined {
                sensitivity: self.sensitivity,
                false_positive_rate: self.false_positive_rate,
            });
        }
        Ok(())
    }
}

/// Rogan-Gladen correction `(theta_L - f) / (r - f)`.
///
/// The variance adds the sampling variance and the validation uncertainty
/// of `(r, f)` by the delta method, treating `theta_L`, `r` and `f` as
/// independent (the validation set must be disjoint from the daily sample).
/// A corrected point outside [0, 1] is clamped and flagged `rg_clamped`.
pub fn rogan_gladen_correct(
    estimate: &PrevalenceEstimate,
    quality: &LabelerQuality,
) -> Result<PrevalenceEstimate> {
    quality.check()?;
    let r = quality.sensitivity;
    let f = quality.false_positive_rate;
    let d = r - f;
    let theta_l = estimate.theta_hat;

    let raw = (theta_l - f) / d;
    let theta = raw.clamp(0.0, 1.0);

    let d_theta = 1.0 / d;
    let d_r = -(theta_l - f) / (d * d);
    let d_f = (theta_l - r) / (d * d);
    let variance = estimate.variance.map(|v| {
        d_theta * d_theta * v
            + d_r * d_r * quality.sensitivity_se.powi(2)
            + d_f * d_f * quality.false_positive_rate_se.powi(2)
    });

    let mut out = estimate.clone();
    out.theta_hat = theta;
    out.variance = variance;
    out.flags.rg_corrected = true;
    out.flags.rg_clamped = raw != theta;
    out.set_interval();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{EstimateFlags, EstimatorKind};

    fn est(theta: f64, variance: f64) -> PrevalenceEstimate {
        let mut e = PrevalenceEstimate {
            kind: EstimatorKind::HhRatio,
            theta_hat: theta,
            variance: Some(variance),
            ci_low: 0.0,
            ci_high: 0.0,
            raw_ci_low: 0.0,
            raw_ci_high: 0.0,
            ess: 100.0,
            sample_positive_rate: theta,
            n_draws: 100,
            abstentions: 0,
            numerator: theta,
            denominator: 1.0,
            flags: EstimateFlags::default(),
        };
        e.set_interval();
        e
    }

    #[test]
    fn perfect_labeler_is_identity() {
        let e = est(0.3, 1e-4);
        let c = rogan_gladen_correct(&e, &LabelerQuality::new(1.0, 0.0).unwrap()).unwrap();
        assert_eq!(c.theta_hat, 0.3);
        assert_eq!(c.variance, e.variance);
        assert!(c.flags.rg_corrected && !c.flags.rg_clamped);
    }

    #[test]
    fn all_false_positives_corrects_to_zero() {
        let c = rogan_gladen_correct(&est(0.05, 1e-5), &LabelerQuality::new(0.9, 0.05).unwrap())
            .unwrap();
        assert_eq!(c.theta_hat, 0.0);
    }

    #[test]
    fn direct_evaluation() {
        let c = rogan_gladen_correct(&est(0.02, 0.0), &LabelerQuality::new(0.9, 0.01).unwrap())
            .unwrap();
        assert!((c.theta_hat - 0.01 / 0.89).abs() < 1e-15);
        assert!((c.theta_hat - 0.011236).abs() < 1e-6);
    }

    #[test]
    fn below_false_positive_rate_is_clamped() {
        let c = rogan_gladen_correct(&est(0.01, 1e-6), &LabelerQuality::new(0.9, 0.05).unwrap())
            .unwrap();
        assert_eq!(c.theta_hat, 0.0);
        assert!(c.flags.rg_clamped);
    }

    #[test]
    fn undefined_when_sensitivity_not_above_fpr() {
        assert!(matches!(
            LabelerQuality::new(0.3, 0.3),
            Err(Error::CorrectionUndefined { .. })
        ));
        let bad = LabelerQuality {
            sensitivity: 0.2,
            false_positive_rate: 0.4,
            sensitivity_se: 0.0,
            false_positive_rate_se: 0.0,
        };
        assert!(rogan_gladen_correct(&est(0.1, 0.0), &bad).is_err());
    }

    #[test]
    fn delta_method_variance_against_finite_differences() {
        let (tl, r, f) = (0.08, 0.85, 0.03);
        let (v, sr, sf) = (2e-5, 0.02, 0.004);
        let q = LabelerQuality::with_standard_errors(r, f, sr, sf).unwrap();
        let c = rogan_gladen_correct(&est(tl, v), &q).unwrap();

        let g = |t: f64, r: f64, f: f64| (t - f) / (r - f);
        let h = 1e-6;
        let dt = (g(tl + h, r, f) - g(tl - h, r, f)) / (2.0 * h);
        let dr = (g(tl, r + h, f) - g(tl, r - h, f)) / (2.0 * h);
        let df = (g(tl, r, f + h) - g(tl, r, f - h)) / (2.0 * h);
        let expected = dt * dt * v + dr * dr * sr * sr + df * df * sf * sf;
        assert!((c.variance.unwrap() - expected).abs() < 1e-9 * expected);
    }
}
