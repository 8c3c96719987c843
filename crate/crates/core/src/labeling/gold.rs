use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::LabelerQuality;
use crate::jsonl;
use crate::sampler::Label;

/// One gold-set row: SME truth next to the labeler's prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldRow {
    pub content_id: String,
    pub truth: Label,
    pub prediction: Label,
}

pub fn read_gold_set(path: &Path) -> Result<Vec<GoldRow>> {
    jsonl::read(path)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positives: u64,
    pub false_positives: u64,
    pub true_negatives: u64,
    pub false_negatives: u64,
}

impl ConfusionMatrix {
    pub fn n(&self) -> u64 {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }

    pub fn record(&mut self, prediction: bool, truth: bool) {
        match (prediction, truth) {
            (true, true) => self.true_positives += 1,
            (true, false) => self.false_positives += 1,
            (false, false) => self.true_negatives += 1,
            (false, true) => self.false_negatives += 1,
        }
    }
}

/// A proportion `k / n` with its normal-approximation binomial standard
/// error; `None` when `n = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub value: f64,
    pub se: f64,
    pub denominator: u64,
}

impl Rate {
    fn of(k: u64, n: u64) -> Option<Rate> {
        (n > 0).then(|| {
            let value = k as f64 / n as f64;
            Rate {
                value,
                se: (value * (1.0 - value) / n as f64).sqrt(),
                denominator: n,
            }
        })
    }
}

/// Decision quality on a gold set. Undefined rates are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldSetReport {
    pub n: u64,
    pub confusion: ConfusionMatrix,
    pub accuracy: Rate,
    pub precision: Option<Rate>,
    /// Sensitivity `r`.
    pub recall: Option<Rate>,
    pub f1: Option<f64>,
    /// `f = FP / (FP + TN)`.
    pub false_positive_rate: Option<Rate>,
    /// Rows where the labeler abstained; not part of the confusion matrix.
    #[serde(default)]
    pub abstentions: u64,
}

impl GoldSetReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Result<Self> {
        let c = confusion;
        let n = c.n();
        let accuracy = Rate::of(c.true_positives + c.true_negatives, n)
            .ok_or_else(|| Error::InsufficientData("gold set is empty".into()))?;
        let precision = Rate::of(c.true_positives, c.true_positives + c.false_positives);
        let recall = Rate::of(c.true_positives, c.true_positives + c.false_negatives);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p.value + r.value > 0.0 => {
                Some(2.0 * p.value * r.value / (p.value + r.value))
            }
            _ => None,
        };
        Ok(Self {
            n,
            confusion: c,
            accuracy,
            precision,
            recall,
            f1,
            false_positive_rate: Rate::of(c.false_positives, c.false_positives + c.true_negatives),
            abstentions: 0,
        })
    }

    /// Labeler `(r, f)` with standard errors for the label-error correction.
    pub fn labeler_quality(&self) -> Result<LabelerQuality> {
        let r = self
            .recall
            .ok_or_else(|| Error::InsufficientData("insufficient gold positives: recall undefined".into()))?;
        let f = self.false_positive_rate.ok_or_else(|| {
            Error::InsufficientData("insufficient gold negatives: false-positive rate undefined".into())
        })?;
        LabelerQuality::with_standard_errors(r.value, f.value, r.se, f.se)
    }
}

/// Builds the report from paired predictions and truths.
pub fn evaluate_gold_set(predictions: &[bool], truths: &[bool]) -> Result<GoldSetReport> {
    if predictions.len() != truths.len() {
        return Err(Error::param(
            "predictions",
            format!("{} predictions for {} truths", predictions.len(), truths.len()),
        ));
    }
    if predictions.is_empty() {
        return Err(Error::InsufficientData("gold set is empty".into()));
    }
    let mut c = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(truths) {
        c.record(p, t);
    }
    GoldSetReport::from_confusion(c)
}

/// Report from gold rows; abstained predictions are counted separately.
pub fn evaluate_gold_rows(rows: &[GoldRow]) -> Result<GoldSetReport> {
    let mut c = ConfusionMatrix::default();
    let mut abstentions = 0;
    for row in rows {
        let truth = match row.truth {
            Label::Positive => true,
            Label::Negative => false,
            Label::Abstain => {
                return Err(Error::InvalidRecord {
                    content_id: row.content_id.clone(),
                    reason: "gold truth cannot be an abstention".into(),
                })
            }
        };
        match row.prediction {
            Label::Positive => c.record(true, truth),
            Label::Negative => c.record(false, truth),
            Label::Abstain => abstentions += 1,
        }
    }
    let mut report = GoldSetReport::from_confusion(c)?;
    report.abstentions = abstentions;
    Ok(report)
}

/// Minimum decision-quality bar. Unset fields are not checked.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityThresholds {
    #[serde(default)]
    pub min_accuracy: Option<f64>,
    #[serde(default)]
    pub min_precision: Option<f64>,
    #[serde(default)]
    pub min_recall: Option<f64>,
    #[serde(default)]
    pub min_f1: Option<f64>,
    #[serde(default)]
    pub max_false_positive_rate: Option<f64>,
    #[serde(default)]
    pub min_gold_size: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub pass: bool,
    pub reasons: Vec<String>,
}

/// Checks a report against the thresholds, listing every violation.
/// Undefined recall always fails: the correction needs a sensitivity.
pub fn quality_gate(report: &GoldSetReport, thresholds: &QualityThresholds) -> GateDecision {
    let mut reasons = Vec::new();
    if report.recall.is_none() {
        reasons.push("insufficient gold positives: recall undefined".to_string());
    }
    if let Some(min) = thresholds.min_gold_size {
        if report.n < min {
            reasons.push(format!("gold size {} below minimum {min}", report.n));
        }
    }
    let mut at_least = |name: &str, value: Option<f64>, min: Option<f64>| {
        if let Some(min) = min {
            match value {
                Some(v) if v >= min => {}
                Some(v) => reasons.push(format!("{name} {v:.6} below minimum {min}")),
                None if name == "recall" => {}
                None => reasons.push(format!("{name} undefined (minimum {min})")),
            }
        }
    };
    at_least("accuracy", Some(report.accuracy.value), thresholds.min_accuracy);
    at_least("precision", report.precision.map(|r| r.value), thresholds.min_precision);
    at_least("recall", report.recall.map(|r| r.value), thresholds.min_recall);
    at_least("f1", report.f1, thresholds.min_f1);
    if let Some(max) = thresholds.max_false_positive_rate {
        match report.false_positive_rate {
            Some(f) if f.value <= max => {}
            Some(f) => reasons.push(format!("false_positive_rate {:.6} above maximum {max}", f.value)),
            None => reasons.push("insufficient gold negatives: false_positive_rate undefined".to_string()),
        }
    }
    GateDecision {
        pass: reasons.is_empty(),
        reasons,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(tp: u64, fn_: u64, fp: u64, tn: u64) -> ConfusionMatrix {
        ConfusionMatrix {
            true_positives: tp,
            false_positives: fp,
            true_negatives: tn,
            false_negatives: fn_,
        }
    }

    #[test]
    fn identity_predictions() {
        let t = [true, false, true, false, false];
        let r = evaluate_gold_set(&t, &t).unwrap();
        assert_eq!(r.accuracy.value, 1.0);
        assert_eq!(r.f1, Some(1.0));
        assert_eq!(r.false_positive_rate.unwrap().value, 0.0);
    }

    #[test]
    fn complement_predictions() {
        let t = [true, false, true, false];
        let p: Vec<bool> = t.iter().map(|v| !v).collect();
        assert_eq!(evaluate_gold_set(&p, &t).unwrap().accuracy.value, 0.0);
    }

    #[test]
    fn confusion_arithmetic() {
        let r = GoldSetReport::from_confusion(cm(8, 2, 1, 89)).unwrap();
        assert_eq!(r.n, 100);
        assert!((r.recall.unwrap().value - 0.8).abs() < 1e-15);
        assert!((r.false_positive_rate.unwrap().value - 1.0 / 90.0).abs() < 1e-15);
        assert!((r.false_positive_rate.unwrap().value - 0.011).abs() < 0.0005);
        assert!((r.accuracy.value - 0.97).abs() < 1e-15);
        assert!((r.precision.unwrap().value - 0.889).abs() < 0.0005);
        assert!((r.f1.unwrap() - 0.842).abs() < 0.0005);
        let se = r.recall.unwrap().se;
        assert!((se - (0.8f64 * 0.2 / 10.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn recall_undefined_without_positives() {
        let r = evaluate_gold_set(&[false, true], &[false, false]).unwrap();
        assert!(r.recall.is_none());
        assert!(r.f1.is_none());
        let g = quality_gate(&r, &QualityThresholds::default());
        assert!(!g.pass);
        assert!(g.reasons[0].contains("insufficient gold positives"));
        assert!(r.labeler_quality().is_err());
    }

    #[test]
    fn gate_boundaries() {
        let r = GoldSetReport::from_confusion(cm(90, 10, 5, 95)).unwrap();
        let f1 = r.f1.unwrap();
        let ok = QualityThresholds {
            min_accuracy: Some(0.9),
            min_f1: Some(f1),
            max_false_positive_rate: Some(0.05),
            ..Default::default()
        };
        assert!(quality_gate(&r, &ok).pass);
        let tight = QualityThresholds {
            min_f1: Some(f1 + 0.001),
            ..ok.clone()
        };
        let g = quality_gate(&r, &tight);
        assert!(!g.pass);
        assert_eq!(g.reasons.len(), 1);
        assert!(g.reasons[0].starts_with("f1"));
    }

    #[test]
    fn report_recomputes_from_persisted_confusion() {
        let r = evaluate_gold_set(&[true, true, false, false, true], &[true, false, false, true, true]).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: GoldSetReport = serde_json::from_str(&json).unwrap();
        assert_eq!(GoldSetReport::from_confusion(back.confusion).unwrap(), r);
        assert_eq!(back.confusion.n(), back.n);
    }

    #[test]
    fn rows_with_abstentions() {
        let row = |id: &str, t, p| GoldRow {
            content_id: id.into(),
            truth: t,
            prediction: p,
        };
        let r = evaluate_gold_rows(&[
            row("a", Label::Positive, Label::Positive),
            row("b", Label::Negative, Label::Abstain),
            row("c", Label::Negative, Label::Negative),
        ])
        .unwrap();
        assert_eq!(r.n, 2);
        assert_eq!(r.abstentions, 1);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(evaluate_gold_set(&[true], &[true, false]).is_err());
        assert!(evaluate_gold_set(&[], &[]).is_err());
    }
}
