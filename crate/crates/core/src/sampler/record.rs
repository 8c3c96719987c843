use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// One content unit's daily exposure as read from the impression log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContentRecord {
    pub content_id: String,
    pub impressions: u64,
    /// Impressions attributable to each segment. When present the counts
    /// sum to `impressions`.
    #[serde(
        default,
        rename = "segments",
        skip_serializing_if = "BTreeMap::is_empty"
    )]
    pub segment_impressions: BTreeMap<String, u64>,
    /// Auxiliary model risk score in (0, 1].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl ContentRecord {
    pub fn new(content_id: impl Into<String>, impressions: u64) -> Self {
        Self {
            content_id: content_id.into(),
            impressions,
            segment_impressions: BTreeMap::new(),
            score: None,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    pub fn with_segments<I, K>(mut self, segments: I) -> Self
    where
        I: IntoIterator<Item = (K, u64)>,
        K: Into<String>,
    {
        self.segment_impressions = segments.into_iter().map(|(k, v)| (k.into(), v)).collect();
        self
    }

    /// Checks the record invariants for an in-frame unit.
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidRecord {
            content_id: self.content_id.clone(),
            reason,
        };
        if self.content_id.is_empty() {
            return Err(invalid("empty content_id".into()));
        }
        if self.impressions == 0 {
            return Err(invalid("zero impressions (unit is out of frame)".into()));
        }
        if !self.segment_impressions.is_empty() {
            let total: u64 = self.segment_impressions.values().sum();
            if total != self.impressions {
                return Err(invalid(format!(
                    "segment impressions sum to {total}, expected {}",
                    self.impressions
                )));
            }
        }
        if let Some(s) = self.score {
            if !(s > 0.0 && s <= 1.0) {
                return Err(invalid(format!("score {s} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// A label attached to a sampled unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
    /// The labeler declined to decide; excluded from estimation.
    Abstain,
}

impl Label {
    pub fn from_bool(violating: bool) -> Self {
        if violating {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    /// `Some(1.0)` / `Some(0.0)` for decided labels, `None` for abstentions.
    pub fn indicator(self) -> Option<f64> {
        match self {
            Label::Positive => Some(1.0),
            Label::Negative => Some(0.0),
            Label::Abstain => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Positive => f.write_str("1"),
            Label::Negative => f.write_str("0"),
            Label::Abstain => f.write_str("abstain"),
        }
    }
}

// Wire form: 1 / 0 for decided labels (booleans accepted on input),
// the string "abstain" for abstentions.
impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Label::Positive => serializer.serialize_u8(1),
            Label::Negative => serializer.serialize_u8(0),
            Label::Abstain => serializer.serialize_str("abstain"),
        }
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u8),
            Bool(bool),
            Str(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Int(1) | Repr::Bool(true) => Ok(Label::Positive),
            Repr::Int(0) | Repr::Bool(false) => Ok(Label::Negative),
            Repr::Str(s) if s == "abstain" => Ok(Label::Abstain),
            Repr::Str(s) if s == "1" => Ok(Label::Positive),
            Repr::Str(s) if s == "0" => Ok(Label::Negative),
            Repr::Int(v) => Err(de::Error::custom(format!("label must be 0 or 1, got {v}"))),
            Repr::Str(s) => Err(de::Error::custom(format!("unknown label `{s}`"))),
        }
    }
}

/// A sampled unit together with everything the estimator needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleDraw {
    pub content_id: String,
    pub impressions: u64,
    #[serde(
        default,
        rename = "segments",
        skip_serializing_if = "BTreeMap::is_empty"
    )]
    pub segment_impressions: BTreeMap<String, u64>,
    #[serde(default)]
    pub label: Option<Label>,
    /// Single-draw selection probability `w / sum(w)`.
    pub draw_probability: f64,
    /// Approximate without-replacement inclusion probability.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inclusion_probability: Option<f64>,
    pub weight: f64,
}

impl SampleDraw {
    pub fn from_record(record: &ContentRecord, weight: f64, draw_probability: f64) -> Self {
        Self {
            content_id: record.content_id.clone(),
            impressions: record.impressions,
            segment_impressions: record.segment_impressions.clone(),
            label: None,
            draw_probability,
            inclusion_probability: None,
            weight,
        }
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    /// Impressions of this draw attributable to `segment`; zero when absent.
    pub fn segment_impressions(&self, segment: &str) -> u64 {
        self.segment_impressions.get(segment).copied().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_sum_must_match_total() {
        let ok = ContentRecord::new("a", 5).with_segments([("hf", 3), ("search", 2)]);
        assert!(ok.validate().is_ok());
        let bad = ContentRecord::new("a", 5).with_segments([("hf", 3)]);
        assert!(matches!(bad.validate(), Err(Error::InvalidRecord { .. })));
    }

    #[test]
    fn zero_impressions_are_out_of_frame() {
        assert!(ContentRecord::new("a", 0).validate().is_err());
    }

    #[test]
    fn score_range() {
        assert!(ContentRecord::new("a", 1).with_score(1.0).validate().is_ok());
        assert!(ContentRecord::new("a", 1).with_score(0.0).validate().is_err());
        assert!(ContentRecord::new("a", 1).with_score(1.2).validate().is_err());
    }

    #[test]
    fn impression_log_field_names() {
        let line = r#"{"content_id":"pin-1","impressions":12,"segments":{"homefeed":10,"search":2},"score":0.25}"#;
        let rec: ContentRecord = serde_json::from_str(line).unwrap();
        assert_eq!(rec.impressions, 12);
        assert_eq!(rec.segment_impressions["search"], 2);
        assert_eq!(serde_json::to_string(&rec).unwrap(), line);

        let bare: ContentRecord =
            serde_json::from_str(r#"{"content_id":"x","impressions":1}"#).unwrap();
        assert!(bare.score.is_none() && bare.segment_impressions.is_empty());
        assert!(serde_json::from_str::<ContentRecord>(
            r#"{"content_id":"x","impressions":1,"clicks":3}"#
        )
        .is_err());
    }

    #[test]
    fn label_wire_form() {
        let labels: Vec<Label> = serde_json::from_str(r#"[1, 0, true, false, "abstain"]"#).unwrap();
        assert_eq!(
            labels,
            vec![
                Label::Positive,
                Label::Negative,
                Label::Positive,
                Label::Negative,
                Label::Abstain
            ]
        );
        assert_eq!(
            serde_json::to_string(&[Label::Positive, Label::Negative, Label::Abstain]).unwrap(),
            r#"[1,0,"abstain"]"#
        );
        assert!(serde_json::from_str::<Label>("2").is_err());
    }
}
