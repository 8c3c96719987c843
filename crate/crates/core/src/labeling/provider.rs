use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::sampler::{ItemUniforms, Label, SampleDraw};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// Labels equal the known ground truth.
    SyntheticOracle,
    /// Labels joined from a delivered label file.
    FileJoin,
    /// In-process stand-in for a remote labeler with configurable error rates.
    MockRemote,
}

impl std::fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProviderKind::SyntheticOracle => "synthetic_oracle",
            ProviderKind::FileJoin => "file_join",
            ProviderKind::MockRemote => "mock_remote",
        })
    }
}

/// Opaque per-call accounting from a provider (tokens, cost, ...),
/// summed over a run and recorded in lineage without interpretation.
pub type Usage = BTreeMap<String, f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelOutput {
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub usage: Usage,
}

/// Source of a label (or abstention) per content unit.
pub trait LabelProvider: Sync {
    fn kind(&self) -> ProviderKind;
    fn version_id(&self) -> &str;
    /// `None` when the provider has nothing for this id.
    fn label(&self, content_id: &str) -> Option<LabelOutput>;
    /// Simulated per-call latency, reported as run metadata.
    fn simulated_latency_ms(&self) -> f64 {
        0.0
    }
}

/// One row of a label file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRow {
    pub content_id: String,
    pub label: Label,
    pub provider_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub usage: Usage,
}

#[derive(Clone, Debug)]
pub struct SyntheticOracle {
    truth: HashMap<String, bool>,
    version: String,
}

impl SyntheticOracle {
    pub fn new(truth: HashMap<String, bool>, version: impl Into<String>) -> Self {
        Self {
            truth,
            version: version.into(),
        }
    }
}

impl LabelProvider for SyntheticOracle {
    fn kind(&self) -> ProviderKind {
        ProviderKind::SyntheticOracle
    }
    fn version_id(&self) -> &str {
        &self.version
    }
    fn label(&self, content_id: &str) -> Option<LabelOutput> {
        self.truth.get(content_id).map(|&y| LabelOutput {
            label: Label::from_bool(y),
            confidence: Some(1.0),
            usage: Usage::new(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct FileJoin {
    labels: HashMap<String, LabelOutput>,
    version: String,
}

impl FileJoin {
    pub fn from_rows(rows: Vec<LabelRow>) -> Result<Self> {
        let versions: BTreeSet<&str> = rows.iter().map(|r| r.provider_version.as_str()).collect();
        let version = versions.into_iter().collect::<Vec<_>>().join("+");
        let mut labels = HashMap::with_capacity(rows.len());
        for row in rows {
            let out = LabelOutput {
                label: row.label,
                confidence: row.confidence,
                usage: row.usage,
            };
            if labels.insert(row.content_id.clone(), out).is_some() {
                return Err(Error::DuplicateContent(row.content_id));
            }
        }
        Ok(Self { labels, version })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_rows(jsonl::read(path)?)
    }

    /// Definite labels as ground truth (abstentions dropped).
    pub fn truth(&self) -> HashMap<String, bool> {
        self.labels
            .iter()
            .filter_map(|(id, o)| match o.label {
                Label::Positive => Some((id.clone(), true)),
                Label::Negative => Some((id.clone(), false)),
                Label::Abstain => None,
            })
            .collect()
    }
}

impl LabelProvider for FileJoin {
    fn kind(&self) -> ProviderKind {
        ProviderKind::FileJoin
    }
    fn version_id(&self) -> &str {
        &self.version
    }
    fn label(&self, content_id: &str) -> Option<LabelOutput> {
        self.labels.get(content_id).cloned()
    }
}

const FLIP_DOMAIN: u64 = 0x4d4f_434b_464c_4950;
const ABSTAIN_DOMAIN: u64 = 0x4d4f_434b_4142_5354;

/// Error rates of the mock labeler.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MockRemoteSpec {
    pub sensitivity: f64,
    pub false_positive_rate: f64,
    #[serde(default)]
    pub abstain_rate: f64,
    #[serde(default)]
    pub latency_ms: f64,
    pub seed: u64,
}

/// Labels ground truth through a noisy channel: positives are reported
/// positive with probability `sensitivity`, negatives with probability
/// `false_positive_rate`. Each item's outcome is a keyed hash of its id, so
/// labels do not depend on call order or concurrency.
#[derive(Clone, Debug)]
pub struct MockRemote {
    truth: HashMap<String, bool>,
    spec: MockRemoteSpec,
    version: String,
}

impl MockRemote {
    pub fn new(truth: HashMap<String, bool>, spec: MockRemoteSpec, version: impl Into<String>) -> Result<Self> {
        for (name, v) in [
            ("sensitivity", spec.sensitivity),
            ("false_positive_rate", spec.false_positive_rate),
            ("abstain_rate", spec.abstain_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, format!("{v} outside [0, 1]")));
            }
        }
        if !(spec.latency_ms >= 0.0) {
            return Err(Error::param("latency_ms", "must be >= 0"));
        }
        Ok(Self {
            truth,
            spec,
            version: version.into(),
        })
    }

    pub fn spec(&self) -> &MockRemoteSpec {
        &self.spec
    }

    /// What the labeler reports for an item with the given truth.
    pub fn noisy_label(&self, content_id: &str, truth: bool) -> Label {
        let abstain_u = ItemUniforms::with_domain(self.spec.seed, ABSTAIN_DOMAIN).uniform(content_id);
        if abstain_u <= self.spec.abstain_rate {
            return Label::Abstain;
        }
        let u = ItemUniforms::with_domain(self.spec.seed, FLIP_DOMAIN).uniform(content_id);
        let p_positive = if truth {
            self.spec.sensitivity
        } else {
            self.spec.false_positive_rate
        };
        Label::from_bool(u <= p_positive)
    }
}

impl LabelProvider for MockRemote {
    fn kind(&self) -> ProviderKind {
        ProviderKind::MockRemote
    }
    fn version_id(&self) -> &str {
        &self.version
    }
    fn label(&self, content_id: &str) -> Option<LabelOutput> {
        let truth = *self.truth.get(content_id)?;
        Some(LabelOutput {
            label: self.noisy_label(content_id, truth),
            confidence: None,
            usage: Usage::new(),
        })
    }
    fn simulated_latency_ms(&self) -> f64 {
        self.spec.latency_ms
    }
}

/// Draws with labels attached plus provider metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub draws: Vec<SampleDraw>,
    pub provider: ProviderKind,
    pub provider_version: String,
    pub abstentions: usize,
    /// Total simulated labeler latency if calls were made serially.
    pub simulated_latency_ms: f64,
    /// Provider usage summed over all calls.
    pub usage: Usage,
}

/// Labels every draw. Repeated draws of one unit share its label.
pub fn label_sample(draws: Vec<SampleDraw>, provider: &dyn LabelProvider) -> Result<LabeledSample> {
    let outputs: Vec<Option<LabelOutput>> = draws.par_iter().map(|d| provider.label(&d.content_id)).collect();
    let missing: BTreeSet<String> = draws
        .iter()
        .zip(&outputs)
        .filter(|(_, o)| o.is_none())
        .map(|(d, _)| d.content_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingLabels(missing.into_iter().collect()));
    }
    let n = draws.len();
    let mut usage = Usage::new();
    let labeled: Vec<SampleDraw> = draws
        .into_iter()
        .zip(outputs)
        .map(|(d, o)| {
            let o = o.expect("checked above");
            for (k, v) in o.usage {
                *usage.entry(k).or_default() += v;
            }
            d.with_label(o.label)
        })
        .collect();
    let abstentions = labeled.iter().filter(|d| d.label == Some(Label::Abstain)).count();
    Ok(LabeledSample {
        draws: labeled,
        provider: provider.kind(),
        provider_version: provider.version_id().to_string(),
        abstentions,
        simulated_latency_ms: provider.simulated_latency_ms() * n as f64,
        usage,
    })
}
