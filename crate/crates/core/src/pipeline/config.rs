//! Metric configuration: one TOML file per policy metric.
//!
//! Six facets are required: `[policy]`, `[sources]`, `[sampling]`,
//! `[labeler]`, `[quality]` and `[output]`. `[segments]`, `[correction]`,
//! `[alerting]` and `[ingest]` are optional. Unknown keys are rejected.
//! Relative paths resolve against the directory holding the config file;
//! source paths may contain a `{day}` placeholder (`YYYY-MM-DD`).

use std::fmt;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alerting::AlertRule;
use crate::error::{Error, Result};
use crate::estimator::ALL_SEGMENTS;
use crate::labeling::{MockRemoteSpec, ProviderKind, QualityThresholds};
use crate::sampler::SamplingConfig;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigIssue {
    pub facet: &'static str,
    pub field: String,
    pub message: String,
}

impl ConfigIssue {
    fn new(facet: &'static str, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            facet,
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "[{}] {}", self.facet, self.message)
        } else {
            write!(f, "[{}] {}: {}", self.facet, self.field, self.message)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFacet {
    pub id: String,
    #[serde(default)]
    pub taxonomy: Vec<String>,
    #[serde(default)]
    pub sub_policies: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcesFacet {
    /// Impression log, one `ContentRecord` per line.
    pub impressions: String,
    /// Optional score file (`content_id`, `score` per line) overriding
    /// inline scores.
    #[serde(default)]
    pub scores: Option<String>,
    /// Label file. Joined directly for `file_join`; treated as ground truth
    /// by `synthetic_oracle` and `mock_remote`.
    pub labels: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelerFacet {
    pub provider: ProviderKind,
    pub model: String,
    pub prompt_version: String,
    #[serde(default)]
    pub sensitivity: Option<f64>,
    #[serde(default)]
    pub false_positive_rate: Option<f64>,
    #[serde(default)]
    pub abstain_rate: f64,
    #[serde(default)]
    pub latency_ms: f64,
    #[serde(default)]
    pub seed: u64,
}

impl LabelerFacet {
    /// Version recorded in lineage: `model/prompt_version`.
    pub fn version_id(&self) -> String {
        format!("{}/{}", self.model, self.prompt_version)
    }

    pub fn mock_spec(&self) -> Option<MockRemoteSpec> {
        Some(MockRemoteSpec {
            sensitivity: self.sensitivity?,
            false_positive_rate: self.false_positive_rate?,
            abstain_rate: self.abstain_rate,
            latency_ms: self.latency_ms,
            seed: self.seed,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityFacet {
    /// Block runs unless the gold-set evaluation passes.
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default)]
    pub gold_set: Option<String>,
    #[serde(default)]
    pub thresholds: QualityThresholds,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputFacet {
    pub dir: String,
    /// Also write dashboard CSVs after each run.
    #[serde(default)]
    pub dashboard: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentsFacet {
    #[serde(default)]
    pub keys: Vec<String>,
    /// Also publish numerator-only estimates over the segment impression
    /// totals counted from the log.
    #[serde(default)]
    pub known_denominators: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionScope {
    #[default]
    Global,
    AllSegments,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectionFacet {
    #[serde(default)]
    pub rogan_gladen: bool,
    #[serde(default)]
    pub scope: CorrectionScope,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlertingFacet {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_power")]
    pub power: f64,
    /// Daily noise sd; when absent, the median daily standard error of the
    /// two compared windows is used.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub baseline: Option<f64>,
    #[serde(default = "one")]
    pub inflation: f64,
    #[serde(default)]
    pub gap_days: u32,
    #[serde(default)]
    pub rule: AlertRule,
}

fn default_alpha() -> f64 {
    0.05
}
fn default_power() -> f64 {
    0.8
}
fn one() -> f64 {
    1.0
}

impl Default for AlertingFacet {
    fn default() -> Self {
        Self {
            enabled: true,
            alpha: default_alpha(),
            power: default_power(),
            sigma: None,
            baseline: None,
            inflation: 1.0,
            gap_days: 0,
            rule: AlertRule::Significance,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestFacet {
    /// Largest tolerated share of malformed log lines before a run aborts.
    #[serde(default)]
    pub max_error_rate: f64,
}

/// Config as parsed; facets may be missing until validated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub policy: Option<PolicyFacet>,
    pub sources: Option<SourcesFacet>,
    pub sampling: Option<SamplingConfig>,
    pub labeler: Option<LabelerFacet>,
    pub quality: Option<QualityFacet>,
    pub output: Option<OutputFacet>,
    #[serde(default)]
    pub segments: SegmentsFacet,
    #[serde(default)]
    pub correction: CorrectionFacet,
    #[serde(default)]
    pub alerting: AlertingFacet,
    #[serde(default)]
    pub ingest: IngestFacet,
}

impl MetricConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            Error::Config(vec![ConfigIssue::new("toml", "", e.to_string().trim().to_string())])
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(vec![ConfigIssue::new("toml", "", e.to_string())]))
    }
}

/// A config with every facet present and checked.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedConfig {
    pub policy: PolicyFacet,
    pub sources: SourcesFacet,
    pub sampling: SamplingConfig,
    pub labeler: LabelerFacet,
    pub quality: QualityFacet,
    pub output: OutputFacet,
    pub segments: SegmentsFacet,
    pub correction: CorrectionFacet,
    pub alerting: AlertingFacet,
    pub ingest: IngestFacet,
    /// Directory relative paths resolve against.
    pub base_dir: PathBuf,
    /// Canonical form, hashed for lineage.
    pub canonical: MetricConfig,
}

impl ValidatedConfig {
    /// sha256 (hex) of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(&self.canonical).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn resolve(&self, template: &str, day: NaiveDate) -> PathBuf {
        resolve_path(&self.base_dir, template, Some(day))
    }

    pub fn impressions_path(&self, day: NaiveDate) -> PathBuf {
        self.resolve(&self.sources.impressions, day)
    }

    pub fn scores_path(&self, day: NaiveDate) -> Option<PathBuf> {
        self.sources.scores.as_deref().map(|s| self.resolve(s, day))
    }

    pub fn labels_path(&self, day: NaiveDate) -> PathBuf {
        self.resolve(&self.sources.labels, day)
    }

    pub fn gold_set_path(&self) -> Option<PathBuf> {
        self.quality
            .gold_set
            .as_deref()
            .map(|g| resolve_path(&self.base_dir, g, None))
    }

    pub fn output_dir(&self) -> PathBuf {
        resolve_path(&self.base_dir, &self.output.dir, None)
    }
}

fn resolve_path(base: &Path, template: &str, day: Option<NaiveDate>) -> PathBuf {
    let s = match day {
        Some(d) => template.replace("{day}", &d.format("%Y-%m-%d").to_string()),
        None => template.to_string(),
    };
    let p = PathBuf::from(s);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

/// Parses and validates a config file.
pub fn load_config(path: &Path) -> Result<ValidatedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config = MetricConfig::from_toml(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    validate_config(config, &base)
}

fn check_unit(issues: &mut Vec<ConfigIssue>, facet: &'static str, field: &str, v: f64) {
    if !(0.0..=1.0).contains(&v) {
        issues.push(ConfigIssue::new(facet, field, format!("{v} outside [0, 1]")));
    }
}

fn check_source(issues: &mut Vec<ConfigIssue>, base: &Path, field: &str, template: &str) {
    if template.trim().is_empty() {
        issues.push(ConfigIssue::new("sources", field, "empty path"));
        return;
    }
    let path = resolve_path(base, template, None);
    if template.contains("{day}") {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if !dir.as_os_str().is_empty() && !dir.to_string_lossy().contains("{day}") && !dir.is_dir() {
            issues.push(ConfigIssue::new(
                "sources",
                field,
                format!("directory {} does not exist", dir.display()),
            ));
        }
    } else if !path.is_file() {
        issues.push(ConfigIssue::new(
            "sources",
            field,
            format!("file {} does not exist", path.display()),
        ));
    }
}

/// Checks every facet and returns all problems at once.
pub fn validate_config(config: MetricConfig, base_dir: &Path) -> Result<ValidatedConfig> {
    let mut issues = Vec::new();
    let missing = |facet: &'static str| ConfigIssue::new(facet, "", "facet missing");

    if let Some(p) = &config.policy {
        if p.id.is_empty() || !p.id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            issues.push(ConfigIssue::new(
                "policy",
                "id",
                "must be nonempty and use only letters, digits, '-', '_' or '.'",
            ));
        }
    } else {
        issues.push(missing("policy"));
    }

    if let Some(s) = &config.sources {
        check_source(&mut issues, base_dir, "impressions", &s.impressions);
        check_source(&mut issues, base_dir, "labels", &s.labels);
        if let Some(sc) = &s.scores {
            check_source(&mut issues, base_dir, "scores", sc);
        }
    } else {
        issues.push(missing("sources"));
    }

    if let Some(s) = &config.sampling {
        for (field, msg) in s.issues() {
            issues.push(ConfigIssue::new("sampling", field, msg));
        }
    } else {
        issues.push(missing("sampling"));
    }

    if let Some(l) = &config.labeler {
        if l.model.trim().is_empty() {
            issues.push(ConfigIssue::new("labeler", "model", "must be nonempty"));
        }
        if l.prompt_version.trim().is_empty() {
            issues.push(ConfigIssue::new("labeler", "prompt_version", "must be nonempty"));
        }
        if l.provider == ProviderKind::MockRemote {
            for (field, v) in [("sensitivity", l.sensitivity), ("false_positive_rate", l.false_positive_rate)] {
                match v {
                    None => issues.push(ConfigIssue::new("labeler", field, "required for mock_remote")),
                    Some(v) => check_unit(&mut issues, "labeler", field, v),
                }
            }
        }
        check_unit(&mut issues, "labeler", "abstain_rate", l.abstain_rate);
        if !(l.latency_ms >= 0.0) {
            issues.push(ConfigIssue::new("labeler", "latency_ms", "must be >= 0"));
        }
    } else {
        issues.push(missing("labeler"));
    }

    if let Some(q) = &config.quality {
        match &q.gold_set {
            Some(g) => {
                let p = resolve_path(base_dir, g, None);
                if !p.is_file() {
                    issues.push(ConfigIssue::new(
                        "quality",
                        "gold_set",
                        format!("file {} does not exist", p.display()),
                    ));
                }
            }
            None if q.enabled => issues.push(ConfigIssue::new(
                "quality",
                "gold_set",
                "required when the quality gate is enabled",
            )),
            None => {}
        }
        let t = &q.thresholds;
        for (field, v) in [
            ("thresholds.min_accuracy", t.min_accuracy),
            ("thresholds.min_precision", t.min_precision),
            ("thresholds.min_recall", t.min_recall),
            ("thresholds.min_f1", t.min_f1),
            ("thresholds.max_false_positive_rate", t.max_false_positive_rate),
        ] {
            if let Some(v) = v {
                check_unit(&mut issues, "quality", field, v);
            }
        }
    } else {
        issues.push(missing("quality"));
    }

    if let Some(o) = &config.output {
        if o.dir.trim().is_empty() {
            issues.push(ConfigIssue::new("output", "dir", "must be nonempty"));
        }
    } else {
        issues.push(missing("output"));
    }

    let mut seen = std::collections::HashSet::new();
    for k in &config.segments.keys {
        if k.is_empty() || k == ALL_SEGMENTS {
            issues.push(ConfigIssue::new(
                "segments",
                "keys",
                format!("`{k}` is not a valid segment key"),
            ));
        }
        if !seen.insert(k) {
            issues.push(ConfigIssue::new("segments", "keys", format!("duplicate key `{k}`")));
        }
    }

    if config.correction.rogan_gladen && config.quality.as_ref().is_none_or(|q| q.gold_set.is_none()) {
        issues.push(ConfigIssue::new(
            "correction",
            "rogan_gladen",
            "needs quality.gold_set to estimate sensitivity and false-positive rate",
        ));
    }

    let a = &config.alerting;
    for (field, v) in [("alpha", a.alpha), ("power", a.power)] {
        if !(v > 0.0 && v < 1.0) {
            issues.push(ConfigIssue::new("alerting", field, format!("{v} outside (0, 1)")));
        }
    }
    if !(a.inflation > 0.0 && a.inflation.is_finite()) {
        issues.push(ConfigIssue::new("alerting", "inflation", "must be positive"));
    }
    if let Some(s) = a.sigma {
        if !(s >= 0.0 && s.is_finite()) {
            issues.push(ConfigIssue::new("alerting", "sigma", "must be finite and >= 0"));
        }
    }
    if let Some(b) = a.baseline {
        if !(b > 0.0) {
            issues.push(ConfigIssue::new("alerting", "baseline", "must be positive"));
        }
    }

    let r = config.ingest.max_error_rate;
    if !(0.0..1.0).contains(&r) {
        issues.push(ConfigIssue::new("ingest", "max_error_rate", format!("{r} outside [0, 1)")));
    }

    if !issues.is_empty() {
        return Err(Error::Config(issues));
    }
    let c = config.clone();
    Ok(ValidatedConfig {
        policy: c.policy.expect("checked"),
        sources: c.sources.expect("checked"),
        sampling: c.sampling.expect("checked"),
        labeler: c.labeler.expect("checked"),
        quality: c.quality.expect("checked"),
        output: c.output.expect("checked"),
        segments: c.segments,
        correction: c.correction,
        alerting: c.alerting,
        ingest: c.ingest,
        base_dir: base_dir.to_path_buf(),
        canonical: config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_fixture(dir: &Path) -> String {
        std::fs::create_dir_all(dir.join("logs")).unwrap();
        std::fs::write(dir.join("labels.jsonl"), "").unwrap();
        std::fs::write(dir.join("gold.jsonl"), "").unwrap();
        r#"
[policy]
id = "adult"
taxonomy = ["safety", "adult"]

[sources]
impressions = "logs/{day}.jsonl"
labels = "labels.jsonl"

[sampling]
sample_size = 100
seed = 7

[labeler]
provider = "mock_remote"
model = "vlm-a"
prompt_version = "p3"
sensitivity = 0.9
false_positive_rate = 0.05

[quality]
gold_set = "gold.jsonl"
thresholds = { min_f1 = 0.8 }

[output]
dir = "out"
"#
        .to_string()
    }

    fn issues_of(text: &str, dir: &Path) -> Vec<ConfigIssue> {
        match MetricConfig::from_toml(text).and_then(|c| validate_config(c, dir)) {
            Err(Error::Config(i)) => i,
            Err(e) => panic!("unexpected {e}"),
            Ok(_) => vec![],
        }
    }

    #[test]
    fn complete_config_passes() {
        let dir = tempfile::tempdir().unwrap();
        let text = write_fixture(dir.path());
        let cfg = validate_config(MetricConfig::from_toml(&text).unwrap(), dir.path()).unwrap();
        assert_eq!(cfg.labeler.version_id(), "vlm-a/p3");
        assert_eq!(cfg.hash().len(), 64);
        let day = NaiveDate::from_ymd_opt(2026, 3, 1).unwrap();
        assert!(cfg.impressions_path(day).ends_with("logs/2026-03-01.jsonl"));
    }

    #[test]
    fn zero_epsilon_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let text = write_fixture(dir.path()).replace("seed = 7", "seed = 7\nepsilon = 0.0");
        let issues = issues_of(&text, dir.path());
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].field, "epsilon");
        assert!(issues[0].message.contains("> 0"));
    }

    #[test]
    fn gate_without_gold_set_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let text = write_fixture(dir.path()).replace("gold_set = \"gold.jsonl\"\n", "");
        let issues = issues_of(&text, dir.path());
        assert!(issues.iter().any(|i| i.facet == "quality" && i.field == "gold_set"));
    }

    #[test]
    fn problems_are_aggregated() {
        let dir = tempfile::tempdir().unwrap();
        let text = write_fixture(dir.path())
            .replace("[output]\ndir = \"out\"\n", "")
            .replace("sensitivity = 0.9\n", "")
            .replace("sample_size = 100", "sample_size = 0");
        let issues = issues_of(&text, dir.path());
        let facets: Vec<_> = issues.iter().map(|i| i.facet).collect();
        assert!(facets.contains(&"output"));
        assert!(facets.contains(&"labeler"));
        assert!(facets.contains(&"sampling"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let text = write_fixture(dir.path()).replace("seed = 7", "seed = 7\nsede = 8");
        let issues = issues_of(&text, dir.path());
        assert_eq!(issues[0].facet, "toml");
        assert!(issues[0].message.contains("sede"));
    }

    #[test]
    fn hash_tracks_content() {
        let dir = tempfile::tempdir().unwrap();
        let text = write_fixture(dir.path());
        let a = validate_config(MetricConfig::from_toml(&text).unwrap(), dir.path()).unwrap();
        let spaced = text.replace("sample_size = 100", "sample_size   =   100");
        let b = validate_config(MetricConfig::from_toml(&spaced).unwrap(), dir.path()).unwrap();
        assert_eq!(a.hash(), b.hash());
        let changed = text.replace("seed = 7", "seed = 8");
        let c = validate_config(MetricConfig::from_toml(&changed).unwrap(), dir.path()).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
