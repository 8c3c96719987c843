//! Per-run lineage directories.
//!
//! A run for (policy, day, config hash) lives in
//! `{output}/runs/{policy}/{day}/{hash[..16]}/` and holds:
//!
//! | file | content |
//! |---|---|
//! | `config.json` | canonical metric config |
//! | `sample_meta.json` | design facts and labeler provenance |
//! | `sample.jsonl` | sampled units with weights, probabilities, segments, labels |
//! | `estimates.jsonl` | published estimates |
//! | `gold_report.json` | gold-set evaluation and gate decision, if configured |
//! | `ingest_report.json` | log line counts and rejected lines |
//! | `manifest.json` | sha256 of every file above |
//! | `timing.json` | wall-clock stage timings (not hashed) |
//!
//! Directories are written under a temporary name and renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::labeling::{GateDecision, GoldSetReport, ProviderKind, Usage};
use crate::pipeline::config::MetricConfig;
use crate::pipeline::estimates::{compute_estimates, EstimateRecord, EstimationPlan};
use crate::pipeline::sample::SampleMeta;
use crate::sampler::SampleDraw;

pub const MANIFEST: &str = "manifest.json";
pub const TIMING: &str = "timing.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelProvenance {
    pub provider: ProviderKind,
    pub provider_version: String,
    pub model: String,
    pub prompt_version: String,
    pub abstentions: usize,
    pub simulated_latency_ms: f64,
    /// Pass-through token/cost accounting from the provider.
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub usage: Usage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub sample: SampleMeta,
    pub labels: LabelProvenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub report: GoldSetReport,
    pub gate: GateDecision,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub policy: String,
    pub day: NaiveDate,
    pub config_hash: String,
    pub files: BTreeMap<String, String>,
}

/// Everything persisted for one run, held in memory before writing.
#[derive(Clone, Debug, PartialEq)]
pub struct Lineage {
    pub config: MetricConfig,
    pub meta: RunMeta,
    pub draws: Vec<SampleDraw>,
    pub estimates: Vec<EstimateRecord>,
    pub gold: Option<GoldRecord>,
    pub ingest: Option<crate::pipeline::ingest::IngestReport>,
}

fn pretty<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

impl Lineage {
    /// File name to bytes, excluding the manifest.
    pub fn files(&self) -> Result<BTreeMap<&'static str, Vec<u8>>> {
        let mut f = BTreeMap::new();
        f.insert("config.json", pretty(&self.config)?);
        f.insert("sample_meta.json", pretty(&self.meta)?);
        f.insert("sample.jsonl", jsonl::to_string(&self.draws)?.into_bytes());
        f.insert("estimates.jsonl", jsonl::to_string(&self.estimates)?.into_bytes());
        if let Some(g) = &self.gold {
            f.insert("gold_report.json", pretty(g)?);
        }
        if let Some(i) = &self.ingest {
            f.insert("ingest_report.json", pretty(i)?);
        }
        Ok(f)
    }

    pub fn manifest(&self, policy: &str, day: NaiveDate, config_hash: &str) -> Result<Manifest> {
        Ok(Manifest {
            policy: policy.to_string(),
            day,
            config_hash: config_hash.to_string(),
            files: self
                .files()?
                .into_iter()
                .map(|(k, v)| (k.to_string(), hex::encode(Sha256::digest(&v))))
                .collect(),
        })
    }
}

pub fn run_dir(output: &Path, policy: &str, day: NaiveDate, config_hash: &str) -> PathBuf {
    output
        .join("runs")
        .join(policy)
        .join(day.format("%Y-%m-%d").to_string())
        .join(&config_hash[..16])
}

/// Writes the lineage atomically. Returns `true` when an identical run
/// already existed; a differing run for the same key is an error.
pub fn persist(dir: &Path, lineage: &Lineage, manifest: &Manifest, timing: &impl Serialize) -> Result<bool> {
    let manifest_bytes = pretty(manifest)?;
    if dir.exists() {
        let existing = fs::read(dir.join(MANIFEST)).map_err(|e| Error::io(dir.join(MANIFEST), e))?;
        if existing == manifest_bytes {
            return Ok(true);
        }
        return Err(Error::Lineage {
            path: dir.to_path_buf(),
            reason: "a run with this config hash exists but its contents differ (inputs changed?)".into(),
        });
    }
    let parent = dir.parent().expect("run dir has a parent");
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let tmp = parent.join(format!(
        ".{}.tmp-{}",
        dir.file_name().unwrap().to_string_lossy(),
        std::process::id()
    ));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::create_dir(&tmp).map_err(|e| Error::io(&tmp, e))?;
    for (name, bytes) in lineage.files()? {
        fs::write(tmp.join(name), bytes).map_err(|e| Error::io(tmp.join(name), e))?;
    }
    fs::write(tmp.join(MANIFEST), &manifest_bytes).map_err(|e| Error::io(tmp.join(MANIFEST), e))?;
    fs::write(tmp.join(TIMING), pretty(timing)?).map_err(|e| Error::io(tmp.join(TIMING), e))?;
    fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))?;
    Ok(false)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Loads a persisted run after checking every file against the manifest.
pub fn load(dir: &Path) -> Result<(Lineage, Manifest)> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    for (name, digest) in &manifest.files {
        let p = dir.join(name);
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        if hex::encode(Sha256::digest(&bytes)) != *digest {
            return Err(Error::Lineage {
                path: p,
                reason: "content hash does not match the manifest".into(),
            });
        }
    }
    let has = |n: &str| manifest.files.contains_key(n);
    let lineage = Lineage {
        config: read_json(&dir.join("config.json"))?,
        meta: read_json(&dir.join("sample_meta.json"))?,
        draws: jsonl::read(&dir.join("sample.jsonl"))?,
        estimates: jsonl::read(&dir.join("estimates.jsonl"))?,
        gold: if has("gold_report.json") {
            Some(read_json(&dir.join("gold_report.json"))?)
        } else {
            None
        },
        ingest: if has("ingest_report.json") {
            Some(read_json(&dir.join("ingest_report.json"))?)
        } else {
            None
        },
    };
    Ok((lineage, manifest))
}

/// The estimation plan a config implies, given the run's gold report.
pub fn estimation_plan(config: &MetricConfig, gold: Option<&GoldSetReport>) -> Result<EstimationPlan> {
    let correction = if config.correction.rogan_gladen {
        let report = gold.ok_or_else(|| Error::Lineage {
            path: PathBuf::new(),
            reason: "correction enabled but no gold report recorded".into(),
        })?;
        Some((report.labeler_quality()?, config.correction.scope))
    } else {
        None
    };
    Ok(EstimationPlan {
        segments: config.segments.keys.clone(),
        known_denominators: config.segments.known_denominators,
        correction,
    })
}

/// Recomputes every estimate of a run from its lineage directory alone.
pub fn replay_lineage(dir: &Path) -> Result<Vec<EstimateRecord>> {
    let (lineage, manifest) = load(dir)?;
    let plan = estimation_plan(&lineage.config, lineage.gold.as_ref().map(|g| &g.report))?;
    let (estimates, _) = compute_estimates(
        &manifest.policy,
        manifest.day,
        &lineage.draws,
        &lineage.meta.sample,
        &plan,
    )?;
    Ok(estimates)
}

/// Replays a run and compares with the published estimates.
pub fn verify_lineage(dir: &Path) -> Result<()> {
    let replayed = replay_lineage(dir)?;
    let (lineage, _) = load(dir)?;
    if replayed != lineage.estimates {
        return Err(Error::Lineage {
            path: dir.to_path_buf(),
            reason: "replayed estimates differ from published estimates".into(),
        });
    }
    Ok(())
}
