use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

use crate::pipeline::config::ConfigIssue;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid record `{content_id}`: {reason}")]
    InvalidRecord { content_id: String, reason: String },

    #[error("sampling weight for `{content_id}` is not finite (weight = {weight}); reduce nu or check impressions")]
    NonFiniteWeight { content_id: String, weight: f64 },

    #[error("no scores present for day-median imputation; configure a fixed imputation value instead")]
    NoScoresForImputation,

    #[error("uniform variate must lie in (0, 1], got {0}")]
    UniformOutOfRange(f64),

    #[error("duplicate content_id `{0}` (each unit must appear once per day; aggregate before sampling)")]
    DuplicateContent(String),

    #[error("reservoir capacity mismatch: {left} vs {right}")]
    CapacityMismatch { left: usize, right: usize },

    #[error("reservoir threshold undefined: the reservoir was never filled")]
    ThresholdUndefined,

    #[error("population is empty")]
    EmptyPopulation,

    #[error("estimate undefined: {0}")]
    UndefinedEstimate(String),

    #[error("segment `{0}` has no sampled impressions (insufficient sample)")]
    EmptySegment(String),

    #[error("draw `{0}` carries no label")]
    Unlabeled(String),

    #[error("draw `{0}` has no inclusion probability; supply the reservoir threshold to compute it")]
    MissingInclusionProbability(String),

    #[error("variance unavailable: {0}")]
    VarianceUnavailable(String),

    #[error("Rogan-Gladen correction undefined: sensitivity {sensitivity} must exceed false-positive rate {false_positive_rate}")]
    CorrectionUndefined {
        sensitivity: f64,
        false_positive_rate: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("labels missing for {} content ids: {}", .0.len(), preview(.0))]
    MissingLabels(Vec<String>),

    #[error("scores missing for {} content ids: {}", .0.len(), preview(.0))]
    MissingScores(Vec<String>),

    #[error("series has gaps; missing days: {0:?}")]
    SeriesGap(Vec<NaiveDate>),

    #[error("series days must be strictly increasing (offending day {0})")]
    UnorderedSeries(NaiveDate),

    #[error("configuration invalid:\n{}", format_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("quality gate failed: {}", .0.join("; "))]
    GateFailed(Vec<String>),

    #[error("ingestion aborted: {0}")]
    Ingestion(String),

    #[error("lineage error at {path}: {reason}")]
    Lineage { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  - {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Process exit codes used by the command-line front end.
fn preview(ids: &[String]) -> String {
    const SHOWN: usize = 20;
    let mut s = ids.iter().take(SHOWN).cloned().collect::<Vec<_>>().join(", ");
    if ids.len() > SHOWN {
        s.push_str(&format!(", ... ({} more)", ids.len() - SHOWN));
    }
    s
}

pub mod exit_code {
    pub const CONFIG: i32 = 2;
    pub const GATE: i32 = 3;
    pub const INGESTION: i32 = 4;
    pub const ESTIMATION: i32 = 5;
    pub const OTHER: i32 = 1;
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter { .. } => exit_code::CONFIG,
            Error::GateFailed(_) => exit_code::GATE,
            Error::Ingestion(_)
            | Error::InvalidRecord { .. }
            | Error::DuplicateContent(_)
            | Error::NoScoresForImputation
            | Error::MissingScores(_)
            | Error::NonFiniteWeight { .. } => exit_code::INGESTION,
            Error::UndefinedEstimate(_)
            | Error::EmptySegment(_)
            | Error::Unlabeled(_)
            | Error::MissingInclusionProbability(_)
            | Error::VarianceUnavailable(_)
            | Error::CorrectionUndefined { .. }
            | Error::MissingLabels(_)
            | Error::EmptyPopulation
            | Error::ThresholdUndefined => exit_code::ESTIMATION,
            _ => exit_code::OTHER,
        }
    }
}
