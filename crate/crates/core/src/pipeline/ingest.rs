//! Streaming reads of the daily impression log.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::sampler::ContentRecord;

/// One row of a score file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRow {
    pub content_id: String,
    pub score: f64,
}

pub fn read_scores(path: &Path) -> Result<HashMap<String, f64>> {
    let rows: Vec<ScoreRow> = jsonl::read(path)?;
    let mut out = HashMap::with_capacity(rows.len());
    for r in rows {
        if !(r.score > 0.0 && r.score <= 1.0) {
            return Err(Error::InvalidRecord {
                content_id: r.content_id,
                reason: format!("score {} outside (0, 1]", r.score),
            });
        }
        if out.insert(r.content_id.clone(), r.score).is_some() {
            return Err(Error::DuplicateContent(r.content_id));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// Outcome of a validation pass over the log.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub lines: usize,
    pub accepted: usize,
    pub errors: Vec<LineError>,
    pub total_impressions: u64,
    pub segment_totals: BTreeMap<String, u64>,
}

impl IngestReport {
    pub fn error_rate(&self) -> f64 {
        if self.lines == 0 {
            0.0
        } else {
            self.errors.len() as f64 / self.lines as f64
        }
    }
}

/// Anything the sampler can stream records from, possibly more than once.
pub trait RecordSource {
    fn for_each_record(&self, f: &mut dyn FnMut(ContentRecord) -> Result<()>) -> Result<()>;
}

impl RecordSource for [ContentRecord] {
    fn for_each_record(&self, f: &mut dyn FnMut(ContentRecord) -> Result<()>) -> Result<()> {
        self.iter().cloned().try_for_each(f)
    }
}

impl RecordSource for Vec<ContentRecord> {
    fn for_each_record(&self, f: &mut dyn FnMut(ContentRecord) -> Result<()>) -> Result<()> {
        self.as_slice().for_each_record(f)
    }
}

/// In-memory records with scores replaced from a score map.
pub struct Rescored<'a> {
    pub records: &'a [ContentRecord],
    pub scores: &'a HashMap<String, f64>,
}

impl RecordSource for Rescored<'_> {
    fn for_each_record(&self, f: &mut dyn FnMut(ContentRecord) -> Result<()>) -> Result<()> {
        for r in self.records {
            let mut r = r.clone();
            r.score = self.scores.get(&r.content_id).copied();
            f(r)?;
        }
        Ok(())
    }
}

/// A JSONL impression log. Malformed lines, invalid records and repeated
/// content ids are skipped and reported by [`ImpressionLog::scan`].
pub struct ImpressionLog {
    path: PathBuf,
    scores: Option<HashMap<String, f64>>,
}

impl ImpressionLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            scores: None,
        }
    }

    /// Scores from a separate file replace inline scores; ids absent from
    /// the map have no score.
    pub fn with_scores(mut self, scores: HashMap<String, f64>) -> Self {
        self.scores = Some(scores);
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn stream(
        &self,
        on_record: &mut dyn FnMut(ContentRecord) -> Result<()>,
        on_error: &mut dyn FnMut(LineError),
    ) -> Result<usize> {
        let file = File::open(&self.path).map_err(|e| Error::io(&self.path, e))?;
        let mut seen = HashSet::new();
        let mut lines = 0;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&self.path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            lines += 1;
            let err = |message: String| LineError { line: i + 1, message };
            let mut record: ContentRecord = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => {
                    on_error(err(e.to_string()));
                    continue;
                }
            };
            if let Some(scores) = &self.scores {
                record.score = scores.get(&record.content_id).copied();
            }
            if let Err(e) = record.validate() {
                on_error(err(e.to_string()));
                continue;
            }
            if !seen.insert(record.content_id.clone()) {
                on_error(err(Error::DuplicateContent(record.content_id).to_string()));
                continue;
            }
            on_record(record)?;
        }
        Ok(lines)
    }

    /// Validation pass: counts lines, errors and impression totals.
    pub fn scan(&self) -> Result<IngestReport> {
        let mut report = IngestReport::default();
        let mut errors = Vec::new();
        let lines = self.stream(
            &mut |r| {
                report.accepted += 1;
                report.total_impressions += r.impressions;
                for (k, v) in &r.segment_impressions {
                    *report.segment_totals.entry(k.clone()).or_default() += v;
                }
                Ok(())
            },
            &mut |e| errors.push(e),
        )?;
        report.lines = lines;
        report.errors = errors;
        Ok(report)
    }

    /// Scans and aborts when the error share exceeds `max_error_rate`.
    pub fn check(&self, max_error_rate: f64) -> Result<IngestReport> {
        let report = self.scan()?;
        if report.error_rate() > max_error_rate {
            let shown: Vec<String> = report
                .errors
                .iter()
                .take(20)
                .map(|e| format!("  line {}: {}", e.line, e.message))
                .collect();
            return Err(Error::Ingestion(format!(
                "{}: {} of {} lines rejected (rate {:.4} > {max_error_rate})\n{}",
                self.path.display(),
                report.errors.len(),
                report.lines,
                report.error_rate(),
                shown.join("\n")
            )));
        }
        if report.accepted == 0 {
            return Err(Error::Ingestion(format!("{}: no valid records", self.path.display())));
        }
        Ok(report)
    }
}

impl RecordSource for ImpressionLog {
    fn for_each_record(&self, f: &mut dyn FnMut(ContentRecord) -> Result<()>) -> Result<()> {
        self.stream(f, &mut |_| {}).map(|_| ())
    }
}
