use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::alerting::{evaluate_alert_at, AlertDecision, DailyPoint, DailySeries, MdePlan};
use crate::error::{Error, Result};
use crate::estimator::ALL_SEGMENTS;
use crate::labeling::{
    evaluate_gold_rows, label_sample, quality_gate, read_gold_set, FileJoin, LabelProvider,
    MockRemote, ProviderKind, SyntheticOracle,
};
use crate::numeric;
use crate::pipeline::config::ValidatedConfig;
use crate::pipeline::dashboard::emit_dashboard_data;
use crate::pipeline::estimates::{compute_estimates, published, EstimateRecord};
use crate::pipeline::ingest::{read_scores, ImpressionLog, IngestReport};
use crate::pipeline::lineage::{
    self, estimation_plan, persist, run_dir, GoldRecord, LabelProvenance, Lineage, RunMeta,
};
use crate::pipeline::sample::{draw_daily_sample, sampling_for_day};

/// Builds the configured label provider for `day`.
pub fn build_provider(cfg: &ValidatedConfig, day: NaiveDate) -> Result<Box<dyn LabelProvider>> {
    let file = FileJoin::from_path(&cfg.labels_path(day))?;
    let version = cfg.labeler.version_id();
    Ok(match cfg.labeler.provider {
        ProviderKind::FileJoin => Box::new(file),
        ProviderKind::SyntheticOracle => Box::new(SyntheticOracle::new(file.truth(), version)),
        ProviderKind::MockRemote => {
            let spec = cfg
                .labeler
                .mock_spec()
                .ok_or_else(|| Error::param("labeler", "mock_remote needs sensitivity and false_positive_rate"))?;
            Box::new(MockRemote::new(file.truth(), spec, version)?)
        }
    })
}

/// Impression log for `day` with the configured score source applied.
pub fn open_log(cfg: &ValidatedConfig, day: NaiveDate) -> Result<ImpressionLog> {
    let log = ImpressionLog::new(cfg.impressions_path(day));
    Ok(match cfg.scores_path(day) {
        Some(p) => log.with_scores(read_scores(&p)?),
        None => log,
    })
}

/// Gold-set evaluation and gate decision, when a gold set is configured.
pub fn evaluate_quality(cfg: &ValidatedConfig) -> Result<Option<GoldRecord>> {
    let Some(path) = cfg.gold_set_path() else {
        return Ok(None);
    };
    let report = evaluate_gold_rows(&read_gold_set(&path)?)?;
    let gate = quality_gate(&report, &cfg.quality.thresholds);
    Ok(Some(GoldRecord { report, gate }))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stages_ms: BTreeMap<String, f64>,
}

impl Timing {
    fn lap(&mut self, stage: &str, start: &mut Instant) {
        self.stages_ms
            .insert(stage.to_string(), start.elapsed().as_secs_f64() * 1e3);
        *start = Instant::now();
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    /// An identical run already existed and was left untouched.
    pub reused: bool,
    pub estimates: Vec<EstimateRecord>,
    pub warnings: Vec<String>,
    pub ingest: IngestReport,
    pub gold: Option<GoldRecord>,
    pub alert: Option<AlertDecision>,
}

/// Daily batch: gate, ingest, sample, label, estimate, persist, alert.
pub fn run_daily(cfg: &ValidatedConfig, day: NaiveDate) -> Result<RunOutcome> {
    let mut timing = Timing::default();
    let mut clock = Instant::now();
    let policy = cfg.policy.id.as_str();

    let gold = evaluate_quality(cfg)?;
    if cfg.quality.enabled {
        let g = gold.as_ref().expect("validated: gate needs a gold set");
        if !g.gate.pass {
            return Err(Error::GateFailed(g.gate.reasons.clone()));
        }
    }
    timing.lap("quality_gate", &mut clock);

    let log = open_log(cfg, day)?;
    let ingest = log.check(cfg.ingest.max_error_rate)?;
    timing.lap("ingest_scan", &mut clock);

    let sample = draw_daily_sample(&log, &sampling_for_day(&cfg.sampling, day))?;
    timing.lap("sample", &mut clock);

    let provider = build_provider(cfg, day)?;
    let labeled = label_sample(sample.draws, provider.as_ref())?;
    timing.lap("label", &mut clock);

    let plan = estimation_plan(&cfg.canonical, gold.as_ref().map(|g| &g.report))?;
    let (estimates, warnings) = compute_estimates(policy, day, &labeled.draws, &sample.meta, &plan)?;
    timing.lap("estimate", &mut clock);

    let lineage = Lineage {
        config: cfg.canonical.clone(),
        meta: RunMeta {
            sample: sample.meta,
            labels: LabelProvenance {
                provider: labeled.provider,
                provider_version: labeled.provider_version,
                model: cfg.labeler.model.clone(),
                prompt_version: cfg.labeler.prompt_version.clone(),
                abstentions: labeled.abstentions,
                simulated_latency_ms: labeled.simulated_latency_ms,
                usage: labeled.usage,
            },
        },
        draws: labeled.draws,
        estimates,
        gold: gold.clone(),
        ingest: Some(ingest.clone()),
    };
    let hash = cfg.hash();
    let manifest = lineage.manifest(policy, day, &hash)?;
    let out = cfg.output_dir();
    let dir = run_dir(&out, policy, day, &hash);
    let reused = persist(&dir, &lineage, &manifest, &timing)?;

    let mut index = RunIndex::load(&out, policy)?;
    index.record(&out, &dir, &hash, &lineage.estimates)?;
    index.save(&out, policy)?;

    let alert = if cfg.alerting.enabled {
        let decision = evaluate_daily_alert(cfg, &index, day)?;
        if let Some(d) = &decision {
            write_alert(&out, policy, day, d)?;
        }
        decision
    } else {
        None
    };

    if cfg.output.dashboard {
        let all = index.estimates(&out)?;
        emit_dashboard_data(&all, &out.join("dashboard"))?;
    }

    Ok(RunOutcome {
        run_dir: dir,
        reused,
        estimates: lineage.estimates,
        warnings,
        ingest,
        gold,
        alert,
    })
}

/// Latest run per day for one policy, with its headline estimate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunIndex {
    pub days: BTreeMap<NaiveDate, IndexEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    /// Run directory relative to the output directory.
    pub run_dir: PathBuf,
    pub config_hash: String,
    pub theta_hat: f64,
    pub variance: Option<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ess: f64,
}

impl RunIndex {
    fn path(out: &Path, policy: &str) -> PathBuf {
        out.join("index").join(format!("{policy}.json"))
    }

    pub fn load(out: &Path, policy: &str) -> Result<Self> {
        let p = Self::path(out, policy);
        if !p.exists() {
            return Ok(Self::default());
        }
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn save(&self, out: &Path, policy: &str) -> Result<()> {
        let p = Self::path(out, policy);
        let dir = p.parent().expect("index has a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let tmp = p.with_extension(format!("json.tmp-{}", std::process::id()));
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &p).map_err(|e| Error::io(&p, e))
    }

    fn record(&mut self, out: &Path, dir: &Path, hash: &str, estimates: &[EstimateRecord]) -> Result<()> {
        let Some(first) = estimates.first() else {
            return Ok(());
        };
        let head = published(estimates, first.day, ALL_SEGMENTS).expect("global estimate present");
        self.days.insert(
            head.day,
            IndexEntry {
                run_dir: dir.strip_prefix(out).unwrap_or(dir).to_path_buf(),
                config_hash: hash.to_string(),
                theta_hat: head.theta_hat,
                variance: head.variance,
                ci_low: head.ci_low,
                ci_high: head.ci_high,
                ess: head.ess,
            },
        );
        Ok(())
    }

    pub fn series(&self) -> DailySeries {
        DailySeries::new(
            self.days
                .iter()
                .map(|(day, e)| DailyPoint {
                    day: *day,
                    theta_hat: e.theta_hat,
                    variance: e.variance,
                })
                .collect(),
        )
        .expect("BTreeMap keys are ordered")
    }

    /// All published estimates of the indexed runs.
    pub fn estimates(&self, out: &Path) -> Result<Vec<EstimateRecord>> {
        let mut all = Vec::new();
        for e in self.days.values() {
            let (lineage, _) = lineage::load(&out.join(&e.run_dir))?;
            all.extend(lineage.estimates);
        }
        Ok(all)
    }
}

/// Alert for the window ending at `day`. Without a configured sigma the
/// median daily standard error over both windows is used; `None` when
/// that is unavailable too.
pub fn evaluate_daily_alert(cfg: &ValidatedConfig, index: &RunIndex, day: NaiveDate) -> Result<Option<AlertDecision>> {
    let a = &cfg.alerting;
    let series = index.series().up_to(day);
    let span = 14 + a.gap_days as i64;
    let sigma = match a.sigma {
        Some(s) => s,
        None => {
            let from = day - Duration::days(span - 1);
            let mut sds: Vec<f64> = series
                .points()
                .iter()
                .filter(|p| p.day >= from)
                .filter_map(|p| p.variance.map(f64::sqrt))
                .collect();
            match numeric::median(&mut sds) {
                Some(s) => s,
                None => return Ok(None),
            }
        }
    };
    let mut plan = MdePlan::new(sigma, a.alpha, a.power)?
        .with_inflation(a.inflation)?
        .with_window(7, a.gap_days)?
        .with_rule(a.rule);
    if let Some(b) = a.baseline {
        plan = plan.with_baseline(b)?;
    }
    Ok(Some(evaluate_alert_at(&series, &plan, day)))
}

#[derive(Serialize)]
struct AlertFile<'a> {
    policy: &'a str,
    #[serde(flatten)]
    decision: &'a AlertDecision,
}

pub fn write_alert(out: &Path, policy: &str, day: NaiveDate, decision: &AlertDecision) -> Result<PathBuf> {
    let dir = out.join("alerts").join(policy);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let p = dir.join(format!("{}.json", day.format("%Y-%m-%d")));
    let mut bytes = serde_json::to_vec_pretty(&AlertFile { policy, decision })?;
    bytes.push(b'\n');
    fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
    Ok(p)
}
