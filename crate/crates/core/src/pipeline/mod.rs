//! Config-driven daily measurement runs with persisted lineage.
//!
//! A run reads the day's impression log, draws one probability sample,
//! labels it, publishes global and segment estimates, stores everything
//! needed to recompute them, and evaluates the weekly alert.

pub mod config;
mod compare;
mod dashboard;
mod estimates;
mod ingest;
pub mod lineage;
mod run;
mod sample;

pub use compare::{compare_score_versions, compare_scorings, Agreement, ScoreConsistencyReport, ScoringSummary};
pub use config::{load_config, validate_config, ConfigIssue, MetricConfig, ValidatedConfig};
pub use dashboard::{emit_dashboard_data, DashboardFiles};
pub use estimates::{compute_estimates, published, EstimateRecord, EstimationPlan};
pub use ingest::{read_scores, ImpressionLog, IngestReport, LineError, RecordSource, Rescored, ScoreRow};
pub use lineage::{replay_lineage, verify_lineage};
pub use run::{
    build_provider, evaluate_daily_alert, evaluate_quality, open_log, run_daily, write_alert, IndexEntry,
    RunIndex, RunOutcome, Timing,
};
pub use sample::{day_seed, draw_daily_sample, sampling_for_day, DailySample, SampleMeta};
