mod common;

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::process::Command;

use chrono::Duration;
use prevalence::error::exit_code;
use prevalence::estimator::{EstimatorKind, ALL_SEGMENTS};
use prevalence::jsonl;
use prevalence::labeling::{MockRemoteSpec, SyntheticOracle};
use prevalence::pipeline::{
    compare_scorings, load_config, published, replay_lineage, run_daily, verify_lineage, MetricConfig,
};
use prevalence::sampler::SamplingConfig;
use prevalence::Error;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(sample_size: usize, extra: &str) -> String {
    format!(
        r#"
[policy]
id = "p"
taxonomy = ["t"]

[sources]
impressions = "logs/{{day}}.jsonl"
labels = "labels.jsonl"

[sampling]
sample_size = {sample_size}
seed = 19

[labeler]
provider = "synthetic_oracle"
model = "oracle"
prompt_version = "v1"

[output]
dir = "out"

[segments]
keys = ["feed", "search"]
known_denominators = true
{extra}
"#
    )
}

const NO_GATE: &str = "\n[quality]\nenabled = false\n";

fn segment_truth(pop: &prevalence::simlab::SimPopulation, seg: &str) -> f64 {
    let recs = common::segmented_records(pop);
    let (num, den) = recs.iter().zip(&pop.items).fold((0u64, 0u64), |(n, d), (r, it)| {
        let x = if seg == ALL_SEGMENTS {
            r.impressions
        } else {
            r.segment_impressions.get(seg).copied().unwrap_or(0)
        };
        (n + if it.positive { x } else { 0 }, d + x)
    });
    num as f64 / den as f64
}

#[test]
fn oracle_run_recovers_global_and_segment_truth() {
    let pop = common::population(300_000, 0.005, 42);
    let root = tempfile::tempdir().unwrap();
    let d = common::day("2026-06-01");
    common::write_logs(root.path(), &pop, &[d]);
    let cfg = load_config(&common::write_config(root.path(), &config(10_000, NO_GATE))).unwrap();
    let out = run_daily(&cfg, d).unwrap();

    let head = published(&out.estimates, d, ALL_SEGMENTS).unwrap();
    let truth = pop.true_prevalence();
    let z = (head.theta_hat - truth) / head.variance.unwrap().sqrt();
    assert!(z.abs() < 3.0, "global z = {z}");
    assert!(head.ci_low <= truth && truth <= head.ci_high || z.abs() >= 1.96);

    for seg in ["feed", "search"] {
        let truth = segment_truth(&pop, seg);
        for e in out.estimates.iter().filter(|e| e.segment == seg) {
            let z = (e.theta_hat - truth) / e.variance.unwrap().sqrt();
            assert!(z.abs() < 3.0, "{seg} {}: z = {z}", e.estimator);
        }
    }
    // Every estimate of the day comes from the one persisted sample.
    let ids: HashSet<_> = out.estimates.iter().map(|e| e.sample_id.as_str()).collect();
    assert_eq!(ids.len(), 1);
    assert_eq!(out.estimates.len(), 5);
}

#[test]
fn replay_idempotence_and_tamper_detection() {
    let pop = common::population(20_000, 0.01, 7);
    let root = tempfile::tempdir().unwrap();
    let d = common::day("2026-06-02");
    common::write_logs(root.path(), &pop, &[d]);
    let cfg = load_config(&common::write_config(root.path(), &config(1_500, NO_GATE))).unwrap();

    let first = run_daily(&cfg, d).unwrap();
    assert!(!first.reused);
    let replayed = replay_lineage(&first.run_dir).unwrap();
    for (a, b) in replayed.iter().zip(&first.estimates) {
        assert_eq!(a.theta_hat.to_bits(), b.theta_hat.to_bits());
        assert_eq!(a.variance.map(f64::to_bits), b.variance.map(f64::to_bits));
    }
    assert_eq!(replayed, first.estimates);

    let manifest = fs::read(first.run_dir.join("manifest.json")).unwrap();
    let second = run_daily(&cfg, d).unwrap();
    assert!(second.reused);
    assert_eq!(second.run_dir, first.run_dir);
    assert_eq!(second.estimates, first.estimates);
    assert_eq!(fs::read(first.run_dir.join("manifest.json")).unwrap(), manifest);

    // A different config lands in its own directory.
    let other = load_config(&common::write_config(root.path(), &config(1_000, NO_GATE))).unwrap();
    let third = run_daily(&other, d).unwrap();
    assert_ne!(third.run_dir, first.run_dir);

    let est = first.run_dir.join("estimates.jsonl");
    let mut text = fs::read_to_string(&est).unwrap();
    text = text.replacen("\"theta_hat\":0.", "\"theta_hat\":1.", 1);
    fs::write(&est, text).unwrap();
    assert!(matches!(verify_lineage(&first.run_dir), Err(Error::Lineage { .. })));
}

#[test]
fn daily_samples_differ_but_runs_repeat() {
    let pop = common::population(20_000, 0.01, 8);
    let root = tempfile::tempdir().unwrap();
    let days: Vec<_> = (0..2).map(|i| common::day("2026-06-10") + Duration::days(i)).collect();
    common::write_logs(root.path(), &pop, &days);
    let cfg = load_config(&common::write_config(root.path(), &config(1_000, NO_GATE))).unwrap();
    let a = run_daily(&cfg, days[0]).unwrap();
    let b = run_daily(&cfg, days[1]).unwrap();
    assert_ne!(a.estimates[0].sample_id, b.estimates[0].sample_id);
}

#[test]
fn quality_gate_blocks_the_run() {
    let pop = common::population(5_000, 0.01, 9);
    let root = tempfile::tempdir().unwrap();
    let d = common::day("2026-06-03");
    common::write_logs(root.path(), &pop, &[d]);
    common::write_gold(
        root.path(),
        2_000,
        MockRemoteSpec {
            sensitivity: 0.6,
            false_positive_rate: 0.2,
            abstain_rate: 0.0,
            latency_ms: 0.0,
            seed: 4,
        },
    );
    let gate = "\n[quality]\ngold_set = \"gold.jsonl\"\nthresholds = { min_recall = 0.8, max_false_positive_rate = 0.1 }\n";
    let cfg = load_config(&common::write_config(root.path(), &config(500, gate))).unwrap();
    match run_daily(&cfg, d) {
        Err(e @ Error::GateFailed(_)) => {
            assert_eq!(e.exit_code(), exit_code::GATE);
            let msg = e.to_string();
            assert!(msg.contains("recall") && msg.contains("false_positive_rate"), "{msg}");
        }
        other => panic!("expected gate failure, got {other:?}"),
    }
    assert!(!root.path().join("out/runs").exists());
}

#[test]
fn malformed_logs_abort_with_line_report() {
    let root = tempfile::tempdir().unwrap();
    let d = common::day("2026-06-04");
    let pop = common::population(200, 0.1, 10);
    common::write_logs(root.path(), &pop, &[d]);
    let log = root.path().join(format!("logs/{d}.jsonl"));
    let mut text = fs::read_to_string(&log).unwrap();
    text.push_str("{\"content_id\":\"c0\",\"impressions\":5}\nnot json\n{\"content_id\":\"z\",\"impressions\":-1}\n");
    fs::write(&log, text).unwrap();

    let strict = load_config(&common::write_config(root.path(), &config(50, NO_GATE))).unwrap();
    match run_daily(&strict, d) {
        Err(e @ Error::Ingestion(_)) => {
            assert_eq!(e.exit_code(), exit_code::INGESTION);
            let msg = e.to_string();
            assert!(msg.contains("line 201") && msg.contains("line 202") && msg.contains("line 203"), "{msg}");
        }
        other => panic!("expected ingestion failure, got {other:?}"),
    }
    let lenient = config(50, &format!("{NO_GATE}\n[ingest]\nmax_error_rate = 0.05\n"));
    let cfg = load_config(&common::write_config(root.path(), &lenient)).unwrap();
    let out = run_daily(&cfg, d).unwrap();
    assert_eq!(out.ingest.errors.len(), 3);
    assert_eq!(out.ingest.accepted, 200);
}

#[test]
fn config_issues_are_aggregated() {
    let root = tempfile::tempdir().unwrap();
    let body = config(100, "\n[quality]\nenabled = true\n").replace("seed = 19", "seed = 19\nepsilon = 0.0");
    let p = common::write_config(root.path(), &body);
    match load_config(&p) {
        Err(Error::Config(issues)) => {
            let facets: Vec<_> = issues.iter().map(|i| (i.facet, i.field.as_str())).collect();
            assert!(facets.contains(&("sampling", "epsilon")), "{facets:?}");
            assert!(issues.iter().any(|i| i.facet == "quality"), "{facets:?}");
            assert!(issues.len() >= 2);
        }
        other => panic!("expected config issues, got {other:?}"),
    }
    assert!(MetricConfig::from_toml("[policy]\nid = \"x\"\nsurprise = 1\n").is_err());
}

#[test]
fn dashboard_rows_hold_their_intervals() {
    let pop = common::population(10_000, 0.02, 11);
    let root = tempfile::tempdir().unwrap();
    let days: Vec<_> = (0..8).map(|i| common::day("2026-06-20") + Duration::days(i)).collect();
    common::write_logs(root.path(), &pop, &days);
    let body = config(600, &format!("{NO_GATE}\n[alerting]\nenabled = true\n")).replace("dir = \"out\"", "dir = \"out\"\ndashboard = true");
    let cfg = load_config(&common::write_config(root.path(), &body)).unwrap();
    let mut last = None;
    for d in &days {
        last = Some(run_daily(&cfg, *d).unwrap());
    }
    let alert = last.unwrap().alert.expect("alerting enabled");
    assert_eq!(alert.status, prevalence::alerting::AlertStatus::NoDecision);

    let mut rows = csv::Reader::from_path(root.path().join("out/dashboard/p_timeseries.csv")).unwrap();
    let recs: Vec<_> = rows.records().map(Result::unwrap).collect();
    assert_eq!(recs.len(), 8);
    for r in &recs {
        let (lo, th, hi): (f64, f64, f64) = (r[2].parse().unwrap(), r[1].parse().unwrap(), r[3].parse().unwrap());
        assert!(lo <= th && th <= hi);
    }
    assert!(recs[..6].iter().all(|r| r[5].is_empty()));
    assert!(recs[6..].iter().all(|r| !r[5].is_empty()));
    let pivot = fs::read_to_string(root.path().join("out/dashboard/p_segments.csv")).unwrap();
    assert_eq!(pivot.lines().count(), 1 + 8 * 2);
}

fn scored(pop: &prevalence::simlab::SimPopulation) -> (Vec<prevalence::sampler::ContentRecord>, HashMap<String, f64>) {
    let recs = pop.to_records();
    let scores = recs.iter().map(|r| (r.content_id.clone(), r.score.unwrap())).collect();
    (recs, scores)
}

#[test]
fn identical_scores_give_identical_estimates() {
    let pop = common::population(20_000, 0.01, 12);
    let (recs, scores) = scored(&pop);
    let oracle = SyntheticOracle::new(pop.truth(), "t");
    let sampling = SamplingConfig { sample_size: 1_000, seed: 1, ..SamplingConfig::default() };
    let r = compare_scorings(&recs, &scores, &scores, &sampling, &oracle, 1.96, false).unwrap();
    assert_eq!(r.previous.sample_id, r.candidate.sample_id);
    assert_eq!(r.previous.theta_hat, r.candidate.theta_hat);
    assert_eq!(r.agreement.difference, 0.0);

    let mut partial = scores.clone();
    partial.remove("c17");
    match compare_scorings(&recs, &scores, &partial, &sampling, &oracle, 1.96, false) {
        Err(e @ Error::MissingScores(_)) => assert!(e.to_string().contains("c17")),
        other => panic!("expected missing scores, got {other:?}"),
    }
}

#[test]
fn permuted_scores_agree_in_repeated_runs() {
    let pop = common::population(20_000, 0.01, 13);
    let (recs, scores) = scored(&pop);
    let oracle = SyntheticOracle::new(pop.truth(), "t");
    let ids: Vec<&String> = recs.iter().map(|r| &r.content_id).collect();
    let mut agree = 0;
    for rep in 0..200u64 {
        let mut values: Vec<f64> = ids.iter().map(|id| scores[*id]).collect();
        values.shuffle(&mut ChaCha8Rng::seed_from_u64(rep));
        let permuted: HashMap<String, f64> = ids.iter().map(|id| (*id).clone()).zip(values).collect();
        let sampling = SamplingConfig { sample_size: 2_000, seed: 1_000 + rep, ..SamplingConfig::default() };
        let r = compare_scorings(&recs, &scores, &permuted, &sampling, &oracle, 1.96, false).unwrap();
        agree += r.agreement.agree as usize;
    }
    assert!(agree >= 186, "agreement in {agree} of 200");
}

#[test]
fn constant_scores_agree_but_widen_the_interval() {
    let pop = common::population(100_000, 0.005, 14);
    let (recs, scores) = scored(&pop);
    let flat: HashMap<String, f64> = scores.keys().map(|k| (k.clone(), 0.5)).collect();
    let oracle = SyntheticOracle::new(pop.truth(), "t");
    let sampling = SamplingConfig { sample_size: 5_000, seed: 5, ..SamplingConfig::default() };
    let r = compare_scorings(&recs, &scores, &flat, &sampling, &oracle, 1.96, true).unwrap();
    assert!(r.agreement.agree, "{:?}", r.agreement);
    assert!(r.agreement.ci_width_ratio > 1.0, "{:?}", r.agreement);
    let (_, only) = r.impressions_only.unwrap();
    assert!(only.agree && only.ci_width_ratio > 1.0);
}

fn cli(root: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_prevalence"))
        .current_dir(root)
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn cli_exit_codes() {
    let pop = common::population(5_000, 0.02, 15);
    let root = tempfile::tempdir().unwrap();
    let r = root.path();
    let d = "2026-06-05";
    common::write_logs(r, &pop, &[common::day(d)]);
    common::write_config(r, &config(300, NO_GATE));

    let (code, stdout, _) = cli(r, &["validate", "--config", "metric.toml"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("config hash"));

    let (code, stdout, stderr) = cli(r, &["run", "--config", "metric.toml", "--day", d]);
    assert_eq!(code, 0, "{stderr}");
    let run_dir = stdout.split_whitespace().find(|w| w.starts_with("out/runs/")).unwrap().to_string();
    assert_eq!(cli(r, &["replay", "--run-dir", &run_dir]).0, 0);
    assert_eq!(cli(r, &["emit-dashboard", "--config", "metric.toml"]).0, 0);
    assert!(r.join("out/dashboard/p_timeseries.csv").exists());

    fs::write(r.join("bad.toml"), "[policy]\nid = 3\n").unwrap();
    assert_eq!(cli(r, &["validate", "--config", "bad.toml"]).0, exit_code::CONFIG);

    common::write_gold(
        r,
        500,
        MockRemoteSpec { sensitivity: 0.5, false_positive_rate: 0.3, abstain_rate: 0.0, latency_ms: 0.0, seed: 2 },
    );
    let gated = config(300, "\n[quality]\ngold_set = \"gold.jsonl\"\nthresholds = { min_accuracy = 0.9 }\n");
    fs::write(r.join("gated.toml"), gated).unwrap();
    assert_eq!(cli(r, &["run", "--config", "gated.toml", "--day", d]).0, exit_code::GATE);

    fs::write(r.join("logs/2026-06-06.jsonl"), "garbage\n").unwrap();
    assert_eq!(cli(r, &["run", "--config", "metric.toml", "--day", "2026-06-06"]).0, exit_code::INGESTION);

    // Labels that do not cover the sampled units.
    let short: Vec<_> = pop.label_rows("truth").into_iter().take(10).collect();
    jsonl::write(&r.join("labels.jsonl"), short).unwrap();
    let (code, _, stderr) = cli(r, &["run", "--config", "metric.toml", "--day", d]);
    assert_eq!(code, exit_code::ESTIMATION, "{stderr}");

    let (code, _, stderr) = cli(
        r,
        &["simulate", "--n", "3000", "--sample-sizes", "200,100000", "--trials", "5", "--out", "fig.csv"],
    );
    assert_eq!(code, 0, "{stderr}");
    let fig = fs::read_to_string(r.join("fig.csv")).unwrap();
    assert!(fig.starts_with("m,scheme,W,W_rel,bias,positive_fraction"));
}

#[test]
fn known_denominator_estimates_are_published_for_segments() {
    let pop = common::population(20_000, 0.02, 16);
    let root = tempfile::tempdir().unwrap();
    let d = common::day("2026-06-07");
    common::write_logs(root.path(), &pop, &[d]);
    let cfg = load_config(&common::write_config(root.path(), &config(2_000, NO_GATE))).unwrap();
    let out = run_daily(&cfg, d).unwrap();
    let feed = published(&out.estimates, d, "feed").unwrap();
    assert_eq!(feed.estimator, EstimatorKind::HtKnownDenominator);
    assert_eq!(feed.denominator as u64, out.ingest.segment_totals["feed"]);
}
