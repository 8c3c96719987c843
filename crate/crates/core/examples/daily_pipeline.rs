// The config-driven daily batch end to end: two weeks of logs, one run per
// day with lineage on disk, the weekly alert, dashboard files and a replay
// of one run from its lineage alone.

use std::fs;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use prevalence::jsonl;
use prevalence::pipeline::{load_config, run_daily, verify_lineage};
use prevalence::sampler::ContentRecord;
use prevalence::simlab::{generate_population, SimPopulationSpec};

const CONFIG: &str = r#"
[policy]
id = "spam"
taxonomy = ["integrity", "spam"]

[sources]
impressions = "logs/{day}.jsonl"
labels = "labels.jsonl"

[sampling]
sample_size = 3000
seed = 21

[labeler]
provider = "synthetic_oracle"
model = "oracle"
prompt_version = "v1"

[quality]
enabled = false

[output]
dir = "out"
dashboard = true

[segments]
keys = ["feed", "search"]
known_denominators = true
"#;

fn write_day(root: &Path, day: NaiveDate, records: &[ContentRecord]) -> prevalence::Result<()> {
    jsonl::write(&root.join(format!("logs/{day}.jsonl")), records)
}

pub fn run_example() -> prevalence::Result<()> {
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = tmp.path();
    fs::create_dir_all(root.join("logs")).expect("logs dir");
    fs::write(root.join("metric.toml"), CONFIG).expect("config");

    let pop = generate_population(&SimPopulationSpec {
        n: 30_000,
        ..SimPopulationSpec::default()
    })?;
    jsonl::write(&root.join("labels.jsonl"), pop.label_rows("truth"))?;
    let start = NaiveDate::from_ymd_opt(2026, 5, 1).unwrap();
    for d in 0..14 {
        // Split each item's views between two surfaces; rotate the split daily.
        let recs: Vec<ContentRecord> = pop
            .to_records()
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let search = (r.impressions * ((i as u64 + d) % 4)) / 4;
                let feed = r.impressions - search;
                let segs = [("feed", feed), ("search", search)];
                let seeded = ContentRecord::new(r.content_id.clone(), r.impressions)
                    .with_segments(segs.into_iter().filter(|(_, v)| *v > 0));
                match r.score {
                    Some(s) => seeded.with_score(s),
                    None => seeded,
                }
            })
            .collect();
        write_day(root, start + Duration::days(d as i64), &recs)?;
    }

    let cfg = load_config(&root.join("metric.toml"))?;
    println!("config hash {}", &cfg.hash()[..16]);
    println!("true prevalence {:.5}", pop.true_prevalence());
    let mut last = None;
    for d in 0..14 {
        let day = start + Duration::days(d);
        let out = run_daily(&cfg, day)?;
        let head = &out.estimates[0];
        println!(
            "{day} {:<10} {:.5} [{:.5}, {:.5}]",
            head.segment, head.theta_hat, head.ci_low, head.ci_high
        );
        last = Some(out);
    }
    let last = last.expect("ran at least one day");
    for e in last.estimates.iter().skip(1) {
        println!("  {:<7} {:<20} {:.5}", e.segment, e.estimator.to_string(), e.theta_hat);
    }
    if let Some(a) = &last.alert {
        println!(
            "alert {:?}: delta {:+.5}, threshold {:.5}",
            a.status,
            a.delta.unwrap_or(f64::NAN),
            a.threshold
        );
    }

    let again = run_daily(&cfg, start)?;
    println!("rerun of {start} reused existing lineage: {}", again.reused);
    verify_lineage(&last.run_dir)?;
    println!("replay of {} matches", last.run_dir.strip_prefix(root).unwrap().display());
    for f in fs::read_dir(root.join("out/dashboard")).expect("dashboard dir") {
        println!("dashboard file {}", f.expect("entry").file_name().to_string_lossy());
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
