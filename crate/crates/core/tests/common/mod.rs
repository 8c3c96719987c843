#![allow(dead_code)]

use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use prevalence::jsonl;
use prevalence::labeling::{GoldRow, MockRemote, MockRemoteSpec};
use prevalence::sampler::{ContentRecord, Label};
use prevalence::simlab::{generate_population, SimPopulation, SimPopulationSpec};

pub fn day(s: &str) -> NaiveDate {
    s.parse().expect("valid date")
}

/// Splits each item's views over `feed` and `search`. Positives lean
/// toward search so the two segments have different prevalence.
pub fn segmented_records(pop: &SimPopulation) -> Vec<ContentRecord> {
    pop.items
        .iter()
        .enumerate()
        .map(|(i, it)| {
            let share = if it.positive { 3 } else { 1 };
            let search = it.impressions * share / 4;
            let feed = it.impressions - search;
            ContentRecord::new(SimPopulation::content_id(i), it.impressions)
                .with_score(it.score)
                .with_segments([("feed", feed), ("search", search)].into_iter().filter(|(_, v)| *v > 0))
        })
        .collect()
}

/// Writes `logs/{day}.jsonl` for every day and `labels.jsonl` with the
/// population's ground truth.
pub fn write_logs(root: &Path, pop: &SimPopulation, days: &[NaiveDate]) {
    fs::create_dir_all(root.join("logs")).unwrap();
    let records = segmented_records(pop);
    for d in days {
        jsonl::write(&root.join(format!("logs/{d}.jsonl")), &records).unwrap();
    }
    jsonl::write(&root.join("labels.jsonl"), pop.label_rows("truth")).unwrap();
}

/// Gold set of `n` fresh items (half positive) labeled by a mock labeler
/// with `spec`; ids are disjoint from the population's.
pub fn write_gold(root: &Path, n: usize, spec: MockRemoteSpec) {
    let labeler = MockRemote::new(Default::default(), spec, "gold").unwrap();
    let rows: Vec<GoldRow> = (0..n)
        .map(|i| {
            let id = format!("gold{i}");
            let truth = i % 2 == 0;
            GoldRow {
                prediction: labeler.noisy_label(&id, truth),
                content_id: id,
                truth: Label::from_bool(truth),
            }
        })
        .collect();
    jsonl::write(&root.join("gold.jsonl"), rows).unwrap();
}

pub fn population(n: usize, base_rate: f64, seed_pop: u64) -> SimPopulation {
    generate_population(&SimPopulationSpec {
        n,
        base_rate,
        seed_pop,
        ..SimPopulationSpec::default()
    })
    .unwrap()
}

pub fn write_config(root: &Path, body: &str) -> std::path::PathBuf {
    let p = root.join("metric.toml");
    fs::write(&p, body).unwrap();
    p
}
