// Per-surface drill-down from a single daily sample: the same draws give
// the global figure and every segment, either as a ratio or over the
// segment's exact impression total from the logs.

use prevalence::estimator::{
    estimate_segment, segment_estimate_known_denominator, WeightBasis, ALL_SEGMENTS,
};
use prevalence::labeling::{label_sample, SyntheticOracle};
use prevalence::sampler::{compute_weight, ppswr_sample, ContentRecord, SamplingConfig};

pub fn run_example() -> prevalence::Result<()> {
    // Violating items are mostly seen in search.
    let mut truth = std::collections::HashMap::new();
    let records: Vec<ContentRecord> = (0..30_000u64)
        .map(|i| {
            let bad = i % 50 == 0;
            truth.insert(format!("c{i}"), bad);
            let feed = 1 + i % 13;
            let search = if bad { 3 * feed } else { i % 3 };
            ContentRecord::new(format!("c{i}"), feed + search)
                .with_segments([("feed", feed), ("search", search)].into_iter().filter(|(_, v)| *v > 0))
                .with_score(if bad { 0.8 } else { 0.1 })
        })
        .collect();

    let config = SamplingConfig {
        sample_size: 4_000,
        seed: 3,
        ..SamplingConfig::default()
    };
    let weighted = records
        .iter()
        .map(|r| Ok((r.clone(), compute_weight(r, &config, 0.5)?)))
        .collect::<prevalence::Result<Vec<_>>>()?;
    let draws = ppswr_sample(&weighted, config.sample_size, config.seed)?;
    let labeled = label_sample(draws, &SyntheticOracle::new(truth.clone(), "truth"))?.draws;

    for seg in [ALL_SEGMENTS, "feed", "search"] {
        let (num, den) = records.iter().fold((0u64, 0u64), |(n, d), r| {
            let x = if seg == ALL_SEGMENTS {
                r.impressions
            } else {
                r.segment_impressions.get(seg).copied().unwrap_or(0)
            };
            (n + if truth[&r.content_id] { x } else { 0 }, d + x)
        });
        let ratio = estimate_segment(&labeled, seg, WeightBasis::DrawProbability)?;
        print!(
            "{seg:>7}: truth {:.4}  ratio {:.4} [{:.4}, {:.4}]",
            num as f64 / den as f64,
            ratio.theta_hat,
            ratio.ci_low,
            ratio.ci_high
        );
        if seg != ALL_SEGMENTS {
            let known = segment_estimate_known_denominator(&labeled, seg, den as f64)?;
            print!("  known-D {:.4} [{:.4}, {:.4}]", known.theta_hat, known.ci_low, known.ci_high);
        }
        println!();
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
