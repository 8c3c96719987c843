// One-pass weighted reservoir sampling over a stream, split across shards
// and merged, followed by a Hajek estimate from the inclusion probabilities.

use prevalence::estimator::ht_hajek;
use prevalence::sampler::{ContentRecord, Label, PpsworSampler, SamplingConfig};

pub fn run_example() -> prevalence::Result<()> {
    let config = SamplingConfig {
        sample_size: 200,
        seed: 7,
        ..SamplingConfig::default()
    };
    // A toy day: every 40th item is violating and scored high.
    let stream: Vec<(ContentRecord, bool)> = (0..20_000u64)
        .map(|i| {
            let bad = i % 40 == 0;
            let score = if bad { 0.9 } else { 0.05 + (i % 7) as f64 / 20.0 };
            (ContentRecord::new(format!("c{i}"), 1 + i % 97).with_score(score), bad)
        })
        .collect();

    let mut shards: Vec<PpsworSampler> = (0..4)
        .map(|_| PpsworSampler::new(&config, 0.5))
        .collect::<prevalence::Result<_>>()?;
    for (i, (rec, _)) in stream.iter().enumerate() {
        shards[i % 4].offer(rec.clone())?;
    }
    let mut merged = shards.pop().unwrap().into_reservoir();
    for s in shards {
        merged = merged.merge(s.into_reservoir())?;
    }

    let mut single = PpsworSampler::new(&config, 0.5)?;
    for (rec, _) in &stream {
        single.offer(rec.clone())?;
    }
    assert_eq!(merged.keys(), single.reservoir().keys(), "sharding must not change the sample");

    let sample = merged.into_sample();
    println!(
        "kept {} of {} items, threshold {:.3e}",
        sample.draws.len(),
        sample.items_seen,
        sample.threshold.unwrap_or(f64::NAN)
    );
    let truth: std::collections::HashMap<_, _> = stream.iter().map(|(r, b)| (r.content_id.clone(), *b)).collect();
    let draws: Vec<_> = sample
        .draws
        .into_iter()
        .map(|d| {
            let label = Label::from_bool(truth[&d.content_id]);
            d.with_label(label)
        })
        .collect();
    let est = ht_hajek(&draws)?;

    let (num, den) = stream.iter().fold((0u64, 0u64), |(n, d), (r, b)| {
        (n + if *b { r.impressions } else { 0 }, d + r.impressions)
    });
    println!(
        "theta_hat {:.5} [{:.5}, {:.5}], truth {:.5}, ess {:.1}, positives in sample {:.1}%",
        est.theta_hat,
        est.ci_low,
        est.ci_high,
        num as f64 / den as f64,
        est.ess,
        100.0 * est.sample_positive_rate
    );
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
