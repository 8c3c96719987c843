// Before promoting a new classifier, sample the same day under the old and
// new scores and check that the point estimates agree. Only efficiency
// should change, never the target.

use std::collections::HashMap;

use prevalence::labeling::SyntheticOracle;
use prevalence::pipeline::compare_scorings;
use prevalence::sampler::SamplingConfig;
use prevalence::simlab::{generate_population, SimPopulationSpec};

pub fn run_example() -> prevalence::Result<()> {
    let pop = generate_population(&SimPopulationSpec {
        n: 60_000,
        ..SimPopulationSpec::default()
    })?;
    let records = pop.to_records();
    let previous: HashMap<String, f64> = records
        .iter()
        .map(|r| (r.content_id.clone(), r.score.unwrap_or(0.5)))
        .collect();
    // A sharper candidate: pushes scores toward the truth.
    let truth = pop.truth();
    let candidate: HashMap<String, f64> = previous
        .iter()
        .map(|(id, s)| {
            let target = if truth[id] { 1.0 } else { 0.0 };
            (id.clone(), (0.5 * s + 0.5 * target).clamp(1e-3, 1.0))
        })
        .collect();

    let sampling = SamplingConfig {
        sample_size: 5_000,
        seed: 8,
        ..SamplingConfig::default()
    };
    let oracle = SyntheticOracle::new(truth, "truth");
    let report = compare_scorings(&records, &previous, &candidate, &sampling, &oracle, 1.96, true)?;
    println!("true prevalence {:.5}", pop.true_prevalence());
    for s in [&report.previous, &report.candidate] {
        println!(
            "{:<10} {:.5} [{:.5}, {:.5}] ess {:.0}",
            s.name, s.theta_hat, s.ci_low, s.ci_high, s.ess
        );
    }
    let a = &report.agreement;
    println!(
        "difference {:+.5} vs {:.5} -> {}; width ratio {:.2}",
        a.difference,
        report.z * a.combined_se,
        if a.agree { "consistent" } else { "INCONSISTENT" },
        a.ci_width_ratio
    );
    if let Some((u, ag)) = &report.impressions_only {
        println!("impressions-only {:.5}, width ratio vs previous {:.2}", u.theta_hat, ag.ci_width_ratio);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
