// A noisy labeler measured on a gold set, gated on quality, and the
// daily estimate corrected for its sensitivity and false-positive rate.

use prevalence::estimator::{hh_ratio, rogan_gladen_correct};
use prevalence::labeling::{
    evaluate_gold_set, label_sample, quality_gate, MockRemote, MockRemoteSpec, QualityThresholds,
};
use prevalence::sampler::{compute_weight, ppswr_sample, Label, SamplingConfig};
use prevalence::simlab::{generate_population, SimPopulationSpec};

pub fn run_example() -> prevalence::Result<()> {
    let pop = generate_population(&SimPopulationSpec {
        n: 60_000,
        base_rate: 0.02,
        ..SimPopulationSpec::default()
    })?;
    let truth = pop.truth();
    let labeler = MockRemote::new(
        truth.clone(),
        MockRemoteSpec {
            sensitivity: 0.9,
            false_positive_rate: 0.05,
            abstain_rate: 0.0,
            latency_ms: 40.0,
            seed: 17,
        },
        "mock/v1",
    )?;

    // Gold set: a disjoint id range of the same generator, labeled twice.
    let gold_pop = generate_population(&SimPopulationSpec {
        n: 4_000,
        base_rate: 0.3,
        seed_pop: 99,
        ..SimPopulationSpec::default()
    })?;
    let (mut preds, mut truths) = (vec![], vec![]);
    for (i, item) in gold_pop.items.iter().enumerate() {
        let id = format!("gold{i}");
        match labeler.noisy_label(&id, item.positive) {
            Label::Abstain => continue,
            l => preds.push(l == Label::Positive),
        }
        truths.push(item.positive);
    }
    let report = evaluate_gold_set(&preds, &truths)?;
    let gate = quality_gate(
        &report,
        &QualityThresholds {
            min_recall: Some(0.8),
            max_false_positive_rate: Some(0.1),
            min_gold_size: Some(1_000),
            ..QualityThresholds::default()
        },
    );
    println!(
        "gold n={} recall {:.3} fpr {:.3} gate {}",
        report.n,
        report.recall.as_ref().map_or(f64::NAN, |r| r.value),
        report.false_positive_rate.as_ref().map_or(f64::NAN, |r| r.value),
        if gate.pass { "pass" } else { "FAIL" }
    );
    if !gate.pass {
        return Err(prevalence::Error::GateFailed(gate.reasons));
    }

    let config = SamplingConfig {
        sample_size: 20_000,
        gamma: 0.0,
        seed: 5,
        ..SamplingConfig::default()
    };
    let weighted = pop
        .to_records()
        .into_iter()
        .map(|r| Ok((r.clone(), compute_weight(&r, &config, 1.0)?)))
        .collect::<prevalence::Result<Vec<_>>>()?;
    let draws = ppswr_sample(&weighted, config.sample_size, config.seed)?;
    let labeled = label_sample(draws, &labeler)?;
    let raw = hh_ratio(&labeled.draws)?;
    let corrected = rogan_gladen_correct(&raw, &report.labeler_quality()?)?;

    println!("true prevalence {:.4}", pop.true_prevalence());
    println!("labeler-based   {:.4} [{:.4}, {:.4}]", raw.theta_hat, raw.ci_low, raw.ci_high);
    println!(
        "corrected       {:.4} [{:.4}, {:.4}]",
        corrected.theta_hat, corrected.ci_low, corrected.ci_high
    );
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
