// With-replacement draws proportional to `impressions * score`, labeled by
// an oracle, and the ratio estimate with its Taylor interval.

use prevalence::estimator::{hh_ratio, kish_ess};
use prevalence::labeling::{label_sample, SyntheticOracle};
use prevalence::sampler::{compute_weight, ppswr_sample, SamplingConfig};
use prevalence::simlab::{generate_population, SimPopulationSpec};

pub fn run_example() -> prevalence::Result<()> {
    let pop = generate_population(&SimPopulationSpec {
        n: 50_000,
        ..SimPopulationSpec::default()
    })?;
    let config = SamplingConfig {
        sample_size: 5_000,
        seed: 11,
        ..SamplingConfig::default()
    };
    let weighted = pop
        .to_records()
        .into_iter()
        .map(|r| {
            let w = compute_weight(&r, &config, 1.0)?;
            Ok((r, w))
        })
        .collect::<prevalence::Result<Vec<_>>>()?;
    let draws = ppswr_sample(&weighted, config.sample_size, config.seed)?;

    let oracle = SyntheticOracle::new(pop.truth(), "truth");
    let labeled = label_sample(draws, &oracle)?;
    let est = hh_ratio(&labeled.draws)?;

    println!("true prevalence   {:.5}", pop.true_prevalence());
    println!(
        "estimate          {:.5} +/- {:.5}",
        est.theta_hat,
        1.96 * est.standard_error().unwrap_or(f64::NAN)
    );
    println!("kish ess          {:.0} of {} draws", kish_ess(&labeled.draws)?, est.n_draws);
    println!("positive draws    {:.2}%", 100.0 * est.sample_positive_rate);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
