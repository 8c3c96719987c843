// A reduced version of the synthetic study: CI width of impressions-only
// versus score-weighted sampling across budgets, written as figure data.

use prevalence::simlab::{
    figure_data, generate_population, positive_rate_lift, run_trials, SimExperimentSpec, SimPopulationSpec,
};

pub fn run_example() -> prevalence::Result<()> {
    let pop = generate_population(&SimPopulationSpec {
        n: 40_000,
        ..SimPopulationSpec::default()
    })?;
    let spec = SimExperimentSpec {
        sample_sizes: vec![1_000, 4_000, 100_000],
        trials: 60,
        ..SimExperimentSpec::default()
    };
    let result = run_trials(&pop, &spec)?;
    println!("true prevalence {:.5}", result.true_prevalence);
    for c in &result.cells {
        println!(
            "m={:<6} {:<8} width {:.2e}  bias {:+.1e}  coverage {:.2}",
            c.m, c.scheme, c.width, c.bias, c.coverage
        );
    }
    for l in positive_rate_lift(&result)? {
        println!("m={:<6} positive-rate lift {:.2}x", l.m, l.lift);
    }
    let csv = figure_data(&result)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
