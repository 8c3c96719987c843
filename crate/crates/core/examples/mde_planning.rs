// Sizing a weekly alert: the smallest week-over-week change a given daily
// noise level can detect, with autocorrelation, and the alert itself on a
// synthetic series with a step.

use chrono::NaiveDate;
use prevalence::alerting::{
    estimate_autocorrelation, evaluate_alert, mde_absolute, mde_relative, sensitivity_from_ess,
    variance_inflation, AlertRule, DailySeries, Detrend, MdePlan,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn run_example() -> prevalence::Result<()> {
    let theta = 0.004;
    let ess = 8_000.0;
    let s = sensitivity_from_ess(theta, ess)?;
    let sigma = s.half_width / 1.96;
    println!("daily half-width {:.5} at ess {ess}", s.half_width);
    println!("MDE abs (iid)    {:.5}", mde_absolute(sigma, 0.05, 0.8)?);
    println!("MDE rel (iid)    {:.1}%", 100.0 * mde_relative(s.half_width, theta, 0.05, 0.8)?);

    // AR(1) daily noise with a +50% step in the final week.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let noise = Normal::new(0.0, sigma).expect("sd is positive");
    let days = 70;
    let mut e = 0.0;
    let values: Vec<f64> = (0..days)
        .map(|d| {
            e = 0.4 * e + (1.0f64 - 0.16).sqrt() * noise.sample(&mut rng);
            let level = if d >= days - 7 { theta * 1.5 } else { theta };
            level + e
        })
        .collect();
    let start = NaiveDate::from_ymd_opt(2026, 1, 1).unwrap();
    let series = DailySeries::from_values(start, &values);

    let history = series.up_to(start + chrono::Duration::days(days as i64 - 8));
    let rho = estimate_autocorrelation(&history, 6, Detrend::Mean)?;
    let inflation = variance_inflation(&rho)?;
    println!("lag-1 autocorrelation {:.2}, inflation {:.2}", rho[0], inflation);

    for rule in [AlertRule::Significance, AlertRule::MdeThreshold] {
        let plan = MdePlan::new(sigma, 0.05, 0.8)?
            .with_inflation(inflation)?
            .with_baseline(theta)?
            .with_rule(rule);
        let d = evaluate_alert(&series, &plan)?;
        println!(
            "{rule:?}: delta {:+.5} vs threshold {:.5} (mde {:.5}) -> {:?}",
            d.delta.unwrap_or(f64::NAN),
            d.threshold, d.mde_abs, d.status
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
