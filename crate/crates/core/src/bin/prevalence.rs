use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{Duration, NaiveDate};
use clap::{Args, Parser, Subcommand};

use prevalence::pipeline::{
    compare_score_versions, emit_dashboard_data, evaluate_daily_alert, load_config, run_daily, verify_lineage,
    write_alert, RunIndex,
};
use prevalence::simlab::{
    emit_figure_data, generate_population, positive_rate_lift, run_trials, SimExperimentSpec, SimPopulationSpec,
    SimScheme,
};
use prevalence::estimator::ALL_SEGMENTS;
use prevalence::{jsonl, Error, Result};

#[derive(Parser)]
#[command(name = "prevalence", version, about = "Exposure-weighted prevalence measurement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a metric config and print its hash.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the daily pipeline for one day or a range of days.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        day: NaiveDate,
        /// Last day of a range (inclusive).
        #[arg(long)]
        until: Option<NaiveDate>,
    },
    /// Monte Carlo study of CI width versus sample size.
    #[command(alias = "simlab")]
    Simulate(SimulateArgs),
    /// Evaluate the weekly alert for a day from published estimates.
    Alert {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        day: NaiveDate,
    },
    /// Check that two score versions give consistent point estimates.
    CompareScores {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        day: NaiveDate,
        #[arg(long)]
        previous: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long, default_value_t = 1.96)]
        z: f64,
        /// Also run the impressions-only design (score exponent 0).
        #[arg(long)]
        impressions_only: bool,
    },
    /// Write time-series and segment pivot CSVs for all indexed runs.
    EmitDashboard {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `{output}/dashboard`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Recompute a run's estimates from its lineage and compare.
    Replay {
        #[arg(long)]
        run_dir: PathBuf,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 300_000)]
    n: usize,
    #[arg(long, default_value_t = 0.005)]
    base_rate: f64,
    #[arg(long, default_value_t = 0.93)]
    p_small: f64,
    #[arg(long, default_value_t = 1.4)]
    pareto_alpha: f64,
    #[arg(long, default_value_t = 10.0)]
    pareto_xm: f64,
    #[arg(long, num_args = 2, default_values_t = [1.5, 6.0])]
    beta_neg: Vec<f64>,
    #[arg(long, num_args = 2, default_values_t = [6.0, 1.5])]
    beta_pos: Vec<f64>,
    #[arg(long, default_value_t = 42)]
    seed_pop: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [2_000, 5_000, 10_000, 20_000, 50_000, 100_000])]
    sample_sizes: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 123)]
    seed_mc: u64,
    /// Share each trial's random stream across schemes.
    #[arg(long)]
    paired: bool,
    /// Also run the without-replacement ML design.
    #[arg(long)]
    ppswor: bool,
    /// Figure data output (CSV).
    #[arg(long, default_value = "figure_data.csv")]
    out: PathBuf,
    /// Also write the population as an impression log and label file.
    #[arg(long)]
    emit_population: Option<PathBuf>,
}

fn days(from: NaiveDate, until: Option<NaiveDate>) -> Vec<NaiveDate> {
    let end = until.unwrap_or(from);
    let mut out = Vec::new();
    let mut d = from;
    while d <= end {
        out.push(d);
        d += Duration::days(1);
    }
    out
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let pop_spec = SimPopulationSpec {
        n: a.n,
        base_rate: a.base_rate,
        p_small: a.p_small,
        pareto_alpha: a.pareto_alpha,
        pareto_xm: a.pareto_xm,
        beta_neg: (a.beta_neg[0], a.beta_neg[1]),
        beta_pos: (a.beta_pos[0], a.beta_pos[1]),
        seed_pop: a.seed_pop,
    };
    let mut schemes = vec![SimScheme::Pps, SimScheme::MlPps];
    if a.ppswor {
        schemes.push(SimScheme::MlPpswor);
    }
    let exp = SimExperimentSpec {
        sample_sizes: a.sample_sizes,
        trials: a.trials,
        schemes,
        nu: a.nu,
        epsilon: a.epsilon,
        seed_mc: a.seed_mc,
        paired: a.paired,
    };
    let pop = generate_population(&pop_spec)?;
    if let Some(dir) = &a.emit_population {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
        jsonl::write(&dir.join("impressions.jsonl"), pop.to_records())?;
        jsonl::write(&dir.join("labels.jsonl"), pop.label_rows("ground-truth"))?;
    }
    let result = run_trials(&pop, &exp)?;
    println!("true prevalence {:.6}", result.true_prevalence);
    println!("{:>8} {:>10} {:>12} {:>8} {:>12} {:>10}", "m", "scheme", "W", "W_rel", "bias", "pos_frac");
    for c in &result.cells {
        let rel = c.width_rel.map(|r| format!("{r:.3}")).unwrap_or_else(|| "-".into());
        println!(
            "{:>8} {:>10} {:>12.4e} {:>8} {:>12.3e} {:>10.4}",
            c.m, c.scheme, c.width, rel, c.bias, c.mean_positive_fraction
        );
    }
    if let Ok(lifts) = positive_rate_lift(&result) {
        for l in lifts {
            println!("lift m={} {:.3} (excluded trials: {})", l.m, l.lift, l.trials_excluded);
        }
    }
    emit_figure_data(&result, &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!("ok: policy `{}`, config hash {}", cfg.policy.id, cfg.hash());
        }
        Command::Run { config, day, until } => {
            let cfg = load_config(&config)?;
            for d in days(day, until) {
                let out = run_daily(&cfg, d)?;
                let head = prevalence::pipeline::published(&out.estimates, d, ALL_SEGMENTS).expect("global estimate");
                let alert = out
                    .alert
                    .as_ref()
                    .map(|a| format!("{:?}", a.status))
                    .unwrap_or_else(|| "-".into());
                println!(
                    "{d} theta={:.6} ci=[{:.6}, {:.6}] ess={:.1} alert={alert} {}{}",
                    head.theta_hat,
                    head.ci_low,
                    head.ci_high,
                    head.ess,
                    out.run_dir.display(),
                    if out.reused { " (unchanged)" } else { "" }
                );
                for w in &out.warnings {
                    eprintln!("warning: {w}");
                }
            }
        }
        Command::Simulate(a) => simulate(a)?,
        Command::Alert { config, day } => {
            let cfg = load_config(&config)?;
            let out = cfg.output_dir();
            let index = RunIndex::load(&out, &cfg.policy.id)?;
            match evaluate_daily_alert(&cfg, &index, day)? {
                Some(d) => {
                    write_alert(&out, &cfg.policy.id, day, &d)?;
                    print_json(&d)?;
                }
                None => {
                    return Err(Error::InsufficientData(
                        "no sigma configured and no daily variances available".into(),
                    ))
                }
            }
        }
        Command::CompareScores {
            config,
            day,
            previous,
            candidate,
            z,
            impressions_only,
        } => {
            let cfg = load_config(&config)?;
            let report = compare_score_versions(&cfg, day, &previous, &candidate, z, impressions_only)?;
            print_json(&report)?;
        }
        Command::EmitDashboard { config, out_dir } => {
            let cfg = load_config(&config)?;
            let out = cfg.output_dir();
            let index = RunIndex::load(&out, &cfg.policy.id)?;
            let dir = out_dir.unwrap_or_else(|| out.join("dashboard"));
            for f in emit_dashboard_data(&index.estimates(&out)?, &dir)? {
                println!("wrote {} and {}", f.timeseries.display(), f.segments.display());
            }
        }
        Command::Replay { run_dir } => {
            verify_lineage(Path::new(&run_dir))?;
            println!("ok: estimates in {} replay exactly", run_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
