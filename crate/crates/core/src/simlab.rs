//! Synthetic Monte Carlo study of CI width versus label budget.
//!
//! A heavy-tailed population with a rare positive class is generated once.
//! For every sample size and scheme, independent with-replacement samples are
//! drawn and the ratio estimate recorded; the spread between the 2.5% and
//! 97.5% quantiles of those estimates is the empirical CI width.

use std::collections::HashMap;
use std::hash::Hasher;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Pareto};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use siphasher::sip::SipHasher13;

use crate::error::{Error, Result};
use crate::estimator::{estimate_from_observations, EstimatorKind, Observation};
use crate::labeling::LabelRow;
use crate::numeric::{self, quantile_type7};
use crate::sampler::{unit_interval_open_closed, weight_from_parts, ContentRecord, Label, PpswrDesign};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimPopulationSpec {
    pub n: usize,
    pub base_rate: f64,
    /// Mass of the Unif{1..10} impressions component.
    pub p_small: f64,
    pub pareto_alpha: f64,
    pub pareto_xm: f64,
    /// Score distribution of negatives, Beta(a, b).
    pub beta_neg: (f64, f64),
    pub beta_pos: (f64, f64),
    pub seed_pop: u64,
}

impl Default for SimPopulationSpec {
    fn default() -> Self {
        Self {
            n: 300_000,
            base_rate: 0.005,
            p_small: 0.93,
            pareto_alpha: 1.4,
            pareto_xm: 10.0,
            beta_neg: (1.5, 6.0),
            beta_pos: (6.0, 1.5),
            seed_pop: 42,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimItem {
    pub positive: bool,
    pub impressions: u64,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimPopulation {
    pub items: Vec<SimItem>,
}

/// Generates the population item by item from one seeded stream.
///
/// Per item: label ~ Bernoulli(base_rate); impressions ~ Unif{1..10} with
/// probability `p_small`, otherwise the tail draw `x_m * U^(-1/alpha)`
/// (that is `x_m (1 + Lomax(alpha))`, U uniform on (0, 1]) rounded to the
/// nearest integer and floored at 1; score ~ Beta by label.
pub fn generate_population(spec: &SimPopulationSpec) -> Result<SimPopulation> {
    if spec.n == 0 {
        return Err(Error::EmptyPopulation);
    }
    for (name, v) in [("base_rate", spec.base_rate), ("p_small", spec.p_small)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::param(name, format!("{v} outside [0, 1]")));
        }
    }
    let tail = Pareto::new(spec.pareto_xm, spec.pareto_alpha)
        .map_err(|e| Error::param("pareto", e.to_string()))?;
    let beta = |(a, b): (f64, f64)| Beta::new(a, b).map_err(|e| Error::param("beta", e.to_string()));
    let neg = beta(spec.beta_neg)?;
    let pos = beta(spec.beta_pos)?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed_pop);
    let items = (0..spec.n)
        .map(|_| {
            let positive = rng.random_bool(spec.base_rate);
            let impressions = if rng.random_bool(spec.p_small) {
                rng.random_range(1..=10u64)
            } else {
                (tail.sample(&mut rng).round() as u64).max(1)
            };
            let score = if positive { pos.sample(&mut rng) } else { neg.sample(&mut rng) };
            SimItem {
                positive,
                impressions,
                score,
            }
        })
        .collect();
    Ok(SimPopulation { items })
}

impl SimPopulation {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn content_id(index: usize) -> String {
        format!("c{index}")
    }

    /// Exact violative-impression share, from integer totals.
    pub fn true_prevalence(&self) -> f64 {
        let (pos, all) = self.items.iter().fold((0u128, 0u128), |(p, a), it| {
            let c = it.impressions as u128;
            (p + if it.positive { c } else { 0 }, a + c)
        });
        pos as f64 / all as f64
    }

    /// Impression log records with ids `c{index}`.
    pub fn to_records(&self) -> Vec<ContentRecord> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, it)| ContentRecord::new(Self::content_id(i), it.impressions).with_score(it.score))
            .collect()
    }

    pub fn truth(&self) -> HashMap<String, bool> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, it)| (Self::content_id(i), it.positive))
            .collect()
    }

    /// Ground truth as a label file.
    pub fn label_rows(&self, provider_version: &str) -> Vec<LabelRow> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, it)| LabelRow {
                content_id: Self::content_id(i),
                label: Label::from_bool(it.positive),
                provider_version: provider_version.to_string(),
                confidence: None,
                usage: Default::default(),
            })
            .collect()
    }

    /// Same units with every impression count multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> SimPopulation {
        SimPopulation {
            items: self
                .items
                .iter()
                .map(|it| SimItem {
                    impressions: it.impressions * factor,
                    ..*it
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SimScheme {
    /// Impressions only (score exponent 0), with replacement.
    #[serde(rename = "PPS")]
    Pps,
    /// Impressions times score (score exponent 1), with replacement.
    #[serde(rename = "ML_PPS")]
    MlPps,
    /// Impressions times score, without replacement via reservoir keys,
    /// Hajek estimate with approximate inclusion probabilities.
    #[serde(rename = "ML_PPSWOR")]
    MlPpswor,
}

impl SimScheme {
    pub fn gamma(self) -> f64 {
        match self {
            SimScheme::Pps => 0.0,
            SimScheme::MlPps | SimScheme::MlPpswor => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SimScheme::Pps => "PPS",
            SimScheme::MlPps => "ML_PPS",
            SimScheme::MlPpswor => "ML_PPSWOR",
        }
    }

    fn tag(self) -> u64 {
        match self {
            SimScheme::Pps => 0,
            SimScheme::MlPps => 1,
            SimScheme::MlPpswor => 2,
        }
    }
}

impl std::fmt::Display for SimScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimExperimentSpec {
    pub sample_sizes: Vec<usize>,
    pub trials: usize,
    pub schemes: Vec<SimScheme>,
    pub nu: f64,
    pub epsilon: f64,
    pub seed_mc: u64,
    /// Share the per-trial random stream across schemes.
    pub paired: bool,
}

impl Default for SimExperimentSpec {
    fn default() -> Self {
        Self {
            sample_sizes: vec![2_000, 5_000, 10_000, 20_000, 50_000, 100_000],
            trials: 500,
            schemes: vec![SimScheme::Pps, SimScheme::MlPps],
            nu: 1.0,
            epsilon: 1e-6,
            seed_mc: 123,
            paired: false,
        }
    }
}

impl SimExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 2 {
            return Err(Error::param("trials", "need at least 2 trials for quantiles"));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return Err(Error::param("sample_sizes", "must be nonempty and positive"));
        }
        if self.schemes.is_empty() {
            return Err(Error::param("schemes", "at least one scheme required"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::param("epsilon", "must be > 0"));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::param("nu", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Deterministic per-trial seed; independent of execution order.
    pub fn trial_seed(&self, m: usize, scheme: SimScheme, trial: usize) -> u64 {
        let mut h = SipHasher13::new_with_keys(self.seed_mc, 0x5349_4d4c_4142_5452);
        h.write_u64(m as u64);
        h.write_u64(if self.paired { u64::MAX } else { scheme.tag() });
        h.write_u64(trial as u64);
        h.finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub estimate: f64,
    pub positive_fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimCell {
    pub m: usize,
    pub scheme: SimScheme,
    /// `Q0.975 - Q0.025` of the trial estimates (type-7 quantiles).
    pub width: f64,
    pub width_rel: Option<f64>,
    pub mean_estimate: f64,
    pub bias: f64,
    /// Standard deviation of the trial estimates.
    pub sd: f64,
    pub mean_positive_fraction: f64,
    /// Share of trials whose 95% CI contains the true prevalence.
    pub coverage: f64,
    pub trials: Vec<TrialOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub true_prevalence: f64,
    pub cells: Vec<SimCell>,
}

impl SimResult {
    pub fn cell(&self, m: usize, scheme: SimScheme) -> Option<&SimCell> {
        self.cells.iter().find(|c| c.m == m && c.scheme == scheme)
    }
}

/// Per-item weights `C^nu (s^gamma + epsilon)` for a scheme.
pub fn scheme_weights(population: &SimPopulation, scheme: SimScheme, nu: f64, epsilon: f64) -> Vec<f64> {
    population
        .items
        .iter()
        .map(|it| weight_from_parts(it.impressions as f64, it.score, nu, scheme.gamma(), epsilon))
        .collect()
}

struct SchemeDesign {
    scheme: SimScheme,
    weights: Vec<f64>,
    ppswr: Option<PpswrDesign>,
}

fn run_trial(
    population: &SimPopulation,
    design: &SchemeDesign,
    m: usize,
    seed: u64,
    keys: &mut Vec<(f64, usize)>,
) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = &population.items;
    let (obs, positives) = match &design.ppswr {
        Some(d) => {
            let mut positives = 0usize;
            let obs: Vec<Observation> = (0..m)
                .map(|_| {
                    let j = d.draw(&mut rng);
                    let it = &items[j];
                    positives += it.positive as usize;
                    Observation::new(it.impressions as f64, it.positive, d.probability(j))
                })
                .collect();
            (obs, positives)
        }
        None => {
            if m >= items.len() {
                return Err(Error::param("m", "without-replacement sample must be smaller than the population"));
            }
            keys.clear();
            keys.extend(design.weights.iter().enumerate().map(|(j, w)| {
                let u = unit_interval_open_closed(rng.random::<u64>());
                (-u.ln() / w, j)
            }));
            keys.select_nth_unstable_by(m - 1, |a, b| a.0.total_cmp(&b.0));
            let tau = keys[m - 1].0;
            let mut positives = 0usize;
            let obs = keys[..m]
                .iter()
                .map(|&(_, j)| {
                    let it = &items[j];
                    positives += it.positive as usize;
                    let pi = -(-design.weights[j] * tau).exp_m1();
                    Observation::new(it.impressions as f64, it.positive, pi / m as f64)
                })
                .collect();
            (obs, positives)
        }
    };
    let kind = if design.ppswr.is_some() {
        EstimatorKind::HhRatio
    } else {
        EstimatorKind::HtHajek
    };
    let est = estimate_from_observations(&obs, kind)?;
    Ok(TrialOutcome {
        estimate: est.theta_hat,
        positive_fraction: positives as f64 / m as f64,
        ci_low: est.ci_low,
        ci_high: est.ci_high,
    })
}

/// Runs every (sample size, scheme) cell. Trials run in parallel; each
/// uses its own derived seed so results do not depend on scheduling.
pub fn run_trials(population: &SimPopulation, experiment: &SimExperimentSpec) -> Result<SimResult> {
    experiment.validate()?;
    if population.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let truth = population.true_prevalence();
    let designs = experiment
        .schemes
        .iter()
        .map(|&scheme| {
            let weights = scheme_weights(population, scheme, experiment.nu, experiment.epsilon);
            let ppswr = match scheme {
                SimScheme::MlPpswor => None,
                _ => Some(PpswrDesign::new(&weights)?),
            };
            Ok(SchemeDesign { scheme, weights, ppswr })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for &m in &experiment.sample_sizes {
        for design in &designs {
            let trials = (0..experiment.trials)
                .into_par_iter()
                .map_init(Vec::new, |keys, t| {
                    run_trial(population, design, m, experiment.trial_seed(m, design.scheme, t), keys)
                })
                .collect::<Result<Vec<_>>>()?;
            cells.push(summarize(m, design.scheme, truth, trials));
        }
    }

    let norm = cells
        .iter()
        .find(|c| c.m == 100_000 && c.scheme == SimScheme::MlPps)
        .map(|c| c.width);
    if let Some(norm) = norm {
        for c in &mut cells {
            c.width_rel = Some(c.width / norm);
        }
    }
    Ok(SimResult {
        true_prevalence: truth,
        cells,
    })
}

fn summarize(m: usize, scheme: SimScheme, truth: f64, trials: Vec<TrialOutcome>) -> SimCell {
    let t = trials.len() as f64;
    let mut est: Vec<f64> = trials.iter().map(|o| o.estimate).collect();
    let mean = numeric::sum(est.iter().copied()) / t;
    let sd = (numeric::sum(est.iter().map(|e| (e - mean).powi(2))) / (t - 1.0)).sqrt();
    est.sort_by(f64::total_cmp);
    let width = quantile_type7(&est, 0.975) - quantile_type7(&est, 0.025);
    let covered = trials
        .iter()
        .filter(|o| o.ci_low <= truth && truth <= o.ci_high)
        .count();
    SimCell {
        m,
        scheme,
        width,
        width_rel: None,
        mean_estimate: mean,
        bias: mean - truth,
        sd,
        mean_positive_fraction: numeric::sum(trials.iter().map(|o| o.positive_fraction)) / t,
        coverage: covered as f64 / t,
        trials,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositiveRateLift {
    pub m: usize,
    /// Mean ML_PPS positive fraction over mean PPS positive fraction, on
    /// the trials where the PPS sample had at least one positive.
    pub lift: f64,
    pub trials_used: usize,
    /// Trials dropped because the PPS sample contained no positives.
    pub trials_excluded: usize,
}

/// Lift in sample positive fraction of ML_PPS over PPS per sample size,
/// pairing trials by index.
pub fn positive_rate_lift(result: &SimResult) -> Result<Vec<PositiveRateLift>> {
    let mut sizes: Vec<usize> = result.cells.iter().map(|c| c.m).collect();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|m| {
            let missing = |s: SimScheme| Error::InsufficientData(format!("no {s} cell for m = {m}"));
            let pps = result.cell(m, SimScheme::Pps).ok_or_else(|| missing(SimScheme::Pps))?;
            let ml = result.cell(m, SimScheme::MlPps).ok_or_else(|| missing(SimScheme::MlPps))?;
            let pairs: Vec<(f64, f64)> = pps
                .trials
                .iter()
                .zip(&ml.trials)
                .filter(|(p, _)| p.positive_fraction > 0.0)
                .map(|(p, q)| (p.positive_fraction, q.positive_fraction))
                .collect();
            if pairs.is_empty() {
                return Err(Error::InsufficientData(format!(
                    "every PPS trial at m = {m} had zero positives"
                )));
            }
            let num = numeric::sum(pairs.iter().map(|p| p.1));
            let den = numeric::sum(pairs.iter().map(|p| p.0));
            Ok(PositiveRateLift {
                m,
                lift: num / den,
                trials_used: pairs.len(),
                trials_excluded: pps.trials.len() - pairs.len(),
            })
        })
        .collect()
}

/// Expected share of positive draws under a with-replacement scheme.
pub fn expected_positive_fraction(population: &SimPopulation, scheme: SimScheme, nu: f64, epsilon: f64) -> f64 {
    let w = scheme_weights(population, scheme, nu, epsilon);
    let total = numeric::sum(w.iter().copied());
    numeric::sum(
        population
            .items
            .iter()
            .zip(&w)
            .filter(|(it, _)| it.positive)
            .map(|(_, w)| *w),
    ) / total
}

#[derive(Serialize)]
struct FigureRow {
    m: usize,
    scheme: &'static str,
    #[serde(rename = "W")]
    width: f64,
    #[serde(rename = "W_rel")]
    width_rel: f64,
    bias: f64,
    positive_fraction: f64,
}

/// Writes the plot table `m,scheme,W,W_rel,bias,positive_fraction`.
pub fn emit_figure_data(result: &SimResult, path: &Path) -> Result<()> {
    let bytes = figure_data(result)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// The plot table as CSV bytes.
pub fn figure_data(result: &SimResult) -> Result<Vec<u8>> {
    if result.cell(100_000, SimScheme::MlPps).is_none() {
        return Err(Error::InsufficientData(
            "normalization cell (m = 100000, ML_PPS) is missing".into(),
        ));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in &result.cells {
        w.serialize(FigureRow {
            m: c.m,
            scheme: c.scheme.name(),
            width: c.width,
            width_rel: c.width_rel.expect("normalization present"),
            bias: c.bias,
            positive_fraction: c.mean_positive_fraction,
        })?;
    }
    w.into_inner()
        .map_err(|e| Error::Ingestion(format!("csv buffer: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_population(n: usize, seed: u64) -> SimPopulation {
        generate_population(&SimPopulationSpec {
            n,
            base_rate: 0.05,
            seed_pop: seed,
            ..Default::default()
        })
        .unwrap()
    }

    fn small_experiment() -> SimExperimentSpec {
        SimExperimentSpec {
            sample_sizes: vec![200, 100_000],
            trials: 20,
            ..Default::default()
        }
    }

    #[test]
    fn default_population_marginals() {
        let spec = SimPopulationSpec::default();
        let pop = generate_population(&spec).unwrap();
        let n = pop.len() as f64;
        let pos = pop.items.iter().filter(|i| i.positive).count() as f64;
        let se = (0.005f64 * 0.995 / n).sqrt();
        assert!((pos / n - 0.005).abs() < 3.0 * se);

        // Tail draws are at least x_m = 10, so values above 10 identify the
        // tail; the rest of the tail mass sits exactly at 10.
        let above = pop.items.iter().filter(|i| i.impressions > 10).count() as f64;
        let tail_above = 0.07 * (10.0f64 / 10.5).powf(1.4);
        let se = (tail_above * (1.0 - tail_above) / n).sqrt();
        assert!((above / n - tail_above).abs() < 3.0 * se, "{}", above / n);
        assert!(pop.items.iter().all(|i| i.impressions >= 1));

        let mean = |p: bool| {
            let s: Vec<f64> = pop.items.iter().filter(|i| i.positive == p).map(|i| i.score).collect();
            s.iter().sum::<f64>() / s.len() as f64
        };
        assert!(mean(true) > mean(false));
        assert!((mean(false) - 0.2).abs() < 0.005);
    }

    #[test]
    fn population_is_deterministic() {
        assert_eq!(small_population(1000, 3), small_population(1000, 3));
        assert_ne!(small_population(1000, 3), small_population(1000, 4));
    }

    #[test]
    fn true_prevalence_is_exact() {
        let pop = SimPopulation {
            items: vec![
                SimItem { positive: true, impressions: 3, score: 0.5 },
                SimItem { positive: false, impressions: 9, score: 0.5 },
            ],
        };
        assert_eq!(pop.true_prevalence(), 0.25);
    }

    #[test]
    fn normalization_cell_is_one() {
        let pop = small_population(5_000, 1);
        let r = run_trials(&pop, &small_experiment()).unwrap();
        assert_eq!(r.cell(100_000, SimScheme::MlPps).unwrap().width_rel, Some(1.0));
        assert_eq!(r.cells.len(), 4);
        assert!(r.cells.iter().all(|c| c.width >= 0.0));
    }

    #[test]
    fn runs_are_reproducible_and_parallel_safe() {
        let pop = small_population(5_000, 1);
        let a = figure_data(&run_trials(&pop, &small_experiment()).unwrap()).unwrap();
        let b = figure_data(&run_trials(&pop, &small_experiment()).unwrap()).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("m,scheme,W,W_rel,bias,positive_fraction\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn missing_normalization_cell_is_an_error() {
        let pop = small_population(2_000, 1);
        let spec = SimExperimentSpec {
            sample_sizes: vec![100],
            trials: 5,
            ..Default::default()
        };
        assert!(figure_data(&run_trials(&pop, &spec).unwrap()).is_err());
    }

    #[test]
    fn scaling_impressions_leaves_estimates_unchanged() {
        let pop = small_population(3_000, 8);
        let spec = SimExperimentSpec {
            sample_sizes: vec![300],
            trials: 10,
            ..Default::default()
        };
        let a = run_trials(&pop, &spec).unwrap();
        let b = run_trials(&pop.scaled(10), &spec).unwrap();
        for (ca, cb) in a.cells.iter().zip(&b.cells) {
            for (ta, tb) in ca.trials.iter().zip(&cb.trials) {
                assert!((ta.estimate - tb.estimate).abs() <= 1e-12 * ta.estimate.max(1e-300));
            }
        }
    }

    #[test]
    fn identical_designs_give_unit_lift() {
        let pop = small_population(3_000, 2);
        let spec = SimExperimentSpec {
            sample_sizes: vec![500],
            trials: 10,
            paired: true,
            ..Default::default()
        };
        let mut r = run_trials(&pop, &spec).unwrap();
        // Replace the ML cell by a copy of the PPS cell: equal designs.
        let pps = r.cell(500, SimScheme::Pps).unwrap().clone();
        r.cells.retain(|c| c.scheme == SimScheme::Pps);
        r.cells.push(SimCell { scheme: SimScheme::MlPps, ..pps });
        let l = positive_rate_lift(&r).unwrap();
        assert_eq!(l[0].lift, 1.0);
    }

    #[test]
    fn separating_scores_approach_inverse_base_rate() {
        let items = (0..1000)
            .map(|i| {
                let positive = i < 5;
                SimItem {
                    positive,
                    impressions: 4,
                    score: if positive { 1.0 } else { 0.0 },
                }
            })
            .collect();
        let pop = SimPopulation { items };
        let pps = expected_positive_fraction(&pop, SimScheme::Pps, 1.0, 1e-6);
        let ml = expected_positive_fraction(&pop, SimScheme::MlPps, 1.0, 1e-6);
        assert!((pps - 0.005).abs() < 1e-12);
        let lift = ml / pps;
        assert!(lift > 199.0 && lift <= 200.0, "{lift}");
    }

    #[test]
    fn ppswor_variant_runs() {
        let pop = small_population(4_000, 5);
        let spec = SimExperimentSpec {
            sample_sizes: vec![200],
            trials: 30,
            schemes: vec![SimScheme::MlPps, SimScheme::MlPpswor],
            ..Default::default()
        };
        let r = run_trials(&pop, &spec).unwrap();
        let c = r.cell(200, SimScheme::MlPpswor).unwrap();
        assert!(c.bias.abs() < 4.0 * c.sd / (30f64).sqrt() + 1e-3);
    }

    #[test]
    fn trial_seeds_differ_by_scheme_unless_paired() {
        let mut spec = SimExperimentSpec::default();
        assert_ne!(
            spec.trial_seed(10, SimScheme::Pps, 0),
            spec.trial_seed(10, SimScheme::MlPps, 0)
        );
        spec.paired = true;
        assert_eq!(
            spec.trial_seed(10, SimScheme::Pps, 0),
            spec.trial_seed(10, SimScheme::MlPps, 0)
        );
    }
}
