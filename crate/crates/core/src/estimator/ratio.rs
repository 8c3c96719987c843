use crate::error::{Error, Result};
use crate::estimator::segment::{observations, WeightBasis, ALL_SEGMENTS};
use crate::estimator::{EstimateFlags, EstimatorKind, PrevalenceEstimate};
use crate::numeric::{self, CompensatedSum, Z_95};
use crate::sampler::SampleDraw;

/// One draw reduced to what the ratio estimator needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    /// Impressions of the drawn unit (in the segment of interest).
    pub x: f64,
    /// Violative impressions, `x * Y`.
    pub z: f64,
    /// Per-draw selection probability.
    pub p: f64,
}

impl Observation {
    pub fn new(x: f64, y: bool, p: f64) -> Self {
        Self {
            x,
            z: if y { x } else { 0.0 },
            p,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfidenceInterval {
    pub low: f64,
    pub high: f64,
    pub raw_low: f64,
    pub raw_high: f64,
    pub clamped: bool,
}

/// `theta -/+ 1.96 sqrt(variance)`, reported bounds clamped to [0, 1].
pub fn confidence_interval(theta_hat: f64, variance: f64) -> ConfidenceInterval {
    let half = Z_95 * variance.max(0.0).sqrt();
    let raw_low = theta_hat - half;
    let raw_high = theta_hat + half;
    let low = raw_low.clamp(0.0, 1.0);
    let high = raw_high.clamp(0.0, 1.0);
    ConfidenceInterval {
        low,
        high,
        raw_low,
        raw_high,
        clamped: low != raw_low || high != raw_high,
    }
}

/// Kish effective sample size `(sum a)^2 / sum a^2`.
pub fn kish_ess_from_weights(a: &[f64]) -> Result<f64> {
    let s = numeric::sum(a.iter().copied());
    let s2 = numeric::sum(a.iter().map(|v| v * v));
    if a.is_empty() || s2 == 0.0 {
        return Err(Error::UndefinedEstimate(
            "effective sample size needs at least one nonzero weight".into(),
        ));
    }
    Ok(s * s / s2)
}

fn ratio_parts(obs: &[Observation]) -> (f64, f64) {
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    for o in obs {
        num.add(o.z / o.p);
        den.add(o.x / o.p);
    }
    (num.value(), den.value())
}

/// Linearized residuals `(z - theta x) / p`.
pub(crate) fn residuals_of(obs: &[Observation], theta_hat: f64) -> Vec<f64> {
    obs.iter().map(|o| (o.z - theta_hat * o.x) / o.p).collect()
}

/// `(1 / X^2) * sum (r - rbar)^2 / (m (m - 1))` with `X = mean(x / p)`.
pub(crate) fn taylor_variance_of(obs: &[Observation], theta_hat: f64) -> Result<f64> {
    let m = obs.len();
    if m < 2 {
        return Err(Error::VarianceUnavailable(format!(
            "need at least 2 draws, got {m}"
        )));
    }
    let mf = m as f64;
    let x_hat = numeric::sum(obs.iter().map(|o| o.x / o.p)) / mf;
    if x_hat == 0.0 {
        return Err(Error::UndefinedEstimate("estimated impression total is zero".into()));
    }
    let r = residuals_of(obs, theta_hat);
    let r_bar = numeric::sum(r.iter().copied()) / mf;
    let ss = numeric::sum(r.iter().map(|v| (v - r_bar) * (v - r_bar)));
    Ok(ss / (mf * (mf - 1.0)) / (x_hat * x_hat))
}

/// Ratio estimate with Taylor variance, CI and Kish ESS from raw
/// observations.
///
/// With fewer than two observations the point estimate is still returned,
/// flagged `variance_unavailable` with a degenerate interval.
pub fn estimate_from_observations(
    obs: &[Observation],
    kind: EstimatorKind,
) -> Result<PrevalenceEstimate> {
    if obs.is_empty() {
        return Err(Error::UndefinedEstimate("no labeled draws".into()));
    }
    if let Some(o) = obs.iter().find(|o| !(o.p > 0.0)) {
        return Err(Error::param(
            "draw_probability",
            format!("must be positive, got {}", o.p),
        ));
    }
    let m = obs.len();
    let (num, den) = ratio_parts(obs);
    if den == 0.0 {
        return Err(Error::UndefinedEstimate(
            "sum of x/p is zero (no sampled impressions)".into(),
        ));
    }
    let theta_hat = (num / den).clamp(0.0, 1.0);
    let variance = if m >= 2 {
        Some(taylor_variance_of(obs, theta_hat)?)
    } else {
        None
    };
    let a: Vec<f64> = obs.iter().map(|o| o.x / o.p).collect();
    let ess = kish_ess_from_weights(&a)?;
    let in_segment = obs.iter().filter(|o| o.x > 0.0).count();
    let positives = obs.iter().filter(|o| o.z > 0.0).count();

    let mut est = PrevalenceEstimate {
        kind,
        theta_hat,
        variance,
        ci_low: theta_hat,
        ci_high: theta_hat,
        raw_ci_low: theta_hat,
        raw_ci_high: theta_hat,
        ess,
        sample_positive_rate: positives as f64 / in_segment as f64,
        n_draws: m,
        abstentions: 0,
        numerator: num / m as f64,
        denominator: den / m as f64,
        flags: EstimateFlags {
            approximate_variance: kind == EstimatorKind::HtHajek,
            ..EstimateFlags::default()
        },
    };
    est.set_interval();
    Ok(est)
}

/// Hansen-Hurwitz ratio estimate over with-replacement draws.
pub fn hh_ratio(draws: &[SampleDraw]) -> Result<PrevalenceEstimate> {
    crate::estimator::estimate_segment(draws, ALL_SEGMENTS, WeightBasis::DrawProbability)
}

/// Hajek ratio estimate using each draw's inclusion probability.
pub fn ht_hajek(draws: &[SampleDraw]) -> Result<PrevalenceEstimate> {
    crate::estimator::estimate_segment(draws, ALL_SEGMENTS, WeightBasis::InclusionProbability)
}

/// Per-draw residuals `(z - theta x) / p` over the labeled draws.
pub fn residuals(draws: &[SampleDraw], theta_hat: f64) -> Result<Vec<f64>> {
    let (obs, _) = observations(draws, ALL_SEGMENTS, WeightBasis::DrawProbability)?;
    Ok(residuals_of(&obs, theta_hat))
}

/// Taylor-linearized variance of the ratio estimate.
pub fn variance_taylor(draws: &[SampleDraw], theta_hat: f64) -> Result<f64> {
    let (obs, _) = observations(draws, ALL_SEGMENTS, WeightBasis::DrawProbability)?;
    taylor_variance_of(&obs, theta_hat)
}

/// Kish ESS with `a = x / p` over the draws (labels not required).
pub fn kish_ess(draws: &[SampleDraw]) -> Result<f64> {
    let a: Vec<f64> = draws
        .iter()
        .map(|d| d.impressions as f64 / d.draw_probability)
        .collect();
    kish_ess_from_weights(&a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::Label;

    fn draw(id: &str, c: u64, y: bool, p: f64) -> SampleDraw {
        SampleDraw {
            content_id: id.into(),
            impressions: c,
            segment_impressions: Default::default(),
            label: Some(Label::from_bool(y)),
            draw_probability: p,
            inclusion_probability: None,
            weight: p,
        }
    }

    // population {(C=10,Y=1,p=0.5),(C=30,Y=0,p=0.3),(C=60,Y=0,p=0.2)}
    fn item1() -> SampleDraw {
        draw("i1", 10, true, 0.5)
    }
    fn item3() -> SampleDraw {
        draw("i3", 60, false, 0.2)
    }

    #[test]
    fn hh_ratio_three_item_example() {
        let est = hh_ratio(&[item1(), item3()]).unwrap();
        assert!((est.numerator - 10.0).abs() < 1e-12);
        assert!((est.denominator - 160.0).abs() < 1e-12);
        assert!((est.theta_hat - 0.0625).abs() < 1e-15);
        assert_eq!(est.kind, EstimatorKind::HhRatio);
        assert_eq!(est.n_draws, 2);
        assert_eq!(est.sample_positive_rate, 0.5);
    }

    #[test]
    fn all_positive_draws_give_one() {
        let est = hh_ratio(&[draw("a", 3, true, 0.1), draw("b", 70, true, 0.7)]).unwrap();
        assert_eq!(est.theta_hat, 1.0);
        assert_eq!(est.variance, Some(0.0));
    }

    #[test]
    fn residual_example_and_zero_sum() {
        let r = residuals(&[item1(), item3()], 0.0625).unwrap();
        assert!((r[0] - 18.75).abs() < 1e-12);
        assert!((r[1] + 18.75).abs() < 1e-12);
        assert!((r[0] + r[1]).abs() < 1e-12);

        let r = residuals(&[draw("a", 4, true, 0.3)], 1.0).unwrap();
        assert_eq!(r, vec![0.0]);
    }

    #[test]
    fn variance_example() {
        let v = variance_taylor(&[item1(), item3()], 0.0625).unwrap();
        let expected = 703.125 / 2.0 / (160.0 * 160.0);
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.013733).abs() < 1e-6);
    }

    #[test]
    fn variance_of_identical_draws_is_zero() {
        let d = [item1(), item1(), item1()];
        assert_eq!(variance_taylor(&d, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn single_draw_flags_missing_variance() {
        let est = hh_ratio(&[item1()]).unwrap();
        assert_eq!(est.theta_hat, 1.0);
        assert!(est.variance.is_none());
        assert!(est.flags.variance_unavailable);
        assert_eq!((est.ci_low, est.ci_high), (1.0, 1.0));
        assert!(matches!(variance_taylor(&[item1()], 1.0), Err(Error::VarianceUnavailable(_))));
    }

    #[test]
    fn interval_examples() {
        let ci = confidence_interval(0.1, 0.0);
        assert_eq!((ci.low, ci.high), (0.1, 0.1));
        let ci = confidence_interval(0.5, 0.0001);
        assert!((ci.low - 0.4804).abs() < 1e-12 && (ci.high - 0.5196).abs() < 1e-12);
        assert!(!ci.clamped);
        let ci = confidence_interval(0.001, 1e-6);
        assert!((ci.raw_low + 0.00096).abs() < 1e-12);
        assert_eq!(ci.low, 0.0);
        assert!(ci.clamped);
    }

    #[test]
    fn ess_examples() {
        assert!((kish_ess_from_weights(&[2.0; 4]).unwrap() - 4.0).abs() < 1e-12);
        assert!((kish_ess_from_weights(&[1.0, 3.0]).unwrap() - 1.6).abs() < 1e-12);
        let e = kish_ess_from_weights(&[100.0, 1.0, 1.0]).unwrap();
        assert!((e - 102.0 * 102.0 / 10002.0).abs() < 1e-12);
        assert!(e >= 1.0 && e <= 3.0);
        assert!(kish_ess_from_weights(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn unlabeled_draw_is_an_error() {
        let mut d = item1();
        d.label = None;
        assert!(matches!(hh_ratio(&[d, item3()]), Err(Error::Unlabeled(_))));
    }

    #[test]
    fn abstentions_are_excluded_and_counted() {
        let mut a = draw("x", 50, true, 0.9);
        a.label = Some(Label::Abstain);
        let est = hh_ratio(&[item1(), item3(), a]).unwrap();
        assert!((est.theta_hat - 0.0625).abs() < 1e-15);
        assert_eq!(est.abstentions, 1);
        assert_eq!(est.n_draws, 2);
    }

    #[test]
    fn hajek_with_equal_pi_is_unweighted_ratio() {
        let mut d = vec![draw("a", 10, true, 0.1), draw("b", 30, false, 0.2), draw("c", 20, true, 0.3)];
        for x in &mut d {
            x.inclusion_probability = Some(0.25);
        }
        let est = ht_hajek(&d).unwrap();
        assert!((est.theta_hat - 30.0 / 60.0).abs() < 1e-15);
        assert!(est.flags.approximate_variance);
        assert_eq!(est.kind, EstimatorKind::HtHajek);
    }

    #[test]
    fn hajek_all_negative_is_zero() {
        let mut d = vec![draw("a", 10, false, 0.1), draw("b", 30, false, 0.2)];
        for (x, pi) in d.iter_mut().zip([0.3, 0.6]) {
            x.inclusion_probability = Some(pi);
        }
        assert_eq!(ht_hajek(&d).unwrap().theta_hat, 0.0);
    }

    #[test]
    fn hajek_requires_inclusion_probabilities() {
        assert!(matches!(
            ht_hajek(&[item1(), item3()]),
            Err(Error::MissingInclusionProbability(_))
        ));
    }
}
