use crate::error::{Error, Result};
use crate::estimator::ratio::{estimate_from_observations, kish_ess_from_weights, Observation};
use crate::estimator::{EstimateFlags, EstimatorKind, PrevalenceEstimate};
use crate::numeric;
use crate::sampler::{Label, SampleDraw};

/// Segment key meaning "all impressions of the unit".
pub const ALL_SEGMENTS: &str = "ALL";

/// Which probability the draws are weighted by.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightBasis {
    /// Per-draw probability `p = w / sum(w)` (with-replacement draws).
    DrawProbability,
    /// Inclusion probability `pi`; treated as `m` draws with `p = pi / m`.
    InclusionProbability,
}

/// Reduces draws to observations for `segment`, skipping abstentions.
/// Returns the observations and the number of abstentions.
pub(crate) fn observations(
    draws: &[SampleDraw],
    segment: &str,
    basis: WeightBasis,
) -> Result<(Vec<Observation>, usize)> {
    let mut labeled = Vec::with_capacity(draws.len());
    let mut abstentions = 0;
    for d in draws {
        match d.label {
            None => return Err(Error::Unlabeled(d.content_id.clone())),
            Some(Label::Abstain) => abstentions += 1,
            Some(label) => labeled.push((d, label == Label::Positive)),
        }
    }
    let m = labeled.len() as f64;
    let obs = labeled
        .into_iter()
        .map(|(d, positive)| {
            let x = if segment == ALL_SEGMENTS {
                d.impressions
            } else {
                d.segment_impressions(segment)
            } as f64;
            let p = match basis {
                WeightBasis::DrawProbability => d.draw_probability,
                WeightBasis::InclusionProbability => {
                    d.inclusion_probability
                        .ok_or_else(|| Error::MissingInclusionProbability(d.content_id.clone()))?
                        / m
                }
            };
            if !(p > 0.0) {
                return Err(Error::param(
                    "draw_probability",
                    format!("draw `{}` has non-positive probability {p}", d.content_id),
                ));
            }
            Ok(Observation::new(x, positive, p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((obs, abstentions))
}

/// Ratio estimate for `segment` (or [`ALL_SEGMENTS`]) from a single sample.
///
/// The global estimate is this function evaluated at `ALL_SEGMENTS`, so the
/// all-impressions drill-down is bit-identical to it.
pub fn estimate_segment(
    draws: &[SampleDraw],
    segment: &str,
    basis: WeightBasis,
) -> Result<PrevalenceEstimate> {
    let (obs, abstentions) = observations(draws, segment, basis)?;
    if segment != ALL_SEGMENTS && !obs.iter().any(|o| o.x > 0.0) {
        return Err(Error::EmptySegment(segment.to_string()));
    }
    let kind = match basis {
        WeightBasis::DrawProbability => EstimatorKind::HhRatio,
        WeightBasis::InclusionProbability => EstimatorKind::HtHajek,
    };
    let mut est = estimate_from_observations(&obs, kind)?;
    est.abstentions = abstentions;
    Ok(est)
}

/// HH ratio form for a segment whose denominator is not known.
pub fn segment_estimate_ratio(draws: &[SampleDraw], segment: &str) -> Result<PrevalenceEstimate> {
    estimate_segment(draws, segment, WeightBasis::DrawProbability)
}

/// Numerator-only estimate over a denominator known exactly from logs.
pub fn segment_estimate_known_denominator(
    draws: &[SampleDraw],
    segment: &str,
    denominator: f64,
) -> Result<PrevalenceEstimate> {
    segment_known_denominator_with(draws, segment, denominator, WeightBasis::DrawProbability)
}

/// `N-hat = mean(z_g / p)`, `theta = N-hat / D`, `Var = Var(N-hat) / D^2`.
pub fn segment_known_denominator_with(
    draws: &[SampleDraw],
    segment: &str,
    denominator: f64,
    basis: WeightBasis,
) -> Result<PrevalenceEstimate> {
    if !(denominator > 0.0 && denominator.is_finite()) {
        return Err(Error::UndefinedEstimate(format!(
            "segment `{segment}` has denominator {denominator}"
        )));
    }
    let (obs, abstentions) = observations(draws, segment, basis)?;
    if obs.is_empty() {
        return Err(Error::UndefinedEstimate("no labeled draws".into()));
    }
    if !obs.iter().any(|o| o.x > 0.0) {
        return Err(Error::EmptySegment(segment.to_string()));
    }
    let m = obs.len() as f64;
    let u: Vec<f64> = obs.iter().map(|o| o.z / o.p).collect();
    let n_hat = numeric::sum(u.iter().copied()) / m;
    let variance = if obs.len() >= 2 {
        let ss = numeric::sum(u.iter().map(|v| (v - n_hat) * (v - n_hat)));
        Some(ss / (m - 1.0) / m / (denominator * denominator))
    } else {
        None
    };
    let raw_theta = n_hat / denominator;
    let theta_hat = raw_theta.clamp(0.0, 1.0);
    let a: Vec<f64> = obs.iter().map(|o| o.x / o.p).collect();
    let in_segment = obs.iter().filter(|o| o.x > 0.0).count();
    let positives = obs.iter().filter(|o| o.z > 0.0).count();

    let mut est = PrevalenceEstimate {
        kind: EstimatorKind::HtKnownDenominator,
        theta_hat,
        variance,
        ci_low: theta_hat,
        ci_high: theta_hat,
        raw_ci_low: theta_hat,
        raw_ci_high: theta_hat,
        ess: kish_ess_from_weights(&a)?,
        sample_positive_rate: positives as f64 / in_segment as f64,
        n_draws: obs.len(),
        abstentions,
        numerator: n_hat,
        denominator,
        flags: EstimateFlags {
            approximate_variance: basis == WeightBasis::InclusionProbability,
            ..EstimateFlags::default()
        },
    };
    est.set_interval();
    if raw_theta != theta_hat {
        est.flags.clamped = true;
    }
    Ok(est)
}
