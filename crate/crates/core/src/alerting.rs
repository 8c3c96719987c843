//! Sensitivity, minimum detectable effects and weekly alerting on the daily
//! prevalence series.
//!
//! Daily sensitivity is the 95% CI half-width. For alerting the series is
//! smoothed with a 7-day mean; two adjacent windows are compared with a
//! normal approximation, optionally inflating the window variance for
//! autocorrelated daily estimates.

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::PrevalenceEstimate;
use crate::numeric::{self, normal_quantile, Z_95};

/// Fewest days of history accepted for autocorrelation estimates.
pub const MIN_AUTOCORRELATION_DAYS: usize = 28;

/// Number of lags entering the 7-day variance inflation factor.
pub const INFLATION_LAGS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailyPoint {
    pub day: NaiveDate,
    pub theta_hat: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
}

/// Daily estimates in strictly increasing day order; gaps are allowed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<DailyPoint>", into = "Vec<DailyPoint>")]
pub struct DailySeries {
    points: Vec<DailyPoint>,
}

impl TryFrom<Vec<DailyPoint>> for DailySeries {
    type Error = Error;
    fn try_from(points: Vec<DailyPoint>) -> Result<Self> {
        DailySeries::new(points)
    }
}

impl From<DailySeries> for Vec<DailyPoint> {
    fn from(s: DailySeries) -> Self {
        s.points
    }
}

impl DailySeries {
    pub fn new(points: Vec<DailyPoint>) -> Result<Self> {
        if let Some(w) = points.windows(2).find(|w| w[1].day <= w[0].day) {
            return Err(Error::UnorderedSeries(w[1].day));
        }
        Ok(Self { points })
    }

    /// Builds a series of consecutive days starting at `start`.
    pub fn from_values(start: NaiveDate, values: &[f64]) -> Self {
        Self {
            points: values
                .iter()
                .enumerate()
                .map(|(i, v)| DailyPoint {
                    day: start + Duration::days(i as i64),
                    theta_hat: *v,
                    variance: None,
                })
                .collect(),
        }
    }

    pub fn push(&mut self, point: DailyPoint) -> Result<()> {
        if let Some(last) = self.points.last() {
            if point.day <= last.day {
                return Err(Error::UnorderedSeries(point.day));
            }
        }
        self.points.push(point);
        Ok(())
    }

    /// Inserts or replaces the point for `point.day`.
    pub fn upsert(&mut self, point: DailyPoint) {
        match self.points.binary_search_by_key(&point.day, |p| p.day) {
            Ok(i) => self.points[i] = point,
            Err(i) => self.points.insert(i, point),
        }
    }

    pub fn points(&self) -> &[DailyPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last_day(&self) -> Option<NaiveDate> {
        self.points.last().map(|p| p.day)
    }

    pub fn get(&self, day: NaiveDate) -> Option<&DailyPoint> {
        self.points
            .binary_search_by_key(&day, |p| p.day)
            .ok()
            .map(|i| &self.points[i])
    }

    /// Days missing between the first and last point.
    pub fn gaps(&self) -> Vec<NaiveDate> {
        let mut out = Vec::new();
        for w in self.points.windows(2) {
            let mut d = w[0].day + Duration::days(1);
            while d < w[1].day {
                out.push(d);
                d += Duration::days(1);
            }
        }
        out
    }

    /// The series restricted to days on or before `day`.
    pub fn up_to(&self, day: NaiveDate) -> DailySeries {
        DailySeries {
            points: self.points.iter().filter(|p| p.day <= day).copied().collect(),
        }
    }

    /// The `days` consecutive points ending at `end`, or the missing days.
    pub fn window(&self, end: NaiveDate, days: usize) -> std::result::Result<Vec<DailyPoint>, Vec<NaiveDate>> {
        let mut found = Vec::with_capacity(days);
        let mut missing = Vec::new();
        for k in (0..days as i64).rev() {
            let d = end - Duration::days(k);
            match self.get(d) {
                Some(p) => found.push(*p),
                None => missing.push(d),
            }
        }
        if missing.is_empty() {
            Ok(found)
        } else {
            Err(missing)
        }
    }
}

/// Daily sensitivity `h = 1.96 sqrt(Var)`.
pub fn sensitivity_half_width(estimate: &PrevalenceEstimate) -> Result<f64> {
    estimate
        .variance
        .map(|v| Z_95 * v.sqrt())
        .ok_or_else(|| Error::VarianceUnavailable("estimate has no variance".into()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EssSensitivity {
    /// `1.96 sqrt(theta (1 - theta) / ESS)`.
    pub half_width: f64,
    /// `1.96 sqrt(theta / ESS)`, reported when `theta < 0.01`.
    pub rare_event: Option<f64>,
}

/// Back-of-the-envelope sensitivity from the effective sample size.
pub fn sensitivity_from_ess(theta: f64, ess: f64) -> Result<EssSensitivity> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::param("theta", format!("{theta} outside [0, 1]")));
    }
    if !(ess > 0.0) {
        return Err(Error::param("ess", format!("must be positive, got {ess}")));
    }
    Ok(EssSensitivity {
        half_width: Z_95 * (theta * (1.0 - theta) / ess).sqrt(),
        rare_event: (theta < 0.01).then(|| Z_95 * (theta / ess).sqrt()),
    })
}

/// Mean of the `window` daily estimates ending at `day`.
pub fn moving_average(series: &DailySeries, day: NaiveDate, window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::param("window", "must be at least 1"));
    }
    let pts = series.window(day, window).map_err(Error::SeriesGap)?;
    Ok(numeric::sum(pts.iter().map(|p| p.theta_hat)) / window as f64)
}

/// 7-day moving average ending at `day`.
pub fn moving_average_7(series: &DailySeries, day: NaiveDate) -> Result<f64> {
    moving_average(series, day, 7)
}

fn check_level(alpha: f64, power: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("{alpha} outside (0, 1)")));
    }
    if !(power > 0.0 && power < 1.0) {
        return Err(Error::param("power", format!("{power} outside (0, 1)")));
    }
    Ok(())
}

/// Absolute MDE for comparing two independent 7-day windows:
/// `(z_{1-alpha/2} + z_power) sqrt(2/7) sigma`.
pub fn mde_absolute(sigma: f64, alpha: f64, power: f64) -> Result<f64> {
    check_level(alpha, power)?;
    if !(sigma >= 0.0) {
        return Err(Error::param("sigma", format!("must be >= 0, got {sigma}")));
    }
    Ok((normal_quantile(1.0 - alpha / 2.0) + normal_quantile(power)) * (2.0f64 / 7.0).sqrt() * sigma)
}

/// Leading constant of the relative MDE, about 0.764 at alpha = 0.05 and
/// 80% power.
pub fn mde_relative_coefficient(alpha: f64, power: f64) -> Result<f64> {
    check_level(alpha, power)?;
    let za = normal_quantile(1.0 - alpha / 2.0);
    Ok((za + normal_quantile(power)) / za * (2.0f64 / 7.0).sqrt())
}

/// Relative MDE from the daily half-width `h` and baseline `theta_0`,
/// taking `h = z_{1-alpha/2} sigma`.
pub fn mde_relative(half_width: f64, baseline: f64, alpha: f64, power: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::param("baseline", format!("must be positive, got {baseline}")));
    }
    if !(half_width >= 0.0) {
        return Err(Error::param("half_width", format!("must be >= 0, got {half_width}")));
    }
    Ok(mde_relative_coefficient(alpha, power)? * half_width / baseline)
}

/// Variance inflation of a 7-day mean under lag correlations
/// `rho_1..rho_k` (k <= 6): `1 + 2 sum (1 - l/7) rho_l`.
pub fn variance_inflation(autocorrelations: &[f64]) -> Result<f64> {
    if autocorrelations.len() > INFLATION_LAGS {
        return Err(Error::param(
            "autocorrelations",
            format!("at most {INFLATION_LAGS} lags, got {}", autocorrelations.len()),
        ));
    }
    if let Some(r) = autocorrelations.iter().find(|r| !(-1.0..=1.0).contains(*r)) {
        return Err(Error::param("autocorrelations", format!("{r} outside [-1, 1]")));
    }
    let factor = 1.0
        + 2.0
            * autocorrelations
                .iter()
                .enumerate()
                .map(|(i, rho)| (1.0 - (i + 1) as f64 / 7.0) * rho)
                .sum::<f64>();
    if factor <= 0.0 {
        return Err(Error::param(
            "autocorrelations",
            format!("inflation factor {factor} is not positive; series flagged"),
        ));
    }
    Ok(factor)
}

/// Residual definition used before estimating autocorrelations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detrend {
    /// Subtract the series mean.
    #[default]
    Mean,
    /// Subtract a least-squares line in the day index.
    Linear,
}

/// Sample autocorrelations `rho_1..rho_max_lag` of the detrended series.
///
/// Requires at least [`MIN_AUTOCORRELATION_DAYS`] consecutive days.
pub fn estimate_autocorrelation(series: &DailySeries, max_lag: usize, detrend: Detrend) -> Result<Vec<f64>> {
    let n = series.len();
    if n < MIN_AUTOCORRELATION_DAYS {
        return Err(Error::InsufficientData(format!(
            "autocorrelation needs at least {MIN_AUTOCORRELATION_DAYS} days of history, got {n}"
        )));
    }
    let gaps = series.gaps();
    if !gaps.is_empty() {
        return Err(Error::SeriesGap(gaps));
    }
    if max_lag == 0 || max_lag >= n {
        return Err(Error::param("max_lag", format!("must be in 1..{n}")));
    }
    let y: Vec<f64> = series.points().iter().map(|p| p.theta_hat).collect();
    let nf = n as f64;
    let mean = numeric::sum(y.iter().copied()) / nf;
    let resid: Vec<f64> = match detrend {
        Detrend::Mean => y.iter().map(|v| v - mean).collect(),
        Detrend::Linear => {
            let t_mean = (nf - 1.0) / 2.0;
            let sxy = numeric::sum(y.iter().enumerate().map(|(t, v)| (t as f64 - t_mean) * (v - mean)));
            let sxx = numeric::sum((0..n).map(|t| (t as f64 - t_mean).powi(2)));
            let slope = sxy / sxx;
            y.iter()
                .enumerate()
                .map(|(t, v)| v - mean - slope * (t as f64 - t_mean))
                .collect()
        }
    };
    let denom = numeric::sum(resid.iter().map(|r| r * r));
    if denom <= f64::EPSILON * numeric::sum(y.iter().map(|v| v * v)).max(f64::MIN_POSITIVE) {
        return Err(Error::InsufficientData(
            "series has zero variance after detrending; autocorrelation undefined".into(),
        ));
    }
    Ok((1..=max_lag)
        .map(|lag| numeric::sum((0..n - lag).map(|t| resid[t] * resid[t + lag])) / denom)
        .collect())
}

/// Threshold the window difference is compared against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertRule {
    /// Two-sided level-alpha test: fire when
    /// `|delta| > z_{1-alpha/2} sqrt(2/w) sigma sqrt(inflation)`.
    #[default]
    Significance,
    /// Fire when `|delta| > mde_abs`.
    MdeThreshold,
}

/// Detection plan for one policy metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdePlan {
    pub alpha: f64,
    pub power: f64,
    pub window_days: usize,
    /// Daily estimation noise (standard deviation of one day's estimate).
    pub sigma: f64,
    pub inflation: f64,
    pub baseline: Option<f64>,
    /// Days skipped between the previous and the recent window.
    pub gap_days: u32,
    pub rule: AlertRule,
    pub mde_abs: f64,
    pub mde_rel: Option<f64>,
}

impl MdePlan {
    pub fn new(sigma: f64, alpha: f64, power: f64) -> Result<Self> {
        check_level(alpha, power)?;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", format!("must be finite and >= 0, got {sigma}")));
        }
        let mut plan = Self {
            alpha,
            power,
            window_days: 7,
            sigma,
            inflation: 1.0,
            baseline: None,
            gap_days: 0,
            rule: AlertRule::Significance,
            mde_abs: 0.0,
            mde_rel: None,
        };
        plan.recompute();
        Ok(plan)
    }

    pub fn with_baseline(mut self, baseline: f64) -> Result<Self> {
        if !(baseline > 0.0) {
            return Err(Error::param("baseline", format!("must be positive, got {baseline}")));
        }
        self.baseline = Some(baseline);
        self.recompute();
        Ok(self)
    }

    pub fn with_inflation(mut self, inflation: f64) -> Result<Self> {
        if !(inflation > 0.0 && inflation.is_finite()) {
            return Err(Error::param("inflation", format!("must be positive, got {inflation}")));
        }
        self.inflation = inflation;
        self.recompute();
        Ok(self)
    }

    pub fn with_window(mut self, window_days: usize, gap_days: u32) -> Result<Self> {
        if window_days == 0 {
            return Err(Error::param("window_days", "must be at least 1"));
        }
        self.window_days = window_days;
        self.gap_days = gap_days;
        self.recompute();
        Ok(self)
    }

    pub fn with_rule(mut self, rule: AlertRule) -> Self {
        self.rule = rule;
        self
    }

    /// Standard error of the difference of two window means.
    pub fn difference_se(&self) -> f64 {
        (2.0 / self.window_days as f64).sqrt() * self.sigma * self.inflation.sqrt()
    }

    /// Level-alpha critical value for `|delta|`.
    pub fn critical_difference(&self) -> f64 {
        normal_quantile(1.0 - self.alpha / 2.0) * self.difference_se()
    }

    pub fn threshold(&self) -> f64 {
        match self.rule {
            AlertRule::Significance => self.critical_difference(),
            AlertRule::MdeThreshold => self.mde_abs,
        }
    }

    fn recompute(&mut self) {
        let z = normal_quantile(1.0 - self.alpha / 2.0) + normal_quantile(self.power);
        self.mde_abs = z * self.difference_se();
        self.mde_rel = self.baseline.map(|b| self.mde_abs / b);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertStatus {
    Fire,
    Quiet,
    /// A window was incomplete; no comparison was made.
    NoDecision,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlertDecision {
    pub status: AlertStatus,
    pub recent_window: (NaiveDate, NaiveDate),
    pub previous_window: (NaiveDate, NaiveDate),
    pub recent_mean: Option<f64>,
    pub previous_mean: Option<f64>,
    pub delta: Option<f64>,
    pub threshold: f64,
    pub mde_abs: f64,
    pub inflation: f64,
    pub rule: AlertRule,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_days: Vec<NaiveDate>,
}

/// Compares the window ending at the series' last day with the preceding
/// window.
pub fn evaluate_alert(series: &DailySeries, plan: &MdePlan) -> Result<AlertDecision> {
    let end = series
        .last_day()
        .ok_or_else(|| Error::InsufficientData("series is empty".into()))?;
    Ok(evaluate_alert_at(series, plan, end))
}

/// Compares the `window_days` ending at `end` with the window that ends
/// `window_days + gap_days` days earlier. Missing days void the decision.
pub fn evaluate_alert_at(series: &DailySeries, plan: &MdePlan, end: NaiveDate) -> AlertDecision {
    let w = plan.window_days as i64;
    let recent = (end - Duration::days(w - 1), end);
    let prev_end = end - Duration::days(w + plan.gap_days as i64);
    let previous = (prev_end - Duration::days(w - 1), prev_end);

    let mean = |pts: &[DailyPoint]| numeric::sum(pts.iter().map(|p| p.theta_hat)) / pts.len() as f64;
    let recent_pts = series.window(recent.1, plan.window_days);
    let prev_pts = series.window(previous.1, plan.window_days);
    let recent_mean = recent_pts.as_ref().ok().map(|p| mean(p));
    let previous_mean = prev_pts.as_ref().ok().map(|p| mean(p));

    let mut missing = Vec::new();
    if let Err(m) = &prev_pts {
        missing.extend_from_slice(m);
    }
    if let Err(m) = &recent_pts {
        missing.extend_from_slice(m);
    }

    let threshold = plan.threshold();
    let (status, delta) = match (recent_mean, previous_mean) {
        (Some(r), Some(p)) => {
            let delta = r - p;
            let status = if delta.abs() > threshold {
                AlertStatus::Fire
            } else {
                AlertStatus::Quiet
            };
            (status, Some(delta))
        }
        _ => (AlertStatus::NoDecision, None),
    };
    AlertDecision {
        status,
        recent_window: recent,
        previous_window: previous,
        recent_mean,
        previous_mean,
        delta,
        threshold,
        mde_abs: plan.mde_abs,
        inflation: plan.inflation,
        rule: plan.rule,
        missing_days: missing,
    }
}
