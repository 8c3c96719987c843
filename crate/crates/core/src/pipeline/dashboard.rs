use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Serialize;

use crate::alerting::{moving_average_7, DailyPoint, DailySeries};
use crate::error::{Error, Result};
use crate::estimator::ALL_SEGMENTS;
use crate::pipeline::estimates::{published, EstimateRecord};

#[derive(Serialize)]
struct SeriesRow {
    day: NaiveDate,
    theta_hat: f64,
    ci_low: f64,
    ci_high: f64,
    ess: f64,
    ma7: Option<f64>,
}

#[derive(Serialize)]
struct PivotRow<'a> {
    day: NaiveDate,
    segment: &'a str,
    estimator: String,
    theta_hat: f64,
    ci_low: f64,
    ci_high: f64,
    ess: f64,
    n_draws: usize,
    rg_corrected: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DashboardFiles {
    pub timeseries: PathBuf,
    pub segments: PathBuf,
}

/// Writes, per policy, `{policy}_timeseries.csv` (day, theta_hat, ci_low,
/// ci_high, ess, ma7) and `{policy}_segments.csv` (one row per day and
/// declared segment). `ma7` is filled only when the 7 days ending at that
/// day are all present.
pub fn emit_dashboard_data(estimates: &[EstimateRecord], dir: &Path) -> Result<Vec<DashboardFiles>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut by_policy: BTreeMap<&str, Vec<EstimateRecord>> = BTreeMap::new();
    for e in estimates {
        by_policy.entry(&e.policy).or_default().push(e.clone());
    }
    let mut out = Vec::new();
    for (policy, recs) in by_policy {
        let days: BTreeSet<NaiveDate> = recs.iter().map(|e| e.day).collect();
        let heads: Vec<&EstimateRecord> = days
            .iter()
            .filter_map(|d| published(&recs, *d, ALL_SEGMENTS))
            .collect();
        let series = DailySeries::new(
            heads
                .iter()
                .map(|h| DailyPoint {
                    day: h.day,
                    theta_hat: h.theta_hat,
                    variance: h.variance,
                })
                .collect(),
        )?;

        let ts_path = dir.join(format!("{policy}_timeseries.csv"));
        let mut w = csv::Writer::from_path(&ts_path)?;
        for h in &heads {
            w.serialize(SeriesRow {
                day: h.day,
                theta_hat: h.theta_hat,
                ci_low: h.ci_low,
                ci_high: h.ci_high,
                ess: h.ess,
                ma7: moving_average_7(&series, h.day).ok(),
            })?;
        }
        w.flush().map_err(|e| Error::io(&ts_path, e))?;

        let seg_path = dir.join(format!("{policy}_segments.csv"));
        let mut w = csv::Writer::from_path(&seg_path)?;
        let segments: BTreeSet<&str> = recs
            .iter()
            .map(|e| e.segment.as_str())
            .filter(|s| *s != ALL_SEGMENTS)
            .collect();
        let mut wrote = false;
        for day in &days {
            for seg in &segments {
                if let Some(e) = published(&recs, *day, seg) {
                    w.serialize(PivotRow {
                        day: *day,
                        segment: seg,
                        estimator: e.estimator.to_string(),
                        theta_hat: e.theta_hat,
                        ci_low: e.ci_low,
                        ci_high: e.ci_high,
                        ess: e.ess,
                        n_draws: e.n_draws,
                        rg_corrected: e.flags.rg_corrected,
                    })?;
                    wrote = true;
                }
            }
        }
        if !wrote {
            w.write_record([
                "day", "segment", "estimator", "theta_hat", "ci_low", "ci_high", "ess", "n_draws", "rg_corrected",
            ])?;
        }
        w.flush().map_err(|e| Error::io(&seg_path, e))?;
        out.push(DashboardFiles {
            timeseries: ts_path,
            segments: seg_path,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{EstimateFlags, EstimatorKind};

    fn rec(day: NaiveDate, segment: &str, theta: f64) -> EstimateRecord {
        EstimateRecord {
            policy: "p".into(),
            day,
            segment: segment.into(),
            estimator: EstimatorKind::HtHajek,
            theta_hat: theta,
            ci_low: theta * 0.5,
            ci_high: theta * 1.5,
            raw_ci_low: theta * 0.5,
            raw_ci_high: theta * 1.5,
            variance: Some(1e-6),
            ci_width: theta,
            ess: 100.0,
            sample_positive_rate: 0.1,
            n_draws: 100,
            abstentions: 0,
            numerator: 1.0,
            denominator: 1.0,
            flags: EstimateFlags::default(),
            sample_id: "s".into(),
        }
    }

    fn day(i: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2026, 2, 1).unwrap() + chrono::Duration::days(i)
    }

    #[test]
    fn one_day_one_segment() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_dashboard_data(&[rec(day(0), "ALL", 0.01), rec(day(0), "feed", 0.02)], dir.path()).unwrap();
        let ts = fs::read_to_string(&files[0].timeseries).unwrap();
        let pv = fs::read_to_string(&files[0].segments).unwrap();
        assert_eq!(ts.lines().count(), 2);
        assert_eq!(pv.lines().count(), 2);
        assert!(ts.starts_with("day,theta_hat,ci_low,ci_high,ess,ma7\n"));
    }

    #[test]
    fn ma7_only_on_seventh_day() {
        let dir = tempfile::tempdir().unwrap();
        let recs: Vec<_> = (0..7).map(|i| rec(day(i), "ALL", 0.01 * (i + 1) as f64)).collect();
        let files = emit_dashboard_data(&recs, dir.path()).unwrap();
        let mut r = csv::Reader::from_path(&files[0].timeseries).unwrap();
        let ma: Vec<String> = r.records().map(|x| x.unwrap()[5].to_string()).collect();
        assert!(ma[..6].iter().all(String::is_empty));
        assert!((ma[6].parse::<f64>().unwrap() - 0.04).abs() < 1e-15);
    }
}
