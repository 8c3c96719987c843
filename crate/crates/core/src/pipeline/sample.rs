use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::WeightBasis;
use crate::pipeline::ingest::RecordSource;
use crate::sampler::{
    compute_weight, ppswr_sample, ContentRecord, ItemUniforms, PpsworSampler, SampleDraw, SamplingConfig, Scheme,
};

const DAY_DOMAIN: u64 = 0x4441_5953_4545_4421;

/// Sampler seed for one day, derived from the configured seed so each day
/// gets fresh uniforms while the whole run stays reproducible.
pub fn day_seed(seed: u64, day: NaiveDate) -> u64 {
    ItemUniforms::with_domain(seed, DAY_DOMAIN).hash(&day.format("%Y-%m-%d").to_string())
}

/// The configured sampling parameters with the day's seed.
pub fn sampling_for_day(sampling: &SamplingConfig, day: NaiveDate) -> SamplingConfig {
    SamplingConfig {
        seed: day_seed(sampling.seed, day),
        ..sampling.clone()
    }
}

/// Design facts stored next to the draws; enough to recompute estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub scheme: Scheme,
    pub sample_size: usize,
    /// Seed the sampler actually used.
    pub seed: u64,
    /// m-th smallest reservoir key (without-replacement designs).
    pub threshold: Option<f64>,
    pub total_weight: f64,
    pub items_seen: u64,
    /// Score assigned to units without one.
    pub fallback_score: f64,
    pub total_impressions: u64,
    /// Segment impression totals counted from the log.
    pub segment_totals: BTreeMap<String, u64>,
    /// sha256 of the unlabeled draws; shared by every estimate of the day.
    pub sample_id: String,
}

impl SampleMeta {
    pub fn basis(&self) -> WeightBasis {
        match self.scheme {
            Scheme::Ppswor => WeightBasis::InclusionProbability,
            Scheme::Ppswr => WeightBasis::DrawProbability,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DailySample {
    pub draws: Vec<SampleDraw>,
    pub meta: SampleMeta,
}

fn sample_id(draws: &[SampleDraw]) -> Result<String> {
    let mut h = Sha256::new();
    for d in draws {
        h.update(serde_json::to_vec(d)?);
        h.update(b"\n");
    }
    Ok(hex::encode(h.finalize()))
}

/// Two passes over the source: the first resolves the imputed score and
/// counts impressions, the second weights and samples.
pub fn draw_daily_sample(source: &dyn RecordSource, sampling: &SamplingConfig) -> Result<DailySample> {
    sampling.validate()?;
    let mut scores = Vec::new();
    let mut total_impressions = 0u64;
    let mut segment_totals: BTreeMap<String, u64> = BTreeMap::new();
    source.for_each_record(&mut |r| {
        if let Some(s) = r.score {
            scores.push(s);
        }
        total_impressions += r.impressions;
        for (k, v) in &r.segment_impressions {
            *segment_totals.entry(k.clone()).or_default() += v;
        }
        Ok(())
    })?;
    if total_impressions == 0 {
        return Err(Error::EmptyPopulation);
    }
    let fallback_score = match sampling.score_imputation.resolve(scores) {
        Ok(s) => s,
        // Scores do not enter the weight when gamma = 0.
        Err(Error::NoScoresForImputation) if sampling.gamma == 0.0 => 1.0,
        Err(e) => return Err(e),
    };

    let (draws, threshold, total_weight, items_seen) = match sampling.scheme {
        Scheme::Ppswor => {
            let mut sampler = PpsworSampler::new(sampling, fallback_score)?;
            source.for_each_record(&mut |r| sampler.offer(r).map(|_| ()))?;
            let s = sampler.finish();
            (s.draws, s.threshold, s.total_weight, s.items_seen)
        }
        Scheme::Ppswr => {
            let mut pop: Vec<(ContentRecord, f64)> = Vec::new();
            source.for_each_record(&mut |r| {
                let w = compute_weight(&r, sampling, fallback_score)?;
                pop.push((r, w));
                Ok(())
            })?;
            let total = crate::numeric::sum(pop.iter().map(|p| p.1));
            let n = pop.len() as u64;
            (ppswr_sample(&pop, sampling.sample_size, sampling.seed)?, None, total, n)
        }
    };
    let sample_id = sample_id(&draws)?;
    Ok(DailySample {
        draws,
        meta: SampleMeta {
            scheme: sampling.scheme,
            sample_size: sampling.sample_size,
            seed: sampling.seed,
            threshold,
            total_weight,
            items_seen,
            fallback_score,
            total_impressions,
            segment_totals,
            sample_id,
        },
    })
}
