//! Label providers and labeler decision quality.
//!
//! Providers attach a label (or an explicit abstention) to every sampled
//! unit. Gold-set evaluation measures the labeler's sensitivity and
//! false-positive rate, gates metric launches on a minimum quality bar and
//! feeds the label-error correction.

mod gold;
mod provider;

use rand::seq::index;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::SampleDraw;

pub use gold::{
    evaluate_gold_rows, evaluate_gold_set, quality_gate, read_gold_set, ConfusionMatrix,
    GateDecision, GoldRow, GoldSetReport, QualityThresholds, Rate,
};
pub use provider::{
    label_sample, FileJoin, LabelOutput, LabelProvider, LabelRow, LabeledSample, MockRemote,
    MockRemoteSpec, ProviderKind, SyntheticOracle, Usage,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationSampling {
    /// Equal-probability draws from the day's sample.
    #[default]
    Uniform,
    /// Without-replacement draws proportional to the sampling weight.
    ByWeight,
}

/// Picks `k` of the day's draws for human validation.
pub fn validation_subsample(
    draws: &[SampleDraw],
    k: usize,
    method: ValidationSampling,
    seed: u64,
) -> Result<Vec<SampleDraw>> {
    if k > draws.len() {
        return Err(Error::param(
            "k",
            format!("subsample of {k} exceeds the {} draws available", draws.len()),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = match method {
        ValidationSampling::Uniform => index::sample(&mut rng, draws.len(), k).into_vec(),
        ValidationSampling::ByWeight => {
            let idx: Vec<usize> = (0..draws.len()).collect();
            idx.choose_multiple_weighted(&mut rng, k, |&i| draws[i].weight)
                .map_err(|e| Error::param("weight", e.to_string()))?
                .copied()
                .collect()
        }
    };
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| draws[i].clone()).collect())
}
