use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::numeric;
use crate::sampler::{ContentRecord, SampleDraw};

/// Multinomial (with-replacement) design over a materialized weight list.
///
/// Draw probabilities are `w_j / sum(w)` with a compensated total; draws use
/// an alias table so each one costs O(1).
#[derive(Clone, Debug)]
pub struct PpswrDesign {
    probabilities: Vec<f64>,
    alias: WeightedAliasIndex<f64>,
}

impl PpswrDesign {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::param(
                "weights",
                format!("weight at index {i} must be positive and finite, got {w}"),
            ));
        }
        let total = numeric::sum(weights.iter().copied());
        let probabilities = weights.iter().map(|w| w / total).collect();
        let alias = WeightedAliasIndex::new(weights.to_vec())
            .map_err(|e| Error::param("weights", e.to_string()))?;
        Ok(Self {
            probabilities,
            alias,
        })
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.probabilities[index]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.alias.sample(rng)
    }
}

/// `m` i.i.d. draws with probability proportional to weight.
///
/// Deterministic for a fixed seed and population order. Each draw records
/// `p = w / sum(w)` computed after the full weight pass.
pub fn ppswr_sample(population: &[(ContentRecord, f64)], m: usize, seed: u64) -> Result<Vec<SampleDraw>> {
    if m == 0 {
        return Err(Error::param("sample_size", "must be at least 1"));
    }
    let weights: Vec<f64> = population.iter().map(|(_, w)| *w).collect();
    let design = PpswrDesign::new(&weights)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..m)
        .map(|_| {
            let j = design.draw(&mut rng);
            let (record, weight) = &population[j];
            SampleDraw::from_record(record, *weight, design.probability(j))
        })
        .collect())
}
