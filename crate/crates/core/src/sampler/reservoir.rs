//! Weighted reservoir (PPSWOR) built on exponential-race keys.
//!
//! Every unit gets the key `-ln(U) / w`; the `m` units with the smallest
//! keys form the sample. Because `U` is derived from the unit's id rather
//! than from a shared RNG stream, the retained set depends only on the set
//! of units offered, which makes reservoirs over disjoint shards mergeable.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::sampler::{compute_weight, ContentRecord, ItemUniforms, SampleDraw, SamplingConfig};

/// Exponential-race key `-ln(u) / weight`.
pub fn reservoir_key(weight: f64, uniform: f64) -> Result<f64> {
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(Error::param("weight", format!("must be positive and finite, got {weight}")));
    }
    if !(uniform > 0.0 && uniform <= 1.0) {
        return Err(Error::UniformOutOfRange(uniform));
    }
    // -ln(1) is -0.0; normalise so keys compare cleanly.
    Ok((-uniform.ln() / weight).max(0.0))
}

/// Poissonized inclusion probability `1 - exp(-weight * threshold)`.
pub fn inclusion_probability(weight: f64, threshold: Option<f64>) -> Result<f64> {
    let tau = threshold.ok_or(Error::ThresholdUndefined)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param("threshold", format!("must be positive and finite, got {tau}")));
    }
    if !(weight > 0.0) {
        return Err(Error::param("weight", format!("must be positive, got {weight}")));
    }
    Ok(-(-weight * tau).exp_m1())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirEntry {
    pub key: f64,
    pub weight: f64,
    pub record: ContentRecord,
}

impl ReservoirEntry {
    // Keys ordered numerically, exact ties broken by content_id.
    fn rank_cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then_with(|| self.record.content_id.cmp(&other.record.content_id))
    }
}

struct Ranked(ReservoirEntry);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank_cmp(&other.0)
    }
}

/// Fixed-capacity reservoir holding the `capacity` smallest keys seen.
///
/// Memory is O(capacity) regardless of stream length. Duplicate ids are
/// detected against the retained set; full-stream duplicate detection is
/// the ingestion layer's job.
pub struct Reservoir {
    capacity: usize,
    heap: BinaryHeap<Ranked>,
    ids: HashSet<String>,
    total_weight: CompensatedSum,
    items_seen: u64,
}

impl std::fmt::Debug for Reservoir {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Reservoir")
            .field("capacity", &self.capacity)
            .field("len", &self.heap.len())
            .field("threshold", &self.threshold())
            .field("total_weight_seen", &self.total_weight_seen())
            .field("items_seen", &self.items_seen)
            .finish()
    }
}

impl Reservoir {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::param("capacity", "must be at least 1"));
        }
        Ok(Self {
            capacity,
            heap: BinaryHeap::with_capacity(capacity + 1),
            ids: HashSet::with_capacity(capacity + 1),
            total_weight: CompensatedSum::new(),
            items_seen: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() == self.capacity
    }

    pub fn items_seen(&self) -> u64 {
        self.items_seen
    }

    pub fn total_weight_seen(&self) -> f64 {
        self.total_weight.value()
    }

    /// The largest retained key once the reservoir is full.
    pub fn threshold(&self) -> Option<f64> {
        if self.is_full() {
            self.heap.peek().map(|r| r.0.key)
        } else {
            None
        }
    }

    /// Offers a unit with its precomputed weight and key. Returns whether the
    /// unit is currently retained.
    pub fn offer(&mut self, record: ContentRecord, weight: f64, key: f64) -> Result<bool> {
        if !(key >= 0.0) {
            return Err(Error::param("key", format!("must be >= 0, got {key}")));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::NonFiniteWeight {
                content_id: record.content_id,
                weight,
            });
        }
        if self.ids.contains(&record.content_id) {
            return Err(Error::DuplicateContent(record.content_id));
        }
        self.total_weight.add(weight);
        self.items_seen += 1;
        Ok(self.insert(ReservoirEntry {
            key,
            weight,
            record,
        }))
    }

    fn insert(&mut self, entry: ReservoirEntry) -> bool {
        if self.heap.len() < self.capacity {
            self.ids.insert(entry.record.content_id.clone());
            self.heap.push(Ranked(entry));
            return true;
        }
        let top = self.heap.peek().expect("full reservoir has a top");
        if entry.rank_cmp(&top.0) == Ordering::Less {
            let evicted = self.heap.pop().expect("nonempty");
            self.ids.remove(&evicted.0.record.content_id);
            self.ids.insert(entry.record.content_id.clone());
            self.heap.push(Ranked(entry));
            true
        } else {
            false
        }
    }

    /// Union of two reservoirs over disjoint streams, keeping the
    /// `capacity` smallest keys.
    pub fn merge(mut self, other: Reservoir) -> Result<Reservoir> {
        if self.capacity != other.capacity {
            return Err(Error::CapacityMismatch {
                left: self.capacity,
                right: other.capacity,
            });
        }
        if let Some(shared) = other.ids.iter().find(|id| self.ids.contains(*id)) {
            return Err(Error::DuplicateContent(shared.clone()));
        }
        self.total_weight.merge(&other.total_weight);
        self.items_seen += other.items_seen;
        for Ranked(entry) in other.heap.into_vec() {
            self.insert(entry);
        }
        Ok(self)
    }

    /// Retained entries in ascending key order.
    pub fn entries(&self) -> Vec<&ReservoirEntry> {
        let mut v: Vec<_> = self.heap.iter().map(|r| &r.0).collect();
        v.sort_by(|a, b| a.rank_cmp(b));
        v
    }

    pub fn into_entries(self) -> Vec<ReservoirEntry> {
        self.heap.into_sorted_vec().into_iter().map(|r| r.0).collect()
    }

    /// Retained keys in ascending order.
    pub fn keys(&self) -> Vec<f64> {
        self.entries().iter().map(|e| e.key).collect()
    }

    /// Converts the retained units into draws.
    ///
    /// Each draw carries `p = w / sum(w)` and, when the reservoir filled,
    /// the Poissonized inclusion probability. An underfull reservoir holds
    /// the entire population, so every unit has inclusion probability 1.
    pub fn into_sample(self) -> PpsworSample {
        let threshold = self.threshold();
        let total_weight = self.total_weight_seen();
        let items_seen = self.items_seen;
        let draws = self
            .into_entries()
            .into_iter()
            .map(|e| {
                let mut d = SampleDraw::from_record(&e.record, e.weight, e.weight / total_weight);
                d.inclusion_probability = Some(match threshold {
                    Some(tau) => -(-e.weight * tau).exp_m1(),
                    None => 1.0,
                });
                d
            })
            .collect();
        PpsworSample {
            draws,
            threshold,
            total_weight,
            items_seen,
        }
    }
}

/// Output of a finished without-replacement sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PpsworSample {
    /// Draws in ascending key order.
    pub draws: Vec<SampleDraw>,
    pub threshold: Option<f64>,
    pub total_weight: f64,
    pub items_seen: u64,
}

/// One-pass PPSWOR sampler: weights, keys and reservoir in one place.
#[derive(Debug)]
pub struct PpsworSampler {
    config: SamplingConfig,
    uniforms: ItemUniforms,
    fallback_score: f64,
    reservoir: Reservoir,
}

impl PpsworSampler {
    /// `fallback_score` is the imputed score for units without one.
    pub fn new(config: &SamplingConfig, fallback_score: f64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config: config.clone(),
            uniforms: ItemUniforms::new(config.seed),
            fallback_score,
            reservoir: Reservoir::new(config.sample_size)?,
        })
    }

    pub fn offer(&mut self, record: ContentRecord) -> Result<bool> {
        let weight = compute_weight(&record, &self.config, self.fallback_score)?;
        let key = reservoir_key(weight, self.uniforms.uniform(&record.content_id))?;
        self.reservoir.offer(record, weight, key)
    }

    pub fn reservoir(&self) -> &Reservoir {
        &self.reservoir
    }

    pub fn into_reservoir(self) -> Reservoir {
        self.reservoir
    }

    pub fn finish(self) -> PpsworSample {
        self.reservoir.into_sample()
    }
}
