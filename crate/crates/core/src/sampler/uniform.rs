use std::hash::Hasher;

use siphasher::sip::SipHasher13;

/// Per-item uniform variates in (0, 1] derived from a keyed hash of
/// `(seed, content_id)`.
///
/// The variate of a unit never depends on where it appears in the stream, so
/// reservoirs built from any permutation or sharding of a day's log retain
/// the same units.
#[derive(Clone, Copy, Debug)]
pub struct ItemUniforms {
    seed: u64,
    domain: u64,
}

// Separates the sampling stream from other consumers of the same seed
// (e.g. the mock labeler).
const SAMPLING_DOMAIN: u64 = 0x5a4d_504c_494e_4731;

impl ItemUniforms {
    pub fn new(seed: u64) -> Self {
        Self::with_domain(seed, SAMPLING_DOMAIN)
    }

    pub fn with_domain(seed: u64, domain: u64) -> Self {
        Self { seed, domain }
    }

    pub fn hash(&self, content_id: &str) -> u64 {
        let mut h = SipHasher13::new_with_keys(self.seed, self.domain);
        h.write(content_id.as_bytes());
        h.finish()
    }

    pub fn uniform(&self, content_id: &str) -> f64 {
        unit_interval_open_closed(self.hash(content_id))
    }
}

/// Maps 64 random bits onto the 2^53-point grid {1/2^53, ..., 1}.
#[inline]
pub fn unit_interval_open_closed(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_endpoints() {
        assert_eq!(unit_interval_open_closed(u64::MAX), 1.0);
        assert!(unit_interval_open_closed(0) > 0.0);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = ItemUniforms::new(7);
        assert_eq!(a.uniform("pin-1"), a.uniform("pin-1"));
        assert_ne!(a.uniform("pin-1"), a.uniform("pin-2"));
        assert_ne!(a.uniform("pin-1"), ItemUniforms::new(8).uniform("pin-1"));
        assert_ne!(
            a.uniform("pin-1"),
            ItemUniforms::with_domain(7, 1).uniform("pin-1")
        );
    }

    #[test]
    fn roughly_uniform() {
        let u = ItemUniforms::new(1);
        let n = 100_000;
        let mean = (0..n).map(|i| u.uniform(&format!("c{i}"))).sum::<f64>() / n as f64;
        // sd of the mean = sqrt(1/12 / n) ~ 9.1e-4
        assert!((mean - 0.5).abs() < 4e-3, "mean {mean}");
    }
}
