//! Normalized event distributions over a slice, and seeded event draws.
//!
//! Randomness is counter-based: draw `k` of a stream seeded with `s` is
//! `mix64(s + (k + 1)·GOLDEN)`, i.e. the k-th output of SplitMix64, so any
//! draw can be computed independently of the others. Per-trial seeds come
//! from [`derive_seed`] with the same mixer.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::correlations::{CorrelationOrder, Pattern};
use crate::error::{Error, Result};

/// Weyl increment of SplitMix64 (2^64 / φ).
pub const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_MUL_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_MUL_2: u64 = 0x94D0_49BB_1331_11EB;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_MUL_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_MUL_2);
    z ^ (z >> 31)
}

/// The `index`-th output of a SplitMix64 stream seeded with `seed`.
pub fn counter_u64(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1))))
}

/// Uniform in [0, 1) with 53 random bits.
pub fn counter_uniform(seed: u64, index: u64) -> f64 {
    (counter_u64(seed, index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seed for sub-experiment `index` (a trial, a schedule point) of a run
/// seeded with `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    counter_u64(master, index)
}

/// A detection bin: (φ₁, φ₂), φ₂ absent for single-detector events.
/// Serialized as `[phi1, phi2]` or `[phi1, null]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin(pub f64, pub Option<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    bins: Vec<Bin>,
    probs: Vec<f64>,
    cdf: Vec<f64>,
    /// Index returned when a uniform lands past the last cdf value.
    last_support: usize,
    id: String,
}

impl DiscreteDistribution {
    /// Builds a distribution from non-negative weights.
    pub fn from_weights(bins: Vec<Bin>, weights: &[f64]) -> Result<Self> {
        if bins.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} bins but {} weights",
                bins.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::NonNormalizable(format!(
                "weights must be finite and non-negative (got {w})"
            )));
        }
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::NonNormalizable(
                "all weights are zero (fewer than two radiating ions or a degenerate slice)".into(),
            ));
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let cdf: Vec<f64> = probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let last_support = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        let id = distribution_hash(&bins, &probs);
        Ok(Self {
            bins,
            probs,
            cdf,
            last_support,
            id,
        })
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Hex digest of bins and probabilities.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Inverse-CDF lookup: the first bin whose cumulative probability
    /// exceeds `u`. Zero-probability bins are never returned.
    pub fn index_for(&self, u: f64) -> usize {
        let i = self.cdf.partition_point(|&c| c <= u);
        if i >= self.cdf.len() {
            self.last_support
        } else {
            i
        }
    }
}

fn distribution_hash(bins: &[Bin], probs: &[f64]) -> String {
    let mut h = Sha256::new();
    for (b, p) in bins.iter().zip(probs) {
        h.update(b.0.to_bits().to_le_bytes());
        h.update(b.1.map_or(u64::MAX, f64::to_bits).to_le_bytes());
        h.update(p.to_bits().to_le_bytes());
    }
    h.finalize()[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Bins of a pattern, in pattern order.
pub fn pattern_bins(pattern: &Pattern) -> Vec<Bin> {
    let two = pattern.order() == CorrelationOrder::Second || pattern.slice.is_grid();
    pattern
        .points
        .iter()
        .map(|&(a, b)| Bin(a, two.then_some(b)))
        .collect()
}

/// `probs[i] = values[i] / Σ values`.
pub fn normalize(pattern: &Pattern) -> Result<DiscreteDistribution> {
    if !pattern.normalizable {
        return Err(Error::NonNormalizable(
            "pattern is identically zero (fewer than two radiating ions)".into(),
        ));
    }
    DiscreteDistribution::from_weights(pattern_bins(pattern), &pattern.values)
}

/// Seeded detection record over a distribution's bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSet {
    pub seed: u64,
    pub bins: Vec<Bin>,
    pub events: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution_id: Option<String>,
}

impl EventSet {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// The first `m` events (fewer if the set is shorter).
    pub fn prefix(&self, m: usize) -> EventSet {
        EventSet {
            events: self.events[..m.min(self.events.len())].to_vec(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.events.iter().find(|&&e| e >= self.bins.len()) {
            return Err(Error::Integrity(format!(
                "event index {e} out of range for {} bins",
                self.bins.len()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let set: EventSet = serde_json::from_str(s)?;
        set.validate()?;
        Ok(set)
    }

    /// Checks that these events were recorded over `dist`'s bins. When the
    /// set carries a distribution id, it must match exactly.
    pub fn check_source(&self, dist: &DiscreteDistribution) -> Result<()> {
        match &self.distribution_id {
            Some(id) if id != dist.id() => Err(Error::Integrity(format!(
                "events come from distribution {id}, not {}",
                dist.id()
            ))),
            _ => self.check_bins(dist),
        }
    }

    /// Checks only that the bins agree (the probabilities may differ).
    pub fn check_bins(&self, dist: &DiscreteDistribution) -> Result<()> {
        if self.bins != dist.bins() {
            return Err(Error::Integrity(
                "event bins differ from the distribution's bins".into(),
            ));
        }
        Ok(())
    }
}

/// `m` independent inverse-CDF draws from `dist`.
pub fn sample_events(dist: &DiscreteDistribution, m: usize, seed: u64) -> EventSet {
    let events = (0..m as u64)
        .into_par_iter()
        .map(|k| dist.index_for(counter_uniform(seed, k)))
        .collect();
    EventSet {
        seed,
        bins: dist.bins().to_vec(),
        events,
        distribution_id: Some(dist.id().to_owned()),
    }
}

/// Relative frequency of each bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub frequencies: Vec<f64>,
    /// Set when there were no events; frequencies are then all zero.
    pub empty: bool,
}

pub fn empirical_histogram(events: &EventSet, dist: &DiscreteDistribution) -> Result<Histogram> {
    events.check_source(dist)?;
    events.validate()?;
    let mut counts = vec![0usize; dist.len()];
    for &e in &events.events {
        counts[e] += 1;
    }
    let m = events.len();
    let frequencies = if m == 0 {
        vec![0.0; dist.len()]
    } else {
        counts.iter().map(|&c| c as f64 / m as f64).collect()
    };
    Ok(Histogram {
        frequencies,
        empty: m == 0,
    })
}

/// ½ Σ |a_i − b_i|.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
