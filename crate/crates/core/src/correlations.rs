//! First- and second-order correlation patterns of the chain's fluorescence.
//!
//! G¹ is evaluated for an arbitrary pulse area from the post-pulse
//! populations and coherences of uncorrelated ions. G² is evaluated for
//! π-pulse excitation, where every pair (i, j) of radiating ions contributes
//! `|α_iβ_j + α_jβ_i|² = 2 + 2cos(2π(R_i − R_j)(sin φ₁ − sin φ₂))`.
//!
//! The four-ion and two-ion closed forms are kept separate from the general
//! sums so they can serve as independent checks.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{resolve_slice, ExcitationPulse, IonChain, ResolvedSlice, SliceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum CorrelationOrder {
    First,
    Second,
}

impl CorrelationOrder {
    pub fn as_u8(self) -> u8 {
        match self {
            CorrelationOrder::First => 1,
            CorrelationOrder::Second => 2,
        }
    }
}

impl TryFrom<u8> for CorrelationOrder {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(CorrelationOrder::First),
            2 => Ok(CorrelationOrder::Second),
            _ => Err(Error::InvalidArgument(format!(
                "correlation order must be 1 or 2 (got {v})"
            ))),
        }
    }
}

impl From<CorrelationOrder> for u8 {
    fn from(o: CorrelationOrder) -> u8 {
        o.as_u8()
    }
}

/// Phase `2π(R_i − R_j)(sin φ₁ − sin φ₂)` between two radiating ions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPhase {
    /// 0-based, `i < j`.
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Pair phases of all radiating pairs for a given sin-difference `delta`,
/// in canonical (i, j) lexicographic order.
pub fn pair_phases(chain: &IonChain, delta: f64) -> impl Iterator<Item = PairPhase> + '_ {
    let pos = chain.positions();
    let rad: Vec<usize> = chain.radiating().collect();
    (0..rad.len()).flat_map(move |a| {
        let rad = rad.clone();
        (a + 1..rad.len()).map(move |b| {
            let (i, j) = (rad[a], rad[b]);
            PairPhase {
                i,
                j,
                value: TAU * (pos[i] - pos[j]) * delta,
            }
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternMeta {
    pub chain: IonChain,
    pub pulse: ExcitationPulse,
    pub order: CorrelationOrder,
    pub isotope: Option<usize>,
}

/// Correlation values sampled along a slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub slice: SliceSpec,
    pub axis: Vec<f64>,
    /// (φ₁, φ₂) of each value. Row-major for grids.
    pub points: Vec<(f64, f64)>,
    pub values: Vec<f64>,
    pub meta: PatternMeta,
    /// `false` when the pattern is identically zero by construction
    /// (fewer than two radiating ions for G²).
    pub normalizable: bool,
}

impl Pattern {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// max − min over all points.
    pub fn spread(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn order(&self) -> CorrelationOrder {
        self.meta.order
    }

    /// The same pattern with every value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Pattern {
        Pattern {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }
}

/// G¹ at a single detector angle.
pub fn g1_at(chain: &IonChain, pulse: ExcitationPulse, phi1: f64) -> f64 {
    let pos = chain.positions();
    let s = phi1.sin();
    let rad: Vec<usize> = chain.radiating().collect();
    let mut cross = 0.0;
    for (a, &i) in rad.iter().enumerate() {
        for &j in &rad[a + 1..] {
            // (i, j) and (j, i) contribute complex-conjugate terms
            cross += 2.0 * (TAU * (pos[i] - pos[j]) * s).cos();
        }
    }
    let g = rad.len() as f64 * pulse.excited_population() + pulse.coherence_sq() * cross;
    g.max(0.0)
}

/// G² at a detector pair, π-pulse excitation.
pub fn g2_at(chain: &IonChain, phi1: f64, phi2: f64) -> f64 {
    let delta = phi1.sin() - phi2.sin();
    pair_phases(chain, delta)
        .map(|pp| 2.0 + 2.0 * pp.value.cos())
        .sum()
}

fn evaluate<F>(resolved: &ResolvedSlice, f: F) -> Vec<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    resolved.points.par_iter().map(|&(a, b)| f(a, b)).collect()
}

pub fn g1_pattern(chain: &IonChain, pulse: ExcitationPulse, slice: &SliceSpec) -> Result<Pattern> {
    if chain.radiating_count() < 1 {
        return Err(Error::DegenerateConfiguration(
            "G1 needs at least one radiating ion".into(),
        ));
    }
    let resolved = resolve_slice(slice)?;
    let values = evaluate(&resolved, |phi1, _| g1_at(chain, pulse, phi1));
    Ok(Pattern {
        slice: *slice,
        axis: resolved.axis,
        points: resolved.points,
        values,
        meta: PatternMeta {
            chain: chain.clone(),
            pulse,
            order: CorrelationOrder::First,
            isotope: chain.isotope(),
        },
        normalizable: true,
    })
}

/// π-pulse G² over a slice. With fewer than two radiating ions the result is
/// all zeros and flagged non-normalizable.
pub fn g2_pattern(chain: &IonChain, slice: &SliceSpec) -> Result<Pattern> {
    let resolved = resolve_slice(slice)?;
    let normalizable = chain.radiating_count() >= 2;
    let values = if normalizable {
        evaluate(&resolved, |a, b| g2_at(chain, a, b))
    } else {
        vec![0.0; resolved.len()]
    };
    Ok(Pattern {
        slice: *slice,
        axis: resolved.axis,
        points: resolved.points,
        values,
        meta: PatternMeta {
            chain: chain.clone(),
            pulse: ExcitationPulse::pi(),
            order: CorrelationOrder::Second,
            isotope: chain.isotope(),
        },
        normalizable,
    })
}

/// Dispatches to [`g1_pattern`] or [`g2_pattern`]. G² is only defined here
/// for a π pulse.
pub fn pattern_over_slice(
    order: CorrelationOrder,
    chain: &IonChain,
    pulse: ExcitationPulse,
    slice: &SliceSpec,
) -> Result<Pattern> {
    match order {
        CorrelationOrder::First => g1_pattern(chain, pulse, slice),
        CorrelationOrder::Second if pulse.is_pi() => g2_pattern(chain, slice),
        CorrelationOrder::Second => Err(Error::Unsupported(format!(
            "G2 requires a pi pulse (got theta = {})",
            pulse.area()
        ))),
    }
}

/// Two ions, both excited: `2(1 + cos(2π s (sin φ₁ − sin φ₂)))`.
pub fn g2_two_ion_closed(separation: f64, phi1: f64, phi2: f64) -> f64 {
    2.0 * (1.0 + (TAU * separation * (phi1.sin() - phi2.sin())).cos())
}

fn check_four(d: f64, p: usize) -> Result<()> {
    if !(1..=4).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "four-ion isotope index must be in 1..=4 (got {p})"
        )));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "spacing must be positive (got {d})"
        )));
    }
    Ok(())
}

/// Four equally spaced ions, π pulse, isotope at `p`.
pub fn g2_four_closed(d: f64, p: usize, phi1: f64, phi2: f64) -> Result<f64> {
    check_four(d, p)?;
    let delta = phi1.sin() - phi2.sin();
    let c = |m: f64| (2.0 * PI * m * d * delta).cos();
    let (c1, c2, c3) = (c(1.0), c(2.0), c(3.0));
    Ok(match p {
        1 | 4 => 2.0 * (3.0 + 2.0 * c1 + c2),
        _ => 2.0 * (3.0 + c1 + c2 + c3),
    })
}

/// Four equally spaced ions, π/2 pulse, isotope at `p`.
pub fn g1_four_closed(d: f64, p: usize, phi1: f64) -> Result<f64> {
    check_four(d, p)?;
    let s = phi1.sin();
    let c = |m: f64| (2.0 * PI * m * d * s).cos();
    let (c1, c2, c3) = (c(1.0), c(2.0), c(3.0));
    Ok(match p {
        1 | 4 => 0.5 * (3.0 + 2.0 * c1 + c2),
        _ => 0.5 * (3.0 + c1 + c2 + c3),
    })
}

/// Spacing and isotope of a four-ion chain, rejecting anything the
/// closed forms do not describe.
pub fn four_ion_parameters(chain: &IonChain) -> Result<(f64, usize)> {
    if chain.n() != 4 {
        return Err(Error::Unsupported(format!(
            "closed form covers N = 4 only (got N = {})",
            chain.n()
        )));
    }
    let d = chain.spacing().ok_or_else(|| {
        Error::Unsupported("closed form covers equally spaced chains only".into())
    })?;
    let p = chain
        .isotope()
        .ok_or_else(|| Error::Unsupported("closed form needs an isotope".into()))?;
    Ok((d, p))
}
