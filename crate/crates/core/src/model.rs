//! Physical configuration: the ion chain, detector angles, the excitation
//! pulse, and the detector-angle trajectories ("slices") that cut 1-D curves
//! out of the (φ₁, φ₂) plane.
//!
//! Lengths are dimensionless, in units of the fluorescence wavelength, so the
//! wavenumber times a distance `d` is always `2π·d`. The chain lies along a
//! single axis in the detection plane and a detector at angle φ sees the
//! projection `R_j·sin φ`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the equally-spaced predicate.
pub const EQUAL_SPACING_RTOL: f64 = 1e-12;

/// Default number of φ₁ samples for 1-D slices.
pub const DEFAULT_SCAN_POINTS: usize = 1001;

/// Default samples per axis for [`SliceSpec::Grid2D`].
pub const DEFAULT_GRID_POINTS: usize = 201;

/// Wavelength of the fluorescence light used for display, in nanometres.
/// Never enters a computation.
pub const DISPLAY_WAVELENGTH_NM: f64 = 194.0;

/// A linear chain of ions, one of which may be a dark isotope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainDocument", into = "ChainDocument")]
pub struct IonChain {
    positions: Vec<f64>,
    isotope: Option<usize>,
}

impl IonChain {
    /// Builds a chain from positions (in wavelengths) and an optional 1-based
    /// isotope index.
    pub fn new(positions: Vec<f64>, isotope: Option<usize>) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::Invariant(format!(
                "chain length N >= 2 (got N = {})",
                positions.len()
            )));
        }
        if let Some(bad) = positions.iter().find(|x| !x.is_finite()) {
            return Err(Error::Invariant(format!(
                "positions must be finite (got {bad})"
            )));
        }
        if let Some(k) = positions.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Invariant(format!(
                "positions strictly increasing (ion {} at {} is not after ion {} at {})",
                k + 2,
                positions[k + 1],
                k + 1,
                positions[k]
            )));
        }
        let chain = Self {
            positions,
            isotope: None,
        };
        chain.with_isotope(isotope)
    }

    /// `n` ions spaced `spacing` wavelengths apart, the first one at the origin.
    pub fn equally_spaced(n: usize, spacing: f64, isotope: Option<usize>) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Invariant(format!(
                "spacing must be positive and finite (got {spacing})"
            )));
        }
        Self::new((0..n).map(|k| k as f64 * spacing).collect(), isotope)
    }

    /// Same positions with a different isotope assignment.
    pub fn with_isotope(&self, isotope: Option<usize>) -> Result<Self> {
        if let Some(p) = isotope {
            if p == 0 || p > self.positions.len() {
                return Err(Error::Invariant(format!(
                    "isotope index 1 <= p <= N (got p = {p}, N = {})",
                    self.positions.len()
                )));
            }
        }
        Ok(Self {
            positions: self.positions.clone(),
            isotope,
        })
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// 1-based index of the dark ion.
    pub fn isotope(&self) -> Option<usize> {
        self.isotope
    }

    /// 0-based indices of the ions that scatter light.
    pub fn radiating(&self) -> impl Iterator<Item = usize> + '_ {
        let dark = self.isotope.map(|p| p - 1);
        (0..self.positions.len()).filter(move |&j| Some(j) != dark)
    }

    pub fn radiating_count(&self) -> usize {
        self.positions.len() - usize::from(self.isotope.is_some())
    }

    pub fn is_equally_spaced(&self) -> bool {
        let first = self.positions[1] - self.positions[0];
        self.positions
            .windows(2)
            .all(|w| ((w[1] - w[0]) - first).abs() <= EQUAL_SPACING_RTOL * first.abs())
    }

    /// Common spacing, if the chain is equally spaced.
    pub fn spacing(&self) -> Option<f64> {
        self.is_equally_spaced()
            .then(|| self.positions[1] - self.positions[0])
    }

    /// Loads a chain from a JSON document, either
    /// `{"positions_lambda": [...], "isotope": p|null}` or
    /// `{"n": N, "spacing_lambda": d, "isotope": p|null}`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let config: ChainConfig = serde_json::from_str(s)?;
        config.build()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainDocument {
    positions_lambda: Vec<f64>,
    #[serde(default)]
    isotope: Option<usize>,
}

impl TryFrom<ChainDocument> for IonChain {
    type Error = Error;

    fn try_from(doc: ChainDocument) -> Result<Self> {
        IonChain::new(doc.positions_lambda, doc.isotope)
    }
}

impl From<IonChain> for ChainDocument {
    fn from(chain: IonChain) -> Self {
        ChainDocument {
            positions_lambda: chain.positions,
            isotope: chain.isotope,
        }
    }
}

/// On-disk chain description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChainConfig {
    Explicit(ExplicitChain),
    EquallySpaced(EquallySpacedChain),
}

/// `{"positions_lambda": [...], "isotope": p|null}`
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitChain {
    pub positions_lambda: Vec<f64>,
    #[serde(default)]
    pub isotope: Option<usize>,
}

/// `{"n": N, "spacing_lambda": d, "isotope": p|null}`
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquallySpacedChain {
    pub n: usize,
    pub spacing_lambda: f64,
    #[serde(default)]
    pub isotope: Option<usize>,
}

impl ChainConfig {
    pub fn build(&self) -> Result<IonChain> {
        match self {
            ChainConfig::Explicit(c) => IonChain::new(c.positions_lambda.clone(), c.isotope),
            ChainConfig::EquallySpaced(c) => {
                IonChain::equally_spaced(c.n, c.spacing_lambda, c.isotope)
            }
        }
    }
}

/// Far-field detector angle, φ = arctan(r_y / r_x).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DetectorAngle(f64);

impl DetectorAngle {
    pub fn new(phi: f64) -> Result<Self> {
        if phi.is_nan() || phi.abs() > FRAC_PI_2 {
            return Err(Error::Invariant(format!(
                "detector angle |phi| <= pi/2 (got {phi})"
            )));
        }
        Ok(Self(phi))
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

/// Pulse area θ on the f↔e transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ExcitationPulse {
    area: f64,
}

impl ExcitationPulse {
    pub fn new(area: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&area) {
            return Err(Error::Invariant(format!(
                "pulse area 0 <= theta <= pi (got {area})"
            )));
        }
        Ok(Self { area })
    }

    pub fn pi() -> Self {
        Self { area: PI }
    }

    pub fn half_pi() -> Self {
        Self { area: FRAC_PI_2 }
    }

    pub fn area(self) -> f64 {
        self.area
    }

    /// Excited-state population sin²(θ/2).
    pub fn excited_population(self) -> f64 {
        let s = (self.area / 2.0).sin();
        s * s
    }

    /// Squared modulus of the optical coherence, sin²θ / 4.
    pub fn coherence_sq(self) -> f64 {
        let s = self.area.sin();
        s * s / 4.0
    }

    pub fn is_pi(self) -> bool {
        (self.area - PI).abs() <= 1e-12
    }
}

impl TryFrom<f64> for ExcitationPulse {
    type Error = Error;

    fn try_from(area: f64) -> Result<Self> {
        Self::new(area)
    }
}

impl From<ExcitationPulse> for f64 {
    fn from(p: ExcitationPulse) -> f64 {
        p.area
    }
}

/// Optical phase `k n·R_j = 2π R_j sin φ` picked up by light from ion `ion`
/// (1-based) on its way to a detector at `phi`.
pub fn phase_projection(chain: &IonChain, ion: usize, phi: DetectorAngle) -> Result<f64> {
    if ion == 0 || ion > chain.n() {
        return Err(Error::InvalidArgument(format!(
            "ion index {ion} out of range 1..={}",
            chain.n()
        )));
    }
    Ok(2.0 * PI * chain.positions[ion - 1] * phi.radians().sin())
}

/// Uniform sampling of the scan parameter φ₁.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRange {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for ScanRange {
    fn default() -> Self {
        Self {
            min: -FRAC_PI_2,
            max: FRAC_PI_2,
            points: DEFAULT_SCAN_POINTS,
        }
    }
}

impl ScanRange {
    pub fn new(min: f64, max: f64, points: usize) -> Self {
        Self { min, max, points }
    }

    fn validate(&self) -> Result<()> {
        validate_range(self.min, self.max, self.points)
    }

    fn samples(&self) -> Vec<f64> {
        linspace(self.min, self.max, self.points)
    }
}

fn validate_range(min: f64, max: f64, points: usize) -> Result<()> {
    if points < 2 {
        return Err(Error::Invariant(format!("n_points >= 2 (got {points})")));
    }
    for v in [min, max] {
        if v.is_nan() || v.abs() > FRAC_PI_2 {
            return Err(Error::Invariant(format!(
                "scan range inside [-pi/2, pi/2] (got {v})"
            )));
        }
    }
    if min >= max {
        return Err(Error::Invariant(format!(
            "scan range min < max (got [{min}, {max}])"
        )));
    }
    Ok(())
}

fn linspace(min: f64, max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![min];
    }
    let step = (max - min) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| min + step * i as f64).collect();
    v[n - 1] = max;
    v
}

/// A family of detector-angle pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SliceSpec {
    /// Full (φ₁, φ₂) grid, `points` samples per axis.
    Grid2D {
        phi_min: f64,
        phi_max: f64,
        points: usize,
    },
    /// Second detector fixed at `phi2`.
    FixedSecond { phi2: f64, scan: ScanRange },
    /// φ₂ = −φ₁: equal angles, detectors on opposite sides of the chain normal.
    OppositeScan { scan: ScanRange },
    /// |φ₁| − |φ₂| = offset with φ₂ on the opposite side of the normal.
    OffsetMagnitude { offset: f64, scan: ScanRange },
    /// sin φ₁ − sin φ₂ = delta.
    FixedSinDelta { delta: f64, scan: ScanRange },
}

impl SliceSpec {
    pub fn grid2d(points: usize) -> Self {
        SliceSpec::Grid2D {
            phi_min: -FRAC_PI_2,
            phi_max: FRAC_PI_2,
            points,
        }
    }

    pub fn fixed_second(phi2: f64) -> Self {
        SliceSpec::FixedSecond {
            phi2,
            scan: ScanRange::default(),
        }
    }

    pub fn opposite() -> Self {
        SliceSpec::OppositeScan {
            scan: ScanRange::default(),
        }
    }

    pub fn offset_magnitude(offset: f64) -> Self {
        SliceSpec::OffsetMagnitude {
            offset,
            scan: ScanRange::default(),
        }
    }

    pub fn fixed_sin_delta(delta: f64) -> Self {
        SliceSpec::FixedSinDelta {
            delta,
            scan: ScanRange::default(),
        }
    }

    /// Replaces the φ₁ scan range (or both grid axes for `Grid2D`).
    pub fn with_scan(self, range: ScanRange) -> Self {
        match self {
            SliceSpec::Grid2D { .. } => SliceSpec::Grid2D {
                phi_min: range.min,
                phi_max: range.max,
                points: range.points,
            },
            SliceSpec::FixedSecond { phi2, .. } => SliceSpec::FixedSecond { phi2, scan: range },
            SliceSpec::OppositeScan { .. } => SliceSpec::OppositeScan { scan: range },
            SliceSpec::OffsetMagnitude { offset, .. } => SliceSpec::OffsetMagnitude {
                offset,
                scan: range,
            },
            SliceSpec::FixedSinDelta { delta, .. } => {
                SliceSpec::FixedSinDelta { delta, scan: range }
            }
        }
    }

    pub fn is_grid(&self) -> bool {
        matches!(self, SliceSpec::Grid2D { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SliceSpec::Grid2D {
                phi_min,
                phi_max,
                points,
            } => validate_range(phi_min, phi_max, points),
            SliceSpec::FixedSecond { phi2, scan } => {
                DetectorAngle::new(phi2)?;
                scan.validate()
            }
            SliceSpec::OppositeScan { scan } => scan.validate(),
            SliceSpec::OffsetMagnitude { offset, scan } => {
                if !(0.0..=FRAC_PI_2).contains(&offset) {
                    return Err(Error::Invariant(format!(
                        "offset-magnitude 0 <= c <= pi/2 (got {offset})"
                    )));
                }
                scan.validate()
            }
            SliceSpec::FixedSinDelta { delta, scan } => {
                if delta.is_nan() || delta.abs() > 2.0 {
                    return Err(Error::Invariant(format!(
                        "fixed-sindelta |delta| <= 2 (got {delta})"
                    )));
                }
                scan.validate()
            }
        }
    }

    /// The detector pair at scan position `phi1`, or `None` when no valid
    /// partner angle exists there. Not defined for `Grid2D`.
    pub fn pair_at(&self, phi1: f64) -> Option<(f64, f64)> {
        match *self {
            SliceSpec::Grid2D { .. } => None,
            SliceSpec::FixedSecond { phi2, .. } => Some((phi1, phi2)),
            SliceSpec::OppositeScan { .. } => Some((phi1, -phi1)),
            SliceSpec::OffsetMagnitude { offset, .. } => {
                let mag = phi1.abs() - offset;
                (mag >= 0.0).then(|| (phi1, -phi1.signum() * mag))
            }
            SliceSpec::FixedSinDelta { delta, .. } => {
                let s = phi1.sin() - delta;
                // one ulp of slack at the ends of the valid range
                if s.abs() > 1.0 + 4.0 * f64::EPSILON {
                    return None;
                }
                Some((phi1, s.clamp(-1.0, 1.0).asin()))
            }
        }
    }
}

/// Detector pairs materialized from a [`SliceSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSlice {
    /// Scan-parameter values. For a grid this is the shared axis of both
    /// detectors; otherwise one entry per point.
    pub axis: Vec<f64>,
    /// (φ₁, φ₂) per point. Grids are row-major: φ₁ selects the row.
    pub points: Vec<(f64, f64)>,
    pub grid: bool,
}

impl ResolvedSlice {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn resolve_slice(slice: &SliceSpec) -> Result<ResolvedSlice> {
    slice.validate()?;
    let resolved = match *slice {
        SliceSpec::Grid2D {
            phi_min,
            phi_max,
            points,
        } => {
            let axis = linspace(phi_min, phi_max, points);
            let pairs = axis
                .iter()
                .flat_map(|&a| axis.iter().map(move |&b| (a, b)))
                .collect();
            ResolvedSlice {
                axis,
                points: pairs,
                grid: true,
            }
        }
        SliceSpec::FixedSinDelta { delta, scan } => {
            let lo = (delta - 1.0).max(-1.0).asin().max(scan.min);
            let hi = (delta + 1.0).min(1.0).asin().min(scan.max);
            if lo > hi {
                return Err(Error::DegenerateSlice(format!(
                    "no phi1 in [{}, {}] admits sin(phi1) - sin(phi2) = {delta}",
                    scan.min, scan.max
                )));
            }
            let n = if lo == hi { 1 } else { scan.points };
            one_dimensional(slice, linspace(lo, hi, n))
        }
        SliceSpec::FixedSecond { scan, .. }
        | SliceSpec::OppositeScan { scan }
        | SliceSpec::OffsetMagnitude { scan, .. } => one_dimensional(slice, scan.samples()),
    };
    if resolved.is_empty() {
        return Err(Error::DegenerateSlice(format!(
            "slice {slice:?} contains no valid detector pairs"
        )));
    }
    Ok(resolved)
}

fn one_dimensional(slice: &SliceSpec, phi1: Vec<f64>) -> ResolvedSlice {
    let points: Vec<(f64, f64)> = phi1.into_iter().filter_map(|p| slice.pair_at(p)).collect();
    ResolvedSlice {
        axis: points.iter().map(|&(a, _)| a).collect(),
        points,
        grid: false,
    }
}
