//! Locating the dark ion from coincidence events, and the classical
//! one-by-one probing baseline.
//!
//! Candidates are scored with the exact multinomial log-likelihood of the
//! recorded bins under each candidate's normalized G² pattern, with a uniform
//! prior over positions. Candidates whose patterns coincide (mirror images in
//! an equally spaced chain) form an equivalence class and can only be
//! identified together.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlations::{g2_pattern, Pattern};
use crate::error::{Error, Result};
use crate::model::{IonChain, SliceSpec};
use crate::sampling::{
    counter_uniform, derive_seed, normalize, sample_events, DiscreteDistribution, EventSet,
};

/// Probability floor inside the logarithm.
pub const LIKELIHOOD_FLOOR: f64 = 1e-300;

/// Two candidate patterns closer than this (after normalization, and
/// relative to the peak before it) are treated as identical.
pub const EQUIVALENCE_TOL: f64 = 1e-9;

/// Relative slack when collecting argmax candidates.
pub const TIE_RTOL: f64 = 1e-9;

/// Trials used for the classical baseline reported next to search results.
pub const CLASSICAL_TRIALS: usize = 100_000;

/// Success-rate threshold reported as `m_at_95`.
pub const SUCCESS_TARGET: f64 = 0.95;

/// Σ log(max(p_e, floor)) over the events.
pub fn log_likelihood(events: &EventSet, dist: &DiscreteDistribution) -> Result<f64> {
    events.check_bins(dist)?;
    events.validate()?;
    let probs = dist.probs();
    Ok(events
        .events
        .iter()
        .map(|&e| probs[e].max(LIKELIHOOD_FLOOR).ln())
        .sum())
}

/// Distinguishability of two patterns on the same slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternDistance {
    /// max |p_i − q_i| of the normalized patterns.
    pub linf: f64,
    /// KL(p‖q) + KL(q‖p), probabilities floored at [`LIKELIHOOD_FLOOR`].
    pub sym_kl: f64,
}

impl PatternDistance {
    pub fn is_zero_within(&self, tol: f64) -> bool {
        self.linf <= tol && self.sym_kl <= tol
    }
}

pub fn pattern_distance(p: &Pattern, q: &Pattern) -> Result<PatternDistance> {
    if p.slice != q.slice || p.points != q.points {
        return Err(Error::InvalidArgument(
            "patterns are sampled on different slices".into(),
        ));
    }
    let a = normalize(p)?;
    let b = normalize(q)?;
    Ok(distribution_distance(a.probs(), b.probs()))
}

fn distribution_distance(a: &[f64], b: &[f64]) -> PatternDistance {
    let mut linf = 0.0f64;
    let mut sym_kl = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        linf = linf.max((x - y).abs());
        if x > 0.0 || y > 0.0 {
            sym_kl += (x - y) * (x.max(LIKELIHOOD_FLOOR).ln() - y.max(LIKELIHOOD_FLOOR).ln());
        }
    }
    PatternDistance { linf, sym_kl }
}

/// Largest absolute difference of raw values, relative to the larger peak.
fn amplitude_distance(p: &Pattern, q: &Pattern) -> f64 {
    let scale = p.max().abs().max(q.max().abs());
    if scale == 0.0 {
        return 0.0;
    }
    p.values
        .iter()
        .zip(&q.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorReport {
    /// Per candidate position 1..=N; `-inf` (null in JSON) for excluded ones.
    pub log_likelihoods: Vec<f64>,
    pub posterior: Vec<f64>,
    /// 1-based argmax candidates, ties kept.
    pub map_set: Vec<usize>,
    /// Partition of 1..=N into sets of candidates with identical patterns.
    pub equivalence_classes: Vec<Vec<usize>>,
    /// Candidates whose pattern could not be normalized.
    pub excluded: Vec<usize>,
}

impl PosteriorReport {
    pub fn class_of(&self, p: usize) -> Option<&[usize]> {
        self.equivalence_classes
            .iter()
            .find(|c| c.contains(&p))
            .map(Vec::as_slice)
    }
}

/// Candidate isotope positions with their patterns precomputed.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    patterns: Vec<Pattern>,
    dists: Vec<Option<DiscreteDistribution>>,
    classes: Vec<Vec<usize>>,
}

impl CandidateSet {
    /// One G² candidate per isotope position of `template` (whose own isotope
    /// is ignored).
    pub fn for_chain(template: &IonChain, slice: &SliceSpec) -> Result<Self> {
        if template.n() < 3 {
            return Err(Error::InvalidArgument(format!(
                "localization needs N >= 3 (got N = {})",
                template.n()
            )));
        }
        let patterns = (1..=template.n())
            .map(|p| g2_pattern(&template.with_isotope(Some(p))?, slice))
            .collect::<Result<Vec<_>>>()?;
        Self::from_patterns(patterns)
    }

    /// Candidates from arbitrary patterns; candidate `k` (1-based) is
    /// `patterns[k - 1]`.
    pub fn from_patterns(patterns: Vec<Pattern>) -> Result<Self> {
        if patterns.is_empty() {
            return Err(Error::InvalidArgument("no candidate patterns".into()));
        }
        if patterns.iter().any(|p| p.points != patterns[0].points) {
            return Err(Error::InvalidArgument(
                "candidate patterns are sampled on different slices".into(),
            ));
        }
        let dists: Vec<Option<DiscreteDistribution>> = patterns
            .iter()
            .map(|p| match normalize(p) {
                Ok(d) => Ok(Some(d)),
                Err(Error::NonNormalizable(_)) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<_>>()?;
        if dists.iter().all(Option::is_none) {
            return Err(Error::NonNormalizable(
                "no candidate pattern can be normalized".into(),
            ));
        }

        let mut classes: Vec<Vec<usize>> = Vec::new();
        for k in 0..patterns.len() {
            let home = classes.iter_mut().find(|class| {
                let r = class[0] - 1;
                match (&dists[r], &dists[k]) {
                    (Some(a), Some(b)) => {
                        distribution_distance(a.probs(), b.probs()).is_zero_within(EQUIVALENCE_TOL)
                            && amplitude_distance(&patterns[r], &patterns[k]) <= EQUIVALENCE_TOL
                    }
                    (None, None) => true,
                    _ => false,
                }
            });
            match home {
                Some(class) => class.push(k + 1),
                None => classes.push(vec![k + 1]),
            }
        }
        Ok(Self {
            patterns,
            dists,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    /// Distribution of candidate `p` (1-based), if normalizable.
    pub fn distribution(&self, p: usize) -> Option<&DiscreteDistribution> {
        self.dists.get(p.wrapping_sub(1)).and_then(Option::as_ref)
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn class_of(&self, p: usize) -> Option<&[usize]> {
        self.classes
            .iter()
            .find(|c| c.contains(&p))
            .map(Vec::as_slice)
    }

    pub fn excluded(&self) -> Vec<usize> {
        (1..=self.len())
            .filter(|&p| self.dists[p - 1].is_none())
            .collect()
    }

    pub fn posterior(&self, events: &EventSet) -> Result<PosteriorReport> {
        let log_likelihoods = self
            .dists
            .iter()
            .map(|d| match d {
                Some(d) => log_likelihood(events, d),
                None => Ok(f64::NEG_INFINITY),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PosteriorReport {
            posterior: softmax(&log_likelihoods),
            map_set: argmax_set(&log_likelihoods),
            log_likelihoods,
            equivalence_classes: self.classes.clone(),
            excluded: self.excluded(),
        })
    }
}

/// Posterior with a uniform prior over the included candidates.
fn softmax(ll: &[f64]) -> Vec<f64> {
    let top = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = ll
        .iter()
        .map(|&l| {
            if l == f64::NEG_INFINITY {
                0.0
            } else {
                (l - top).exp()
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn argmax_set(ll: &[f64]) -> Vec<usize> {
    let top = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = TIE_RTOL * top.abs().max(1.0);
    ll.iter()
        .enumerate()
        .filter(|(_, &l)| l > f64::NEG_INFINITY && l >= top - slack)
        .map(|(k, _)| k + 1)
        .collect()
}

/// Scores `events` against every isotope position of `template`.
pub fn posterior_over_positions(
    events: &EventSet,
    template: &IonChain,
    slice: &SliceSpec,
) -> Result<PosteriorReport> {
    CandidateSet::for_chain(template, slice)?.posterior(events)
}

/// Outcome of repeated simulated localization runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchExperimentResult {
    pub n: usize,
    /// `null` for unequally spaced chains.
    pub spacing_lambda: Option<f64>,
    pub true_p: usize,
    pub slice: SliceSpec,
    pub schedule: Vec<usize>,
    pub success_rates: Vec<f64>,
    /// Smallest scheduled event count with success rate >= 0.95.
    pub m_at_95: Option<usize>,
    pub classical_mean_probes: f64,
    pub master_seed: u64,
    #[serde(skip)]
    pub n_trials: usize,
}

/// Draws `n_trials` event records from the true pattern and counts how often
/// the argmax set is exactly the true position's equivalence class, at each
/// event count in `schedule`. A trial's events for a smaller count are a
/// prefix of its events for a larger one.
pub fn run_search_experiment(
    chain: &IonChain,
    slice: &SliceSpec,
    true_p: usize,
    schedule: &[usize],
    n_trials: usize,
    master_seed: u64,
) -> Result<SearchExperimentResult> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "schedule must be non-empty and strictly ascending".into(),
        ));
    }
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials >= 1".into()));
    }
    let template = chain.with_isotope(Some(true_p))?;
    let candidates = CandidateSet::for_chain(&template, slice)?;
    let truth = candidates
        .distribution(true_p)
        .ok_or_else(|| Error::NonNormalizable(format!("pattern for true_p = {true_p} is zero")))?;
    let target = candidates.class_of(true_p).unwrap_or(&[]).to_vec();

    // log p per candidate and bin, same values log_likelihood sums
    let log_tables: Vec<Option<Vec<f64>>> = (1..=candidates.len())
        .map(|p| {
            candidates.distribution(p).map(|d| {
                d.probs()
                    .iter()
                    .map(|&x| x.max(LIKELIHOOD_FLOOR).ln())
                    .collect()
            })
        })
        .collect();
    let max_m = *schedule.last().unwrap();

    let outcomes: Vec<Vec<bool>> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let events = sample_events(truth, max_m, derive_seed(master_seed, t as u64));
            let mut ll: Vec<f64> = log_tables
                .iter()
                .map(|t| if t.is_some() { 0.0 } else { f64::NEG_INFINITY })
                .collect();
            let mut hits = Vec::with_capacity(schedule.len());
            let mut done = 0;
            for &m in schedule {
                for &e in &events.events[done..m] {
                    for (acc, table) in ll.iter_mut().zip(&log_tables) {
                        if let Some(table) = table {
                            *acc += table[e];
                        }
                    }
                }
                done = m;
                hits.push(argmax_set(&ll) == target);
            }
            hits
        })
        .collect();

    let success_rates: Vec<f64> = (0..schedule.len())
        .map(|k| outcomes.iter().filter(|h| h[k]).count() as f64 / n_trials as f64)
        .collect();
    let m_at_95 = schedule
        .iter()
        .zip(&success_rates)
        .find(|(_, &r)| r >= SUCCESS_TARGET)
        .map(|(&m, _)| m);
    let classical = classical_search_sim(chain.n(), CLASSICAL_TRIALS, master_seed)?;

    Ok(SearchExperimentResult {
        n: chain.n(),
        spacing_lambda: chain.spacing(),
        true_p,
        slice: *slice,
        schedule: schedule.to_vec(),
        success_rates,
        m_at_95,
        classical_mean_probes: classical.mean,
        master_seed,
        n_trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSearchSummary {
    pub mean: f64,
    /// Sample standard deviation of the probe count.
    pub std_dev: f64,
    pub trials: usize,
}

impl ClassicalSearchSummary {
    pub fn std_err(&self) -> f64 {
        self.std_dev / (self.trials as f64).sqrt()
    }
}

/// Mean number of single-ion probes needed when the isotope position is
/// uniform and the ions are probed left to right, stopping at the dark ion
/// or after N − 1 probes.
pub fn classical_expected_probes(n: usize) -> f64 {
    let n = n as f64;
    (n - 1.0) * (n + 2.0) / (2.0 * n)
}

/// Monte Carlo estimate of [`classical_expected_probes`].
pub fn classical_search_sim(
    n: usize,
    n_trials: usize,
    master_seed: u64,
) -> Result<ClassicalSearchSummary> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("N >= 2 (got {n})")));
    }
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials >= 1".into()));
    }
    let probes: Vec<f64> = (0..n_trials as u64)
        .map(|t| {
            let u = counter_uniform(master_seed, t);
            let dark = ((u * n as f64) as usize).min(n - 1) + 1;
            let mut count = 0;
            for ion in 1..n {
                count += 1;
                if ion == dark {
                    break;
                }
            }
            count as f64
        })
        .collect();
    let mean = probes.iter().sum::<f64>() / n_trials as f64;
    let var = if n_trials > 1 {
        probes.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_trials - 1) as f64
    } else {
        0.0
    };
    Ok(ClassicalSearchSummary {
        mean,
        std_dev: var.sqrt(),
        trials: n_trials,
    })
}
