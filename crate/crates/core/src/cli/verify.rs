//! Self-check run by `ionscope verify`: closed-form equivalences, brute-force
//! parity and the structural invariants, each with its tolerance.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::correlations::{
    g1_at, g1_four_closed, g1_pattern, g2_at, g2_four_closed, g2_pattern, g2_two_ion_closed,
};
use crate::inference::{
    classical_expected_probes, classical_search_sim, pattern_distance, CandidateSet,
};
use crate::model::{
    phase_projection, resolve_slice, DetectorAngle, ExcitationPulse, IonChain, ScanRange, SliceSpec,
};
use crate::sampling::{counter_uniform, normalize, sample_events, Bin, DiscreteDistribution};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub max_abs_err: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "[{}] {:<32} max_abs_err = {:.3e}  (tol {:.1e})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.max_abs_err,
                c.tolerance
            );
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(s, "{} checks, {failed} failed", self.checks.len());
        s
    }
}

/// Deterministic uniform stream for check inputs.
struct Stream {
    seed: u64,
    k: u64,
}

impl Stream {
    fn new(seed: u64) -> Self {
        Self { seed, k: 0 }
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = counter_uniform(self.seed, self.k);
        self.k += 1;
        lo + (hi - lo) * u
    }

    fn angle(&mut self) -> f64 {
        self.uniform(-FRAC_PI_2, FRAC_PI_2)
    }

    fn below(&mut self, n: usize) -> usize {
        ((self.uniform(0.0, 1.0) * n as f64) as usize).min(n - 1)
    }

    /// Random chain, 2..=max_n ions, gaps in [0.2, 3.2) wavelengths.
    fn chain(&mut self, min_n: usize, max_n: usize) -> IonChain {
        let n = min_n + self.below(max_n - min_n + 1);
        let mut x = 0.0;
        let mut pos = Vec::with_capacity(n);
        for _ in 0..n {
            pos.push(x);
            x += self.uniform(0.2, 3.2);
        }
        let iso = if self.uniform(0.0, 1.0) < 0.8 {
            Some(1 + self.below(n))
        } else {
            None
        };
        IonChain::new(pos, iso).expect("generated chain is valid")
    }
}

/// Direct sum of |α_iβ_j + α_jβ_i|² over complex exponentials.
pub fn g2_brute_force(chain: &IonChain, phi1: f64, phi2: f64) -> f64 {
    let pos = chain.positions();
    let alpha = |l: usize| Complex64::from_polar(1.0, TAU * pos[l] * phi1.sin());
    let beta = |l: usize| Complex64::from_polar(1.0, TAU * pos[l] * phi2.sin());
    let rad: Vec<usize> = chain.radiating().collect();
    let mut total = 0.0;
    for (a, &i) in rad.iter().enumerate() {
        for &j in &rad[a + 1..] {
            total += (alpha(i) * beta(j) + alpha(j) * beta(i)).norm_sqr();
        }
    }
    total
}

/// G¹ from complex single-ion expectation values with a common coherence
/// phase `chi`.
pub fn g1_brute_force(chain: &IonChain, pulse: ExcitationPulse, phi1: f64, chi: f64) -> f64 {
    let pos = chain.positions();
    let coh = Complex64::from_polar(pulse.area().sin() / 2.0, chi);
    let rad: Vec<usize> = chain.radiating().collect();
    let mut total = Complex64::new(rad.len() as f64 * pulse.excited_population(), 0.0);
    for &j in &rad {
        for &i in &rad {
            if i != j {
                let phase = Complex64::from_polar(1.0, TAU * (pos[i] - pos[j]) * phi1.sin());
                total += coh.conj() * coh * phase;
            }
        }
    }
    total.re
}

struct Check {
    name: &'static str,
    tolerance: f64,
    max_err: f64,
    ok: bool,
}

impl Check {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            max_err: 0.0,
            ok: true,
        }
    }

    fn err(&mut self, e: f64) {
        self.max_err = self.max_err.max(e);
        if e.is_nan() || e > self.tolerance {
            self.ok = false;
        }
    }

    fn require(&mut self, cond: bool) {
        if !cond {
            self.ok = false;
            self.max_err = self.max_err.max(1.0);
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name.to_owned(),
            passed: self.ok,
            max_abs_err: self.max_err,
            tolerance: self.tolerance,
        }
    }
}

fn local_maxima(axis: &[f64], v: &[f64]) -> Vec<f64> {
    (1..v.len() - 1)
        .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1])
        .map(|i| axis[i])
        .collect()
}

/// Runs every check. `perturb` adds noise of that size to the closed-form
/// values before they are compared.
pub fn run_checks(perturb: f64) -> VerifyReport {
    let mut noise = Stream::new(0xBAD);
    let mut jitter = move |x: f64| {
        if perturb == 0.0 {
            x
        } else {
            x + perturb * noise.uniform(1.0, 2.0)
        }
    };
    let mut checks = Vec::new();

    // phase projection
    let mut odd = Check::new("phase_projection_odd", 0.0);
    let mut linear = Check::new("phase_projection_linear", 1e-12);
    let mut rng = Stream::new(1);
    for _ in 0..200 {
        let chain = rng.chain(2, 9);
        let phi = rng.angle();
        let ion = 1 + rng.below(chain.n());
        let a = phase_projection(&chain, ion, DetectorAngle::new(phi).unwrap()).unwrap();
        let b = phase_projection(&chain, ion, DetectorAngle::new(-phi).unwrap()).unwrap();
        odd.err((a + b).abs());
        let doubled =
            IonChain::new(chain.positions().iter().map(|x| 2.0 * x).collect(), None).unwrap();
        let c = phase_projection(&doubled, ion, DetectorAngle::new(phi).unwrap()).unwrap();
        linear.err((c - 2.0 * a).abs());
    }
    checks.push(odd.finish());
    checks.push(linear.finish());

    // slice constraints
    let mut sc = Check::new("slice_constraints", 1e-12);
    for delta in [-1.7, -0.378, 0.0, 0.378, 1.2] {
        for &(a, b) in &resolve_slice(&SliceSpec::fixed_sin_delta(delta))
            .unwrap()
            .points
        {
            sc.err((a.sin() - b.sin() - delta).abs());
        }
    }
    for c in [0.0, 1.0 / PI, 1.0] {
        for &(a, b) in &resolve_slice(&SliceSpec::offset_magnitude(c))
            .unwrap()
            .points
        {
            sc.err((a.abs() - b.abs() - c).abs());
            sc.require(b == 0.0 || a.signum() != b.signum());
        }
    }
    for &(a, b) in &resolve_slice(&SliceSpec::opposite()).unwrap().points {
        sc.err((a + b).abs());
    }
    checks.push(sc.finish());

    // closed forms
    let mut four = Check::new("g2_equals_four_ion_closed_form", 1e-12);
    let mut rng = Stream::new(2);
    for p in 1..=4 {
        let chain = IonChain::equally_spaced(4, 5.75, Some(p)).unwrap();
        for _ in 0..1000 {
            let (a, b) = (rng.angle(), rng.angle());
            four.err((g2_at(&chain, a, b) - jitter(g2_four_closed(5.75, p, a, b).unwrap())).abs());
        }
    }
    checks.push(four.finish());

    let mut two = Check::new("g2_equals_two_ion_closed_form", 1e-12);
    let mut rng = Stream::new(3);
    for _ in 0..1000 {
        let s = rng.uniform(0.1, 10.0);
        let chain = IonChain::new(vec![0.0, s], None).unwrap();
        let (a, b) = (rng.angle(), rng.angle());
        two.err((g2_at(&chain, a, b) - jitter(g2_two_ion_closed(s, a, b))).abs());
    }
    checks.push(two.finish());

    let mut g1c = Check::new("g1_half_pi_equals_closed_form", 1e-12);
    let mut rng = Stream::new(4);
    for p in 1..=4 {
        let chain = IonChain::equally_spaced(4, 5.75, Some(p)).unwrap();
        for _ in 0..1000 {
            let a = rng.angle();
            let closed = jitter(g1_four_closed(5.75, p, a).unwrap());
            g1c.err((g1_at(&chain, ExcitationPulse::half_pi(), a) - closed).abs());
        }
    }
    checks.push(g1c.finish());

    // brute force
    let mut bf2 = Check::new("g2_brute_force_parity", 1e-10);
    let mut bf1 = Check::new("g1_brute_force_parity", 1e-10);
    let mut rng = Stream::new(5);
    for _ in 0..50 {
        let chain = rng.chain(2, 9);
        let pulse = ExcitationPulse::new(rng.uniform(0.0, PI)).unwrap();
        let chi = rng.uniform(-PI, PI);
        for _ in 0..20 {
            let (a, b) = (rng.angle(), rng.angle());
            bf2.err((g2_at(&chain, a, b) - g2_brute_force(&chain, a, b)).abs());
            bf1.err((g1_at(&chain, pulse, a) - g1_brute_force(&chain, pulse, a, chi)).abs());
        }
    }
    checks.push(bf2.finish());
    checks.push(bf1.finish());

    // symmetries
    let mut swap = Check::new("g2_detector_swap_symmetry", 1e-12);
    let mut suff = Check::new("g2_depends_only_on_sin_difference", 1e-12);
    let mut rng = Stream::new(6);
    for _ in 0..200 {
        let chain = rng.chain(2, 6);
        let (a, b) = (rng.angle(), rng.angle());
        swap.err((g2_at(&chain, a, b) - g2_at(&chain, b, a)).abs());
        let delta = a.sin() - b.sin();
        let a2 = rng.angle();
        if let Some((a2, b2)) = SliceSpec::fixed_sin_delta(delta).pair_at(a2) {
            suff.err((g2_at(&chain, a, b) - g2_at(&chain, a2, b2)).abs());
        }
    }
    checks.push(swap.finish());
    checks.push(suff.finish());

    let mut mirror = Check::new("mirror_degeneracy", 1e-12);
    let slice = SliceSpec::offset_magnitude(1.0 / PI);
    for n in [4, 9] {
        for p in 1..=n {
            let c = IonChain::equally_spaced(n, 5.75, Some(p)).unwrap();
            let m = c.with_isotope(Some(n + 1 - p)).unwrap();
            let (x, y) = (
                g2_pattern(&c, &slice).unwrap(),
                g2_pattern(&m, &slice).unwrap(),
            );
            for (u, v) in x.values.iter().zip(&y.values) {
                mirror.err((u - v).abs());
            }
            let d = pattern_distance(&x, &y).unwrap();
            mirror.err(d.linf.max(d.sym_kl));
            let pulse = ExcitationPulse::half_pi();
            let (x, y) = (
                g1_pattern(&c, pulse, &slice).unwrap(),
                g1_pattern(&m, pulse, &slice).unwrap(),
            );
            for (u, v) in x.values.iter().zip(&y.values) {
                mirror.err((u - v).abs());
            }
        }
    }
    checks.push(mirror.finish());

    // bounds
    let mut bounds = Check::new("correlation_bounds", 1e-9);
    let mut rng = Stream::new(7);
    for _ in 0..200 {
        let chain = rng.chain(2, 9);
        let nr = chain.radiating_count() as f64;
        let pulse = ExcitationPulse::new(rng.uniform(0.0, PI)).unwrap();
        let (a, b) = (rng.angle(), rng.angle());
        let g2 = g2_at(&chain, a, b);
        bounds.err((-g2).max(0.0));
        bounds.err((g2 - 2.0 * nr * (nr - 1.0)).max(0.0));
        let g1 = g1_at(&chain, pulse, a);
        let lower = nr * pulse.excited_population() - pulse.coherence_sq() * nr * (nr - 1.0) * 2.0;
        bounds.err((lower - g1).max(0.0));
        bounds.err((-g1).max(0.0));
    }
    checks.push(bounds.finish());

    let mut flat = Check::new("g1_pi_pulse_flat", 1e-12);
    for n in [4, 9] {
        for p in 1..=n {
            let c = IonChain::equally_spaced(n, 5.75, Some(p)).unwrap();
            let pat = g1_pattern(&c, ExcitationPulse::pi(), &SliceSpec::opposite()).unwrap();
            flat.err(pat.spread());
            flat.err((pat.values[0] - (n as f64 - 1.0)).abs());
        }
    }
    checks.push(flat.finish());

    let mut constant = Check::new("g2_constant_on_sin_delta_slice", 1e-12);
    for p in 1..=9 {
        let c = IonChain::equally_spaced(9, 5.75, Some(p)).unwrap();
        constant.err(
            g2_pattern(&c, &SliceSpec::fixed_sin_delta(0.378))
                .unwrap()
                .spread(),
        );
    }
    checks.push(constant.finish());

    let mut sub = Check::new("sub_half_wavelength_maxima", 0.0);
    let range = ScanRange::new(-FRAC_PI_4, FRAC_PI_4, 1001);
    let step = FRAC_PI_2 / 1000.0;
    let chain = IonChain::equally_spaced(4, 0.5, Some(1)).unwrap();
    let g2 = g2_pattern(&chain, &SliceSpec::opposite().with_scan(range)).unwrap();
    let max2 = local_maxima(&g2.axis, &g2.values);
    sub.require(max2.len() == 3);
    for (got, want) in max2.iter().zip([-PI / 6.0, 0.0, PI / 6.0]) {
        sub.require((got - want).abs() <= step);
    }
    let g1: Vec<f64> = g2
        .axis
        .iter()
        .map(|&a| g1_four_closed(0.5, 1, a).unwrap())
        .collect();
    let max1 = local_maxima(&g2.axis, &g1);
    sub.require(max1.len() == 1 && max1[0].abs() <= step);
    checks.push(sub.finish());

    // sampling
    let mut norm = Check::new("normalization", 1e-12);
    let c = IonChain::equally_spaced(4, 5.75, Some(1)).unwrap();
    let pat = g2_pattern(&c, &SliceSpec::offset_magnitude(1.0 / PI)).unwrap();
    let d = normalize(&pat).unwrap();
    norm.err((d.probs().iter().sum::<f64>() - 1.0).abs());
    norm.err((d.cdf().last().unwrap() - 1.0).abs());
    for scale in [1e-3, 0.7, 3.0, 1e5] {
        let s = normalize(&pat.scaled(scale)).unwrap();
        for (x, y) in d.probs().iter().zip(s.probs()) {
            norm.err((x - y).abs() * 1e3);
        }
    }
    checks.push(norm.finish());

    let mut det = Check::new("sampling_determinism_and_chi_square", 0.0);
    let a = sample_events(&d, 1000, 42);
    det.require(a == sample_events(&d, 1000, 42));
    det.require(a.events != sample_events(&d, 1000, 43).events);
    let uniform = DiscreteDistribution::from_weights(
        (0..100).map(|i| Bin(i as f64, None)).collect(),
        &[1.0; 100],
    )
    .unwrap();
    let mut counts = [0.0f64; 100];
    for &e in &sample_events(&uniform, 100_000, 42).events {
        counts[e] += 1.0;
    }
    let chi2: f64 = counts.iter().map(|c| (c - 1000.0).powi(2) / 1000.0).sum();
    det.require(chi2 < 148.23035916510173);
    checks.push(det.finish());

    // inference
    let mut classical = Check::new("classical_baseline_within_3_sigma", 3.0);
    for n in [2, 4, 9, 100] {
        let s = classical_search_sim(n, 100_000, 2024).unwrap();
        let expected = classical_expected_probes(n);
        let sigmas = if s.std_err() == 0.0 {
            if s.mean == expected {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (s.mean - expected).abs() / s.std_err()
        };
        classical.err(sigmas);
    }
    checks.push(classical.finish());

    let mut classes = Check::new("equivalence_classes", 0.0);
    let eq = CandidateSet::for_chain(
        &IonChain::equally_spaced(4, 5.75, None).unwrap(),
        &SliceSpec::offset_magnitude(1.0 / PI),
    )
    .unwrap();
    classes.require(eq.classes() == [vec![1, 4], vec![2, 3]]);
    let uneq = CandidateSet::for_chain(
        &IonChain::new(vec![0.0, 1.3, 3.1, 5.9], None).unwrap(),
        &SliceSpec::offset_magnitude(1.0 / PI),
    )
    .unwrap();
    classes.require(uneq.classes().iter().all(|c| c.len() == 1));
    checks.push(classes.finish());

    let mut post = Check::new("posterior_mirror_symmetry", 1e-9);
    for seed in 0..5 {
        let events = sample_events(eq.distribution(2).unwrap(), 300, seed);
        let r = eq.posterior(&events).unwrap();
        post.err((r.posterior.iter().sum::<f64>() - 1.0).abs());
        post.err((r.posterior[0] - r.posterior[3]).abs());
        post.err((r.posterior[1] - r.posterior[2]).abs());
    }
    checks.push(post.finish());

    VerifyReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}
