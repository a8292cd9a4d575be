use std::f64::consts::{FRAC_PI_2, PI};

use ionscope::correlations::{g1_at, g2_at};
use ionscope::inference::CandidateSet;
use ionscope::sampling::Bin;
use ionscope::{
    g1_pattern, g2_pattern, normalize, phase_projection, resolve_slice, sample_events,
    DetectorAngle, DiscreteDistribution, EventSet, ExcitationPulse, IonChain, ScanRange, SliceSpec,
};
use proptest::prelude::*;

fn angle() -> impl Strategy<Value = f64> {
    -FRAC_PI_2..=FRAC_PI_2
}

prop_compose! {
    fn chain(max_n: usize)(gaps in prop::collection::vec(0.05f64..4.0, 1..max_n),
                           iso_seed in any::<u32>(), dark in any::<bool>()) -> IonChain {
        let mut pos = vec![0.0];
        for g in gaps {
            pos.push(pos.last().unwrap() + g);
        }
        let n = pos.len();
        let iso = dark.then(|| 1 + iso_seed as usize % n);
        IonChain::new(pos, iso).unwrap()
    }
}

proptest! {
    #[test]
    fn phase_is_odd_and_linear(c in chain(9), phi in angle(), k in any::<prop::sample::Index>()) {
        let ion = 1 + k.index(c.n());
        let f = |chain: &IonChain, p: f64| {
            phase_projection(chain, ion, DetectorAngle::new(p).unwrap()).unwrap()
        };
        prop_assert_eq!(f(&c, -phi), -f(&c, phi));
        let doubled = IonChain::new(c.positions().iter().map(|x| 2.0 * x).collect(), None).unwrap();
        prop_assert!((f(&doubled, phi) - 2.0 * f(&c, phi)).abs() <= 1e-12);
    }

    #[test]
    fn sin_delta_slice_constraint(delta in -2.0f64..=2.0, lo in -1.5f64..0.0, hi in 0.01f64..1.5) {
        let slice = SliceSpec::fixed_sin_delta(delta).with_scan(ScanRange::new(lo, hi, 101));
        if let Ok(r) = resolve_slice(&slice) {
            for &(a, b) in &r.points {
                prop_assert!((lo..=hi).contains(&a));
                prop_assert!(b.abs() <= FRAC_PI_2);
                prop_assert!((a.sin() - b.sin() - delta).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn offset_slice_constraint(c in 0.0f64..1.2) {
        let r = resolve_slice(&SliceSpec::offset_magnitude(c).with_scan(ScanRange::new(-FRAC_PI_2, FRAC_PI_2, 301)));
        if let Ok(r) = r {
            for &(a, b) in &r.points {
                prop_assert!((a.abs() - b.abs() - c).abs() < 1e-12);
                prop_assert!(b == 0.0 || a.signum() != b.signum());
            }
        }
    }

    #[test]
    fn detector_swap_symmetry(c in chain(9), a in angle(), b in angle()) {
        prop_assert_eq!(g2_at(&c, a, b), g2_at(&c, b, a));
    }

    #[test]
    fn g2_depends_only_on_sin_difference(c in chain(6), a in angle(), b in angle(), a2 in angle()) {
        let delta = a.sin() - b.sin();
        if let Some((x, y)) = SliceSpec::fixed_sin_delta(delta).pair_at(a2) {
            prop_assert!((g2_at(&c, a, b) - g2_at(&c, x, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn mirror_degeneracy(n in 3usize..10, d in 0.1f64..8.0, p in 1usize..10, a in angle(), b in angle(),
                         theta in 0.0f64..=PI) {
        let p = 1 + (p - 1) % n;
        let c = IonChain::equally_spaced(n, d, Some(p)).unwrap();
        let m = c.with_isotope(Some(n + 1 - p)).unwrap();
        prop_assert!((g2_at(&c, a, b) - g2_at(&m, a, b)).abs() < 1e-12);
        let pulse = ExcitationPulse::new(theta).unwrap();
        prop_assert!((g1_at(&c, pulse, a) - g1_at(&m, pulse, a)).abs() < 1e-12);
    }

    #[test]
    fn correlation_bounds(c in chain(9), a in angle(), b in angle(), theta in 0.0f64..=PI) {
        let nr = c.radiating_count() as f64;
        let g2 = g2_at(&c, a, b);
        prop_assert!(g2 >= 0.0 && g2 <= 2.0 * nr * (nr - 1.0) + 1e-12);
        let pulse = ExcitationPulse::new(theta).unwrap();
        let g1 = g1_at(&c, pulse, a);
        let pairs = nr * (nr - 1.0);
        prop_assert!(g1 >= -1e-9);
        prop_assert!(g1 >= nr * pulse.excited_population() - 2.0 * pulse.coherence_sq() * pairs - 1e-9);
    }

    #[test]
    fn normalize_is_scale_free(c in chain(7), scale in 1e-6f64..1e6) {
        let pat = g2_pattern(&c, &SliceSpec::opposite().with_scan(ScanRange::new(-1.0, 1.0, 51))).unwrap();
        prop_assume!(pat.normalizable);
        let a = normalize(&pat).unwrap();
        let b = normalize(&pat.scaled(scale)).unwrap();
        for (x, y) in a.probs().iter().zip(b.probs()) {
            prop_assert!((x - y).abs() <= 1e-15);
        }
        prop_assert!((a.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_reproducible(weights in prop::collection::vec(0.0f64..5.0, 1..40), m in 0usize..500, seed in any::<u64>()) {
        let bins: Vec<Bin> = (0..weights.len()).map(|i| Bin(i as f64, None)).collect();
        prop_assume!(weights.iter().any(|&w| w > 0.0));
        let d = DiscreteDistribution::from_weights(bins, &weights).unwrap();
        let a = sample_events(&d, m, seed);
        prop_assert_eq!(&a, &sample_events(&d, m, seed));
        for &e in &a.events {
            prop_assert!(weights[e] > 0.0);
        }
    }

    #[test]
    fn posterior_mirror_symmetric(n in 3usize..8, d in 0.3f64..6.0, raw in prop::collection::vec(any::<prop::sample::Index>(), 0..200)) {
        let slice = SliceSpec::opposite().with_scan(ScanRange::new(-1.2, 1.2, 81));
        let set = CandidateSet::for_chain(&IonChain::equally_spaced(n, d, None).unwrap(), &slice).unwrap();
        let bins = set.distribution(1).unwrap().bins().to_vec();
        let events = EventSet {
            seed: 0,
            events: raw.iter().map(|i| i.index(bins.len())).collect(),
            bins,
            distribution_id: None,
        };
        let r = set.posterior(&events).unwrap();
        prop_assert!((r.posterior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for p in 1..=n {
            prop_assert!((r.posterior[p - 1] - r.posterior[n - p]).abs() < 1e-9);
        }
    }
}

#[test]
fn posterior_unchanged_by_pattern_scaling() {
    let slice = SliceSpec::offset_magnitude(1.0 / PI);
    let template = IonChain::new(vec![0.0, 1.3, 3.1, 5.9, 7.0], None).unwrap();
    let patterns: Vec<_> = (1..=5)
        .map(|p| g2_pattern(&template.with_isotope(Some(p)).unwrap(), &slice).unwrap())
        .collect();
    let base = CandidateSet::from_patterns(patterns.clone()).unwrap();
    let events = sample_events(base.distribution(3).unwrap(), 400, 17);
    let reference = base.posterior(&events).unwrap();

    // power-of-two scaling is exact in binary floating point
    for c in [0.25, 2.0, 1024.0] {
        let scaled =
            CandidateSet::from_patterns(patterns.iter().map(|p| p.scaled(c)).collect()).unwrap();
        let r = scaled.posterior(&events.clone()).unwrap();
        assert_eq!(r.posterior, reference.posterior);
        assert_eq!(r.equivalence_classes, reference.equivalence_classes);
    }
    for c in [0.3, 7.1, 1e5] {
        let scaled =
            CandidateSet::from_patterns(patterns.iter().map(|p| p.scaled(c)).collect()).unwrap();
        let events = EventSet {
            distribution_id: None,
            ..events.clone()
        };
        let r = scaled.posterior(&events).unwrap();
        for (a, b) in r.posterior.iter().zip(&reference.posterior) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(r.map_set, reference.map_set);
    }
}

#[test]
fn g1_grid_has_no_second_axis_dependence() {
    let c = IonChain::equally_spaced(5, 2.0, Some(2)).unwrap();
    let pat = g1_pattern(
        &c,
        ExcitationPulse::new(1.0).unwrap(),
        &SliceSpec::grid2d(9),
    )
    .unwrap();
    for row in pat.values.chunks(9) {
        assert!(row.iter().all(|&v| v == row[0]));
    }
}
