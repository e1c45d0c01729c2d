use std::f64::consts::{FRAC_PI_4, PI};

use bellforge::analytic;
use bellforge::bounds;
use bellforge::correlation::{self, Behavior, DeterministicStrategy, ExactBehavior};
use bellforge::forge::{self, BellFunctional, MSeparableVariant};
use bellforge::optimizer;
use bellforge::quantum::{self, MeasurementAssignment, PureState, QubitMeasurement};
use bellforge::Rational;
use num_complex::Complex64;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn angles(n: usize) -> impl Strategy<Value = MeasurementAssignment> {
    prop::collection::vec(-PI..PI, 4 * n)
        .prop_map(|a| MeasurementAssignment::from_angles(&a).unwrap())
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

fn strategy(n: usize) -> impl Strategy<Value = DeterministicStrategy> {
    (0..1u64 << (2 * n)).prop_map(move |i| DeterministicStrategy::from_index(n, i))
}

fn kron(a: &PureState, b: &PureState) -> PureState {
    let amps = a
        .amplitudes()
        .iter()
        .flat_map(|x| b.amplitudes().iter().map(move |y| x * y))
        .collect();
    PureState::new(amps).unwrap()
}

/// Random mixture of the 24 bipartite no-signalling vertices.
fn ns_mixture(weights: &[u32]) -> ExactBehavior {
    let vertices = correlation::bipartite_ns_vertices();
    let mut acc: Option<ExactBehavior> = None;
    let mut used = 0u32;
    for (v, &w) in vertices.iter().zip(weights) {
        if w == 0 {
            continue;
        }
        used += w;
        acc = Some(match acc {
            None => v.clone(),
            Some(b) => {
                let lambda = Rational::new(w as i64, used as i64);
                v.mix(&b, lambda).unwrap()
            }
        });
    }
    acc.unwrap_or_else(|| vertices[0].clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quantum_behaviors_are_no_signalling(
        (n, seed, m) in (2usize..=4).prop_flat_map(|n| (Just(n), any::<u64>(), angles(n)))
    ) {
        let state = quantum::haar_random_state(n, seed).unwrap();
        let b = quantum::behavior_from_state(&state, &m).unwrap();
        let report = b.check(1e-10);
        prop_assert!(report.is_valid(), "{report:?}");
    }

    #[test]
    fn evaluation_is_linear(
        (n, s1, s2) in (2usize..=4).prop_flat_map(|n| (Just(n), strategy(n), strategy(n))),
        num in 0i64..=10,
    ) {
        let f = if n == 2 { forge::chsh_variant_functional() } else { forge::i_sym(n).unwrap() };
        let lambda = Rational::new(num, 10);
        let b1: ExactBehavior = s1.behavior().unwrap();
        let b2: ExactBehavior = s2.behavior().unwrap();
        let mixed = f.evaluate(&b1.mix(&b2, lambda).unwrap()).unwrap();
        let v1 = f.evaluate(&b1).unwrap();
        let v2 = f.evaluate(&b2).unwrap();
        prop_assert_eq!(mixed, lambda * v1 + (Rational::one() - lambda) * v2);
        prop_assert_eq!(v1, f.evaluate_strategy(&s1).unwrap());
    }

    #[test]
    fn symmetric_family_is_permutation_invariant(
        (n, perm) in (3usize..=6).prop_flat_map(|n| (Just(n), permutation(n)))
    ) {
        let f = forge::i_sym(n).unwrap();
        prop_assert!(f.permute_parties(&perm).unwrap().same_coefficients(&f));
    }

    #[test]
    fn centered_family_is_invariant_when_center_is_fixed(
        (n, rest) in (3usize..=6).prop_flat_map(|n| (Just(n), Just((1..n).collect::<Vec<_>>()).prop_shuffle()))
    ) {
        let f = forge::i_centered(n).unwrap();
        let perm: Vec<usize> = std::iter::once(0).chain(rest).collect();
        prop_assert!(f.permute_parties(&perm).unwrap().same_coefficients(&f));
    }

    #[test]
    fn permutation_commutes_with_evaluation(
        (n, perm, s) in (3usize..=5).prop_flat_map(|n| (Just(n), permutation(n), strategy(n)))
    ) {
        let f = forge::i_centered(n).unwrap();
        let b: ExactBehavior = s.behavior().unwrap();
        let lhs = f.permute_parties(&perm).unwrap().evaluate(&b.permute_parties(&perm).unwrap()).unwrap();
        prop_assert_eq!(lhs, f.evaluate(&b).unwrap());
    }

    #[test]
    fn families_are_nonpositive_on_deterministic_strategies(
        (n, s) in (3usize..=7).prop_flat_map(|n| (Just(n), strategy(n)))
    ) {
        prop_assert!(forge::i_sym(n).unwrap().evaluate_strategy(&s).unwrap() <= Rational::zero());
        prop_assert!(forge::i_centered(n).unwrap().evaluate_strategy(&s).unwrap() <= Rational::zero());
    }

    #[test]
    fn schmidt_decomposition_round_trips(seed in any::<u64>()) {
        let state = quantum::haar_random_state(2, seed).unwrap();
        let sd = quantum::schmidt_decompose(&state).unwrap();
        prop_assert!((0.0..=FRAC_PI_4 + 1e-12).contains(&sd.theta));
        let overlap = sd.rotate(&state).inner(&sd.canonical_state()).norm();
        prop_assert!((overlap - 1.0).abs() < 1e-10, "overlap {overlap}");
    }

    #[test]
    fn conditional_outcome_probabilities_sum_to_one(
        seed in any::<u64>(), alpha in 0.0..PI, delta in -PI..PI, party in 0usize..3,
    ) {
        let state = quantum::haar_random_state(3, seed).unwrap();
        let meas = QubitMeasurement::new(alpha, delta);
        let total: f64 = (0..2u8)
            .map(|o| quantum::conditional_two_party_state(&state, &[(party, meas, o)]).map_or(0.0, |(_, p)| p))
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-10, "total {total}");
    }

    #[test]
    fn product_states_never_violate(
        (s1, s2, s3, m) in (any::<u64>(), any::<u64>(), any::<u64>(), angles(3))
    ) {
        let f = forge::i_sym(3).unwrap();
        let pair = quantum::haar_random_state(2, s1).unwrap();
        let single = |seed: u64| {
            let q = quantum::haar_random_state(2, seed).unwrap();
            PureState::from_unnormalized(q.amplitudes()[..2].to_vec()).unwrap()
        };
        let bisep = kron(&pair, &single(s2));
        prop_assert!(optimizer::assignment_value(&f, &bisep, &m) <= 1e-8);
        let full = kron(&kron(&single(s1), &single(s2)), &single(s3));
        prop_assert!(optimizer::assignment_value(&f, &full, &m) <= 1e-8);
    }

    #[test]
    fn see_saw_is_monotone((seed, m) in (any::<u64>(), angles(3))) {
        let f = forge::i_sym(3).unwrap();
        let state = quantum::haar_random_state(3, seed).unwrap();
        let trace = optimizer::see_saw_trace(&f, &state, m, 30, 1e-12).unwrap();
        for w in trace.values.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12, "{w:?}");
        }
    }

    #[test]
    fn ghz_violation_matches_closed_form(n in 3usize..=6, theta in 0.02..FRAC_PI_4 - 0.02) {
        let cert = analytic::ghz_violation(n, theta).unwrap();
        prop_assert!(cert.value > 0.0);
        prop_assert!(cert.residual() < 1e-10);
        prop_assert!(cert.zero_residuals.iter().all(|z| *z < 1e-10));
    }

    #[test]
    fn hardy_zeros_hold_off_forbidden_lines(
        theta in 0.05..FRAC_PI_4 - 0.05, alpha in 0.05..PI / 2.0 - 0.05, delta in -PI..PI,
    ) {
        let cert = analytic::hardy_measurements(theta, alpha, delta).unwrap();
        prop_assert!(cert.max_zero_residual() < 1e-12);
        let closed = analytic::hardy_p00_closed_form(theta, alpha);
        prop_assert!((cert.p_00_00 - closed).abs() < 1e-12);
    }

    #[test]
    fn correlator_form_tracks_variant_on_ns_behaviors(
        weights in prop::collection::vec(0u32..5, 24)
    ) {
        let b = ns_mixture(&weights);
        let variant = forge::chsh_variant_functional().evaluate(&b).unwrap();
        let corr = forge::correlator_chsh().evaluate(&b).unwrap();
        prop_assert_eq!(corr, Rational::from_integer(2) + Rational::from_integer(4) * variant);
    }

    #[test]
    fn functional_json_round_trips(n in 3usize..=6, centered in any::<bool>()) {
        let f = if centered { forge::i_centered(n).unwrap() } else { forge::i_sym(n).unwrap() };
        let back = BellFunctional::from_json(&f.to_json()).unwrap();
        prop_assert!(back.same_coefficients(&f));
        prop_assert_eq!(back.bound(), f.bound());
    }

    #[test]
    fn sampled_bound_stays_at_zero(seed in any::<u64>(), centered in any::<bool>()) {
        let variant = if centered { MSeparableVariant::Centered } else { MSeparableVariant::Symmetric };
        let f = forge::build_m_separable(&forge::chsh_variant(), 4, 3, variant).unwrap();
        let cert = bounds::grouped_bound_sampled(&f, 3, 200, seed).unwrap();
        prop_assert!(cert.value.to_f64() <= 1e-9);
        prop_assert!(cert.verify(&f));
    }
}

#[test]
fn assignment_json_round_trips() {
    let m = MeasurementAssignment::from_angles(&[0.1, 0.2, 0.3, 0.4, 1.0, -1.0, 0.5, 0.0]).unwrap();
    let back: MeasurementAssignment = serde_json::from_value(serde_json::to_value(&m).unwrap()).unwrap();
    assert_eq!(back, m);
}

#[test]
fn uniform_behavior_is_valid() {
    let b: Behavior<f64> = Behavior::uniform(3).unwrap();
    assert!(b.check(1e-12).is_valid());
    let c = Complex64::new(0.0, 0.0);
    assert!(PureState::new(vec![c; 4]).is_err());
}
