//! Property tests for the algebraic invariants of the game layer.

use hnoma_core::game::{
    is_ess, is_mixed_ne, Action, CostModel, GameParams, PayoffMatrix, State,
    DEFAULT_INVASION_SIZES,
};
use hnoma_core::math::{state_from_thresholds, thresholds_from_state};
use hnoma_core::replicator::replicator_step;
use proptest::prelude::*;

fn arb_state() -> impl Strategy<Value = State> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b)| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        State::new(lo, hi - lo, 1.0 - hi).unwrap()
    })
}

fn arb_costs() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    // reward, c1 > c2 > 0, c3
    (0.2..3.0f64, 0.05..0.95f64, 0.05..0.95f64, -0.5..0.5f64).prop_map(|(r, a, b, c3)| {
        let hi = a.max(b) * r + 0.01;
        let lo = a.min(b) * r * 0.99 + 0.005;
        (r, hi, lo, c3)
    })
}

proptest! {
    #[test]
    fn mixed_payoff_is_the_weighted_pure_payoff(
        xbar in arb_state(),
        x in arb_state(),
        (r, c1, c2, c3) in arb_costs(),
    ) {
        let a = PayoffMatrix::from_costs(r, c1, c2, c3).unwrap();
        let direct = a.mixed_payoff(&xbar, &x);
        let weighted: f64 = Action::ALL
            .iter()
            .map(|&i| xbar.prob(i) * a.pure_payoff(i, &x))
            .sum();
        prop_assert!((direct - weighted).abs() <= 1e-12);
    }

    #[test]
    fn equalizer_states_make_opponents_indifferent(
        x in arb_state(),
        r in 0.5..2.0f64,
        margin in 0.05..0.45f64,
        split in 0.1..0.9f64,
    ) {
        // region-A interior equilibrium: c1 + c2 > r, c1 < r, c1 > c2
        let c1 = r * (1.0 - margin * split);
        let c2 = r * (1.0 - margin);
        prop_assume!(c1 > c2 && c1 + c2 > r);
        let a = PayoffMatrix::from_costs(r, c1, c2, 0.0).unwrap();
        let star = State::new(
            1.0 - c1 / r,
            1.0 - c2 / r,
            (c1 + c2) / r - 1.0,
        ).unwrap();
        // the indifference point equalizes every strategy played against it:
        // u(y, x*) = u(x*, x*) for all y
        let own = a.mixed_payoff(&star, &star);
        prop_assert!((a.mixed_payoff(&x, &star) - own).abs() <= 1e-12);
    }

    #[test]
    fn payoff_shifts_preserve_equilibrium_verdicts(
        x in arb_state(),
        (r, c1, c2, _) in arb_costs(),
        shift in -1.0..1.0f64,
    ) {
        let a = PayoffMatrix::from_costs(r, c1, c2, 0.0).unwrap();
        let b = PayoffMatrix::from_costs(r, c1 - shift, c2 - shift, -shift).unwrap();
        // adding `shift` to every entry moves all payoffs equally
        let pa = a.mixed_payoff(&x, &x);
        let pb = b.mixed_payoff(&x, &x);
        prop_assert!((pb - pa - shift).abs() <= 1e-12);
        prop_assert_eq!(is_mixed_ne(&x, &a, 1e-9), is_mixed_ne(&x, &b, 1e-9));
        let mutants = [State::vertex(Action::High), State::vertex(Action::Low), State::barycenter()];
        prop_assert_eq!(
            is_ess(&x, &a, &mutants, &DEFAULT_INVASION_SIZES, 1e-9).unwrap(),
            is_ess(&x, &b, &mutants, &DEFAULT_INVASION_SIZES, 1e-9).unwrap()
        );
    }

    #[test]
    fn threshold_state_bijection_on_the_interior(
        x in arb_state(),
        gbar in 0.5..50.0f64,
    ) {
        prop_assume!(x.x1() > 1e-9 && x.x2() > 1e-9 && x.x3() > 1e-9);
        let t = thresholds_from_state(&x, gbar).unwrap();
        let back = state_from_thresholds(&t, gbar).unwrap();
        prop_assert!(back.distance(&x) <= 1e-12);
    }

    #[test]
    fn replicator_steps_stay_on_the_simplex(
        x in arb_state(),
        (r, c1, c2, _) in arb_costs(),
        mu in 0.01..0.5f64,
    ) {
        prop_assume!(x.is_interior());
        let params = GameParams::from_sinr_threshold(
            r, 4.0, 10.0, CostModel::Fixed { c1, c2, c3: 0.0 },
        ).unwrap();
        let next = replicator_step(&x, &params, mu).unwrap();
        let sum: f64 = next.as_array().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        prop_assert!(next.as_array().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
