//! Equilibrium solver checks that route the verification through the
//! quadrature oracle rather than the library's own E1.

use hnoma_core::ess::{
    avg_cost_snr, existence_condition, payoff_matrix_at, solve_fixed_cost, solve_snr_cost,
};
use hnoma_core::game::{
    default_mutant_grid, is_ess, is_mixed_ne, CostModel, GameParams, State, DEFAULT_INVASION_SIZES,
    EQUILIBRIUM_TOL,
};
use hnoma_core::replicator::run_replicator;
use hnoma_testutil::{e1_quadrature, uniform_stream};

fn snr_params(reward: f64, c: f64, gamma: f64, gbar: f64) -> GameParams {
    GameParams::from_sinr_threshold(reward, gamma, gbar, CostModel::SnrScaled { c }).unwrap()
}

// Average costs recomputed from scratch through the quadrature oracle.
fn oracle_costs(x1: f64, x2: f64, c: f64, rho1: f64, rho2: f64, gbar: f64) -> (f64, f64) {
    let e1_x1 = if x1 > 0.0 { e1_quadrature((1.0 / x1).ln()) } else { 0.0 };
    let c1 = if x1 > 0.0 { c * rho1 / (gbar * x1) * e1_x1 } else { 0.0 };
    let c2 = c * rho2 / (gbar * x2) * (e1_quadrature((1.0 / (x1 + x2)).ln()) - e1_x1);
    (c1, c2)
}

#[test]
fn solver_roots_satisfy_the_equations_through_the_oracle() {
    for (reward, c, gamma, gbar) in [(1.0, 2.0, 4.0, 10.0), (1.0, 1.0, 4.0, 10.0), (1.5, 0.8, 2.0, 6.0)] {
        let p = snr_params(reward, c, gamma, gbar);
        let sol = solve_snr_cost(&p).unwrap();
        assert!(sol.valid, "({reward}, {c}, {gamma}, {gbar})");
        let (x1, x2) = (sol.state.x1(), sol.state.x2());
        let (c1, c2) = oracle_costs(x1, x2, c, p.rho_high, p.rho_low, gbar);
        assert!(
            (reward * (1.0 - x1) - c1).abs() <= 1e-9,
            "stage-1 oracle residual {}",
            (reward * (1.0 - x1) - c1).abs()
        );
        assert!(
            (reward * (1.0 - x2) - c2).abs() <= 1e-9,
            "stage-2 oracle residual {}",
            (reward * (1.0 - x2) - c2).abs()
        );
    }
}

#[test]
fn library_costs_agree_with_oracle_costs() {
    for s in hnoma_testutil::random_simplex(42, 20) {
        // keep x3 away from 0 where costs diverge
        let x = State::new(s[0] * 0.8, s[1] * 0.8, 1.0 - 0.8 * (s[0] + s[1])).unwrap();
        if x.x2() < 1e-6 {
            continue;
        }
        let p = snr_params(1.0, 1.3, 4.0, 12.0);
        let (c1, c2) = avg_cost_snr(&x, &p).unwrap();
        let (o1, o2) = oracle_costs(x.x1(), x.x2(), 1.3, p.rho_high, p.rho_low, 12.0);
        assert!((c1 - o1).abs() <= 1e-9 * (1.0 + o1.abs()), "C1 {c1} vs {o1} at {x:?}");
        assert!((c2 - o2).abs() <= 1e-9 * (1.0 + o2.abs()), "C2 {c2} vs {o2} at {x:?}");
    }
}

#[test]
fn solved_points_are_nash_and_sampled_ess() {
    let mutants = default_mutant_grid(17);
    for (c, gbar) in [(2.0, 10.0), (1.0, 10.0), (0.5, 8.0)] {
        let p = snr_params(1.0, c, 4.0, gbar);
        let sol = solve_snr_cost(&p).unwrap();
        let payoffs = payoff_matrix_at(&sol.state, &p).unwrap();
        assert!(is_mixed_ne(&sol.state, &payoffs, EQUILIBRIUM_TOL));
        assert!(
            is_ess(&sol.state, &payoffs, &mutants, &DEFAULT_INVASION_SIZES, EQUILIBRIUM_TOL)
                .unwrap()
        );
        // in-support indifference at 1e-8
        let own = payoffs.mixed_payoff(&sol.state, &sol.state);
        for act in [hnoma_core::Action::High, hnoma_core::Action::Low] {
            assert!((payoffs.pure_payoff(act, &sol.state) - own).abs() <= 1e-8);
        }
        // the existence condition holds at the solved idle probability
        assert!(existence_condition(sol.state.x3(), &p).unwrap());
    }
}

#[test]
fn monotone_in_cost_scale_and_avg_snr() {
    let base = snr_params(1.0, 1.0, 4.0, 10.0);
    let mut prev = f64::INFINITY;
    for i in 1..=12 {
        let c = 0.25 * i as f64;
        let x1 = solve_snr_cost(&base.with_cost_scale(c).unwrap()).unwrap().state.x1();
        assert!(x1 < prev, "x1* not decreasing at c = {c}");
        prev = x1;
    }
    let mut prev = -1.0;
    for g in (2..=50).step_by(4) {
        let x1 = solve_snr_cost(&base.with_avg_snr(g as f64).unwrap()).unwrap().state.x1();
        assert!(x1 > prev, "x1* not increasing at gbar = {g}");
        prev = x1;
    }
}

// Samples a fixed-cost tuple strictly inside the named region with a margin.
fn sample_region(region: char, next: &mut impl FnMut() -> f64) -> (f64, f64, f64) {
    loop {
        let reward = 0.5 + 1.5 * next();
        let m = 0.05 * reward;
        let (c1, c2) = match region {
            'A' => {
                let c1 = m + (reward - 2.0 * m) * next();
                let c2 = m + (c1 - 2.0 * m) * next();
                (c1, c2)
            }
            'B' => (reward * (1.05 + 2.0 * next()), m + (reward - 2.0 * m) * next()),
            'D' => {
                let c1 = 2.0 * m + (reward - 4.0 * m) * next();
                let c2 = m + (c1 - 2.0 * m) * next();
                (c1, c2)
            }
            _ => unreachable!(),
        };
        if c2 <= m || c1 - c2 <= m {
            continue;
        }
        let inside = match region {
            'A' => c1 + c2 > reward + m && c1 < reward - m,
            'B' => c1 > reward + m && c2 < reward - m,
            'D' => c1 + c2 < reward - m,
            _ => unreachable!(),
        };
        if inside {
            return (reward, c1, c2);
        }
    }
}

#[test]
fn replicator_fixed_points_match_closed_forms() {
    // 30-tuple version of the full acceptance sweep
    let mut next = uniform_stream(99);
    for trial in 0..30 {
        let region = ['A', 'B', 'D'][trial % 3];
        let (reward, c1, c2) = sample_region(region, &mut next);
        let sol = solve_fixed_cost(reward, c1, c2).unwrap();
        let params = GameParams::from_sinr_threshold(
            reward,
            4.0,
            10.0,
            CostModel::Fixed { c1, c2, c3: 0.0 },
        )
        .unwrap();
        let traj = run_replicator(&State::barycenter(), &params, 0.2, 100_000, 1e-11).unwrap();
        assert!(traj.converged, "{region} ({reward}, {c1}, {c2})");
        let err = traj.final_state().distance(&sol.state);
        assert!(err <= 1e-6, "{region} ({reward}, {c1}, {c2}): err {err:e}");
    }
}
