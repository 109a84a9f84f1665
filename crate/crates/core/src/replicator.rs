//! Discrete-time replicator dynamics over the three-action game, with costs
//! re-evaluated at the current state each step.

use crate::ess::payoff_matrix_at;
use crate::game::{Action, GameParams, State};
use crate::{Error, Result};
use serde::Serialize;
use std::io::Write;

/// Components below this are treated as exactly zero: the replicator cannot
/// resurrect an extinct action, so denormal drift is noise.
pub const EXTINCTION_FLOOR: f64 = 1e-15;

/// Defaults for [`run_replicator`].
pub const DEFAULT_STEP_SIZE: f64 = 0.2;
pub const DEFAULT_MAX_ITERS: usize = 100_000;
pub const DEFAULT_DRIFT_TOL: f64 = 1e-10;

/// A recorded run of the dynamics.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    /// Visited states; `states[0]` is the initial state.
    pub states: Vec<State>,
    /// Population payoff u(x, x) at each recorded state.
    pub payoffs: Vec<f64>,
    pub step_size: f64,
    pub converged: bool,
    /// Steps actually taken (`states.len() - 1`).
    pub iterations: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    /// CSV rows `iter,x1,x2,x3,payoff`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,x1,x2,x3,payoff")?;
        for (i, (s, p)) in self.states.iter().zip(self.payoffs.iter()).enumerate() {
            writeln!(w, "{},{},{},{},{}", i, s.x1(), s.x2(), s.x3(), p)?;
        }
        Ok(())
    }
}

/// One guarded Euler step x_i' = x_i + μ·x_i·(u(i, x) − u(x, x)).
///
/// The drift sums to zero analytically; after the update, negative components
/// are clamped to zero, sub-floor components zeroed, and the state
/// renormalized.
pub fn replicator_step(x: &State, params: &GameParams, step_size: f64) -> Result<State> {
    if !(step_size > 0.0) {
        return Err(Error::InvalidParameter(format!("step size must be > 0, got {step_size}")));
    }
    let payoffs = payoff_matrix_at(x, params)?;
    let own = payoffs.mixed_payoff(x, x);
    let mut next = [0.0f64; 3];
    for act in Action::ALL {
        let i = act.index();
        let xi = x.prob(act);
        next[i] = xi + step_size * xi * (payoffs.pure_payoff(act, x) - own);
        if next[i] < EXTINCTION_FLOOR {
            next[i] = 0.0;
        }
    }
    State::normalized(next[0], next[1], next[2])
}

/// Iterates [`replicator_step`] until the max-norm step drift falls to
/// `drift_tol` or the iteration budget runs out; records every state.
/// Budget exhaustion yields a non-converged trajectory, not an error.
pub fn run_replicator(
    x0: &State,
    params: &GameParams,
    step_size: f64,
    max_iters: usize,
    drift_tol: f64,
) -> Result<Trajectory> {
    if !x0.is_interior() {
        return Err(Error::InvalidParameter(
            "initial state must be interior: extinct actions can never re-enter".into(),
        ));
    }
    let mut states = Vec::with_capacity(max_iters.min(4096) + 1);
    let mut payoffs = Vec::with_capacity(states.capacity());
    let mut x = *x0;
    states.push(x);
    payoffs.push(population_payoff(&x, params)?);

    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iters {
        let next = replicator_step(&x, params, step_size)?;
        let drift = next.distance(&x);
        x = next;
        states.push(x);
        payoffs.push(population_payoff(&x, params)?);
        iterations += 1;
        if drift <= drift_tol {
            converged = true;
            break;
        }
    }
    Ok(Trajectory { states, payoffs, step_size, converged, iterations })
}

fn population_payoff(x: &State, params: &GameParams) -> Result<f64> {
    let payoffs = payoff_matrix_at(x, params)?;
    Ok(payoffs.mixed_payoff(x, x))
}
