//! Domain types and equilibrium predicates for the symmetric three-action
//! game: population states, game parameters, payoff matrices, and the mixed
//! Nash / evolutionary stability checks.

use crate::rng::SlotRng;
use crate::{Error, Result};
use serde::Serialize;

/// Tolerance for the simplex-sum invariant of [`State`].
pub const STATE_SUM_TOL: f64 = 1e-12;

/// Default absolute tolerance for the equilibrium predicates.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;

/// Invasion sizes used by the sampled stability check.
pub const DEFAULT_INVASION_SIZES: [f64; 4] = [0.001, 0.01, 0.1, 0.3];

/// The three pure strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Action {
    /// Transmit at the high receive level (rho1 / gamma).
    High,
    /// Transmit at the low receive level (rho2 / gamma).
    Low,
    /// No transmission.
    Idle,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::High, Action::Low, Action::Idle];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Action::High => 0,
            Action::Low => 1,
            Action::Idle => 2,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Action::High),
            1 => Ok(Action::Low),
            2 => Ok(Action::Idle),
            _ => Err(Error::InvalidParameter(format!("action index {i} out of range"))),
        }
    }

    /// 1-based label used in traces (1 = high, 2 = low, 3 = idle).
    #[inline]
    pub fn label(self) -> u8 {
        self.index() as u8 + 1
    }
}

/// Probability triple (x1, x2, x3) over the actions; the population profile.
///
/// Construction enforces the simplex invariants (components in [0, 1], sum
/// within [`STATE_SUM_TOL`] of 1). [`State::normalized`] is the guarded
/// constructor for iterative updates that may step off the simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "[f64; 3]")]
pub struct State {
    x: [f64; 3],
}

impl From<State> for [f64; 3] {
    fn from(s: State) -> Self {
        s.x
    }
}

impl State {
    pub fn new(x1: f64, x2: f64, x3: f64) -> Result<Self> {
        let sum = x1 + x2 + x3;
        if !((sum - 1.0).abs() <= STATE_SUM_TOL) {
            return Err(Error::InvalidState(format!(
                "components sum to {sum}, expected 1 within {STATE_SUM_TOL}"
            )));
        }
        for (i, &v) in [x1, x2, x3].iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidState(format!("x{} = {v} outside [0, 1]", i + 1)));
            }
        }
        Ok(Self { x: [x1, x2, x3] })
    }

    /// Clamps negatives to zero and rescales to sum 1. Reserved for guarded
    /// replicator-style updates; everywhere else [`State::new`] re-asserts
    /// the invariants instead of silently fixing them.
    pub fn normalized(x1: f64, x2: f64, x3: f64) -> Result<Self> {
        let c = [x1.max(0.0), x2.max(0.0), x3.max(0.0)];
        let sum: f64 = c.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::InvalidState(format!("cannot normalize ({x1}, {x2}, {x3})")));
        }
        Ok(Self { x: [c[0] / sum, c[1] / sum, c[2] / sum] })
    }

    pub fn vertex(action: Action) -> Self {
        let mut x = [0.0; 3];
        x[action.index()] = 1.0;
        Self { x }
    }

    pub fn barycenter() -> Self {
        Self { x: [1.0 / 3.0; 3] }
    }

    #[inline]
    pub fn x1(&self) -> f64 {
        self.x[0]
    }

    #[inline]
    pub fn x2(&self) -> f64 {
        self.x[1]
    }

    #[inline]
    pub fn x3(&self) -> f64 {
        self.x[2]
    }

    #[inline]
    pub fn prob(&self, a: Action) -> f64 {
        self.x[a.index()]
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.x
    }

    /// True if every component is strictly positive.
    pub fn is_interior(&self) -> bool {
        self.x.iter().all(|&v| v > 0.0)
    }

    /// Max-norm distance to another state.
    pub fn distance(&self, other: &State) -> f64 {
        self.x
            .iter()
            .zip(other.x.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Cost structure of the transmit actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CostModel {
    /// Pre-decided constants with c1 > c2 > 0; c3 is the regret cost of
    /// staying silent (normalized to 0 in the analysis).
    Fixed { c1: f64, c2: f64, c3: f64 },
    /// Cost linear in the actual transmit power, C(p) = c·p.
    SnrScaled { c: f64 },
}

/// Minimum receive levels satisfying the SIC decode constraints with
/// equality: rho2 = Γ, rho1 = Γ(1+Γ).
pub fn derive_power_levels(sinr_threshold: f64) -> Result<(f64, f64)> {
    if !(sinr_threshold > 0.0) {
        return Err(Error::Domain(format!(
            "SINR threshold must be > 0, got {sinr_threshold}"
        )));
    }
    Ok((sinr_threshold * (1.0 + sinr_threshold), sinr_threshold))
}

/// Game parameters: reward, SINR threshold, receive levels, average channel
/// SNR and the cost model. All SNR/power fields are linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GameParams {
    pub reward: f64,
    pub sinr_threshold: f64,
    pub rho_high: f64,
    pub rho_low: f64,
    pub avg_snr: f64,
    pub cost: CostModel,
}

impl GameParams {
    /// Builds parameters with the minimum receive levels for `sinr_threshold`.
    pub fn from_sinr_threshold(
        reward: f64,
        sinr_threshold: f64,
        avg_snr: f64,
        cost: CostModel,
    ) -> Result<Self> {
        let (rho_high, rho_low) = derive_power_levels(sinr_threshold)?;
        Self::with_receive_levels(reward, sinr_threshold, rho_high, rho_low, avg_snr, cost)
    }

    /// Builds parameters with explicit receive levels, which must satisfy the
    /// SIC constraints rho_high/(rho_low+1) >= Γ and rho_low >= Γ.
    pub fn with_receive_levels(
        reward: f64,
        sinr_threshold: f64,
        rho_high: f64,
        rho_low: f64,
        avg_snr: f64,
        cost: CostModel,
    ) -> Result<Self> {
        if !(reward > 0.0) {
            return Err(Error::InvalidParameter(format!("reward must be > 0, got {reward}")));
        }
        if !(sinr_threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "SINR threshold must be > 0, got {sinr_threshold}"
            )));
        }
        if !(avg_snr > 0.0) {
            return Err(Error::InvalidParameter(format!("avg_snr must be > 0, got {avg_snr}")));
        }
        if rho_high / (rho_low + 1.0) < sinr_threshold - 1e-12 || rho_low < sinr_threshold - 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "receive levels ({rho_high}, {rho_low}) violate the SIC decode constraints \
                 at threshold {sinr_threshold}"
            )));
        }
        match cost {
            CostModel::Fixed { c1, c2, c3 } => {
                if !(c1 > c2 && c2 > 0.0) || !c3.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "fixed costs need c1 > c2 > 0 and finite c3, got ({c1}, {c2}, {c3})"
                    )));
                }
            }
            CostModel::SnrScaled { c } => {
                if !(c > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "cost scale must be > 0, got {c}"
                    )));
                }
            }
        }
        Ok(Self { reward, sinr_threshold, rho_high, rho_low, avg_snr, cost })
    }

    /// Same parameters with the SNR-scaled cost factor replaced.
    pub fn with_cost_scale(&self, c: f64) -> Result<Self> {
        Self::with_receive_levels(
            self.reward,
            self.sinr_threshold,
            self.rho_high,
            self.rho_low,
            self.avg_snr,
            CostModel::SnrScaled { c },
        )
    }

    /// Same parameters at a different average channel SNR.
    pub fn with_avg_snr(&self, avg_snr: f64) -> Result<Self> {
        Self::with_receive_levels(
            self.reward,
            self.sinr_threshold,
            self.rho_high,
            self.rho_low,
            avg_snr,
            self.cost,
        )
    }
}

/// The 3×3 payoff matrix of the symmetric game at fixed average costs:
///
/// ```text
/// [ -C̄1    R-C̄1   R-C̄1 ]
/// [ R-C̄2   -C̄2    R-C̄2 ]
/// [ -C3    -C3    -C3   ]
/// ```
///
/// Row i, column j is the payoff of playing i against an opponent playing j;
/// the off-diagonal structure encodes that a lone transmitter always decodes
/// and that SIC lets the two distinct levels decode jointly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PayoffMatrix {
    a: [[f64; 3]; 3],
}

impl PayoffMatrix {
    pub fn from_costs(reward: f64, avg_cost_high: f64, avg_cost_low: f64, idle_cost: f64) -> Result<Self> {
        for v in [reward, avg_cost_high, avg_cost_low, idle_cost] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite payoff input {v}")));
            }
        }
        let (c1, c2, c3) = (avg_cost_high, avg_cost_low, idle_cost);
        Ok(Self {
            a: [
                [-c1, reward - c1, reward - c1],
                [reward - c2, -c2, reward - c2],
                [-c3, -c3, -c3],
            ],
        })
    }

    #[inline]
    pub fn entry(&self, row: Action, col: Action) -> f64 {
        self.a[row.index()][col.index()]
    }

    pub fn as_rows(&self) -> [[f64; 3]; 3] {
        self.a
    }

    /// Payoff of pure action `i` against a population in state `x`: e_iᵀ A x.
    pub fn pure_payoff(&self, i: Action, x: &State) -> f64 {
        let row = &self.a[i.index()];
        let xv = x.as_array();
        row[0] * xv[0] + row[1] * xv[1] + row[2] * xv[2]
    }

    /// Payoff of mixed strategy `xbar` against state `x`: x̄ᵀ A x.
    pub fn mixed_payoff(&self, xbar: &State, x: &State) -> f64 {
        Action::ALL
            .iter()
            .map(|&i| xbar.prob(i) * self.pure_payoff(i, x))
            .sum()
    }
}

/// Mixed-strategy Nash check: u(x, x) >= u(i, x) − tol for every pure action.
pub fn is_mixed_ne(x: &State, payoffs: &PayoffMatrix, tol: f64) -> bool {
    let own = payoffs.mixed_payoff(x, x);
    Action::ALL.iter().all(|&i| own >= payoffs.pure_payoff(i, x) - tol)
}

/// Sampled evolutionary-stability check.
///
/// Verifies u(x, εx̄+(1−ε)x) > u(x̄, εx̄+(1−ε)x) − tol for every mutant x̄ ≠ x
/// in `mutants` and every invasion size ε in `invasion_sizes`. A finite grid
/// cannot certify stability against all mutants, so this is a necessary
/// check, not a proof.
pub fn is_ess(
    x: &State,
    payoffs: &PayoffMatrix,
    mutants: &[State],
    invasion_sizes: &[f64],
    tol: f64,
) -> Result<bool> {
    if mutants.is_empty() || invasion_sizes.is_empty() {
        return Err(Error::InvalidParameter("empty mutant or invasion grid".into()));
    }
    for &eps in invasion_sizes {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("invasion size {eps} outside (0, 1)")));
        }
    }
    for mutant in mutants {
        if mutant.distance(x) <= STATE_SUM_TOL {
            continue; // definition requires a distinct mutant
        }
        for &eps in invasion_sizes {
            let mixed = State::new(
                eps * mutant.x1() + (1.0 - eps) * x.x1(),
                eps * mutant.x2() + (1.0 - eps) * x.x2(),
                eps * mutant.x3() + (1.0 - eps) * x.x3(),
            )?;
            let incumbent = payoffs.mixed_payoff(x, &mixed);
            let invader = payoffs.mixed_payoff(mutant, &mixed);
            if !(incumbent > invader - tol) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Default mutant grid: the three vertices plus 12 seeded random states.
pub fn default_mutant_grid(seed: u64) -> Vec<State> {
    let mut grid: Vec<State> = Action::ALL.iter().map(|&a| State::vertex(a)).collect();
    let mut rng = SlotRng::new(seed);
    while grid.len() < 15 {
        // stick-breaking: order two uniforms, use the three gaps
        let (a, b) = (rng.next_uniform(), rng.next_uniform());
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if let Ok(s) = State::new(lo, hi - lo, 1.0 - hi) {
            grid.push(s);
        }
    }
    grid
}
