//! Evolutionarily stable strategy solvers: average transmit-power costs under
//! Rayleigh fading, the four-region closed forms for fixed costs, and the
//! two-stage fixed-point solve for SNR-scaled costs.

use crate::game::{is_mixed_ne, Action, CostModel, GameParams, PayoffMatrix, State};
use crate::math::{exp_integral_e1, exp_integral_e1_scaled};
use crate::{Error, Result};
use serde::Serialize;

/// Which branch of the analysis produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// Interior mixed equilibrium: c1 + c2 > R, c1 < R.
    FixedA,
    /// High power extinct: c1 > R, 0 < c2 < R.
    FixedB,
    /// No transmission: c1, c2 > R.
    FixedC,
    /// Always transmit: c1 + c2 < R.
    FixedD,
    /// SNR-scaled costs, two-stage fixed point.
    SnrScaled,
}

/// A solved equilibrium with the residuals of its defining equations.
#[derive(Debug, Clone, Serialize)]
pub struct EssSolution {
    pub state: State,
    pub regime: Regime,
    /// Residuals of the two defining (indifference) equations.
    pub residuals: [f64; 2],
    pub valid: bool,
    /// Why the solution is invalid, when it is.
    pub reason: Option<String>,
    /// Degenerate-policy notes (regions C and D).
    pub warnings: Vec<String>,
}

/// Residual tolerance required of a valid solution.
pub const RESIDUAL_TOL: f64 = 1e-10;

const BOUNDARY_GUARD: f64 = 1e-12;

/// Average costs of the transmit actions at state `x` under the SNR-scaled
/// model:
///
/// C̄1 = cρ1/(γ̄ x1)·E1(ln 1/x1),
/// C̄2 = cρ2/(γ̄ x2)·[E1(ln 1/(x1+x2)) − E1(ln 1/x1)].
///
/// The removable singularities take their limit values: C̄1 → 0 as x1 → 0 and
/// C̄2 → cρ2/(γ̄ ln 1/x1) as x2 → 0. Errors if x3 = 0, where the low-power
/// average diverges.
pub fn avg_cost_snr(x: &State, params: &GameParams) -> Result<(f64, f64)> {
    let c = match params.cost {
        CostModel::SnrScaled { c } => c,
        CostModel::Fixed { .. } => {
            return Err(Error::InvalidParameter(
                "avg_cost_snr requires the SNR-scaled cost model".into(),
            ))
        }
    };
    avg_cost_snr_scaled(x.x1(), x.x2(), c, params.rho_high, params.rho_low, params.avg_snr)
}

fn avg_cost_snr_scaled(
    x1: f64,
    x2: f64,
    c: f64,
    rho_high: f64,
    rho_low: f64,
    avg_snr: f64,
) -> Result<(f64, f64)> {
    let transmit = x1 + x2;
    if transmit >= 1.0 {
        return Err(Error::InfiniteCost(
            "x3 = 0: channel inversion without truncation has unbounded average power".into(),
        ));
    }
    // e^u E1(u) with u = ln(1/x1) equals E1(ln 1/x1)/x1 without underflow
    let cost_high = if x1 <= 0.0 {
        0.0
    } else {
        c * rho_high / avg_snr * exp_integral_e1_scaled((1.0 / x1).ln())?
    };
    let e1_high = if x1 <= 0.0 { 0.0 } else { exp_integral_e1((1.0 / x1).ln())? };
    let cost_low = if x2 <= 1e-12 {
        if x1 <= 0.0 {
            0.0
        } else {
            c * rho_low / (avg_snr * (1.0 / x1).ln())
        }
    } else {
        c * rho_low / (avg_snr * x2) * (exp_integral_e1((1.0 / transmit).ln())? - e1_high)
    };
    Ok((cost_high, cost_low))
}

/// Average costs of all three actions at `x` under either cost model; the
/// idle cost is the fixed `c3` (zero for SNR-scaled costs).
pub fn avg_costs(x: &State, params: &GameParams) -> Result<(f64, f64, f64)> {
    match params.cost {
        CostModel::Fixed { c1, c2, c3 } => Ok((c1, c2, c3)),
        CostModel::SnrScaled { .. } => {
            let (c1, c2) = avg_cost_snr(x, params)?;
            Ok((c1, c2, 0.0))
        }
    }
}

/// Payoff matrix of the game linearized at state `x` (costs evaluated there).
pub fn payoff_matrix_at(x: &State, params: &GameParams) -> Result<PayoffMatrix> {
    let (c1, c2, c3) = avg_costs(x, params)?;
    PayoffMatrix::from_costs(params.reward, c1, c2, c3)
}

/// Closed-form equilibrium for fixed costs. The (c1, c2) plane splits into
/// four regions; exact boundaries are rejected as ambiguous.
pub fn solve_fixed_cost(reward: f64, c1: f64, c2: f64) -> Result<EssSolution> {
    if !(reward > 0.0) {
        return Err(Error::InvalidParameter(format!("reward must be > 0, got {reward}")));
    }
    if !(c1 > c2 && c2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fixed costs need c1 > c2 > 0, got ({c1}, {c2})"
        )));
    }
    let guard = BOUNDARY_GUARD * reward.max(1.0);
    if (c1 + c2 - reward).abs() <= guard || (c1 - reward).abs() <= guard
        || (c2 - reward).abs() <= guard
    {
        return Err(Error::AmbiguousRegion(format!(
            "costs ({c1}, {c2}) lie on a region boundary at reward {reward}"
        )));
    }

    let (regime, state, warnings) = if c1 + c2 < reward {
        let delta = c1 - c2;
        let s = State::new(0.5 * (1.0 - delta / reward), 0.5 * (1.0 + delta / reward), 0.0)?;
        (
            Regime::FixedD,
            s,
            vec!["x3 = 0: untruncated channel inversion, transmit power may be arbitrarily high"
                .to_string()],
        )
    } else if c1 < reward {
        let s = State::new(1.0 - c1 / reward, 1.0 - c2 / reward, (c1 + c2) / reward - 1.0)?;
        (Regime::FixedA, s, Vec::new())
    } else if c2 < reward {
        let s = State::new(0.0, 1.0 - c2 / reward, c2 / reward)?;
        (Regime::FixedB, s, Vec::new())
    } else {
        (
            Regime::FixedC,
            State::vertex(Action::Idle),
            vec!["no transmission regime: both costs exceed the reward".to_string()],
        )
    };

    let payoffs = PayoffMatrix::from_costs(reward, c1, c2, 0.0)?;
    let residuals = support_residuals(&state, &payoffs);
    Ok(EssSolution { state, regime, residuals, valid: true, reason: None, warnings })
}

// In-support indifference residuals of the two transmit actions; actions
// outside the support contribute their (clamped) NE slack instead.
fn support_residuals(x: &State, payoffs: &PayoffMatrix) -> [f64; 2] {
    let own = payoffs.mixed_payoff(x, x);
    let mut out = [0.0; 2];
    for (k, act) in [Action::High, Action::Low].into_iter().enumerate() {
        let gap = payoffs.pure_payoff(act, x) - own;
        out[k] = if x.prob(act) > 0.0 { gap.abs() } else { gap.max(0.0) };
    }
    out
}

/// Sufficient condition for the high-power fixed point to exist at a given
/// idle probability: cρ1/γ̄ > R·x3·(1−x3)/E1(ln 1/(1−x3)).
pub fn existence_condition(x3: f64, params: &GameParams) -> Result<bool> {
    if !(x3 > 0.0 && x3 < 1.0) {
        return Err(Error::InvalidParameter(format!("x3 must be in (0, 1), got {x3}")));
    }
    let c = match params.cost {
        CostModel::SnrScaled { c } => c,
        CostModel::Fixed { .. } => {
            return Err(Error::InvalidParameter(
                "existence_condition applies to the SNR-scaled cost model".into(),
            ))
        }
    };
    let transmit = 1.0 - x3;
    let lhs = c * params.rho_high / params.avg_snr;
    let rhs = params.reward * x3 * transmit / exp_integral_e1((1.0 / transmit).ln())?;
    Ok(lhs > rhs)
}

/// Two-stage equilibrium solve for SNR-scaled costs.
///
/// Stage 1 finds x1 from R(1−x1) = C̄1(x1) on (0, 1); stage 2 finds x2 from
/// R(1−x2) = C̄2(x1, x2) on (0, 1−x1). Both left sides are decreasing and
/// both costs increasing, so each bracket holds a unique root. A solution
/// with x1 + x2 ≥ 1 − 1e-6 is returned invalid (the idle probability
/// collapsed; a larger cost scale restores it).
pub fn solve_snr_cost(params: &GameParams) -> Result<EssSolution> {
    let c = match params.cost {
        CostModel::SnrScaled { c } => c,
        CostModel::Fixed { .. } => {
            return Err(Error::InvalidParameter(
                "solve_snr_cost requires the SNR-scaled cost model".into(),
            ))
        }
    };
    let (reward, rho1, rho2, gbar) = (params.reward, params.rho_high, params.rho_low, params.avg_snr);
    let scale = c * rho1 / gbar;

    let f1 = |x1: f64| -> Result<f64> {
        Ok(reward * (1.0 - x1) - scale * exp_integral_e1_scaled((1.0 / x1).ln())?)
    };
    let mut lo = 1e-9;
    let hi = 1.0 - 1e-9;
    // f1(0+) = R > 0; extend the bracket downward when the root sits below
    // the nominal lower endpoint (very large cost scales)
    while f1(lo)? <= 0.0 && lo > 1e-250 {
        lo *= 1e-20;
    }
    let x1 = find_root(&f1, lo, hi)?;

    if x1 >= 1.0 - 1e-6 {
        return Ok(invalid_snr_solution(
            x1,
            0.0,
            "x3 collapsed; increase c".to_string(),
        ));
    }

    let f2 = |x2: f64| -> Result<f64> {
        let (_, c2) = avg_cost_snr_scaled(x1, x2, c, rho1, rho2, gbar)?;
        Ok(reward * (1.0 - x2) - c2)
    };
    let lo2 = 1e-9_f64.min(0.5 * (1.0 - x1));
    let hi2 = 1.0 - x1 - 1e-12;
    let (flo2, fhi2) = (f2(lo2)?, f2(hi2)?);
    if flo2 <= 0.0 {
        // average low-power cost exceeds the reward already as x2 -> 0
        return Ok(invalid_snr_solution(
            x1,
            0.0,
            "x2 collapsed: low-power cost exceeds the reward; decrease c".to_string(),
        ));
    }
    if fhi2 >= 0.0 {
        return Ok(invalid_snr_solution(
            x1,
            hi2,
            "x3 collapsed; increase c".to_string(),
        ));
    }
    let x2 = find_root(&f2, lo2, hi2)?;

    if x1 + x2 >= 1.0 - 1e-6 {
        return Ok(invalid_snr_solution(x1, x2, "x3 collapsed; increase c".to_string()));
    }

    let state = State::new(x1, x2, 1.0 - x1 - x2)?;
    let (c1bar, c2bar) = avg_cost_snr(&state, params)?;
    let residuals = [
        (reward * (1.0 - x1) - c1bar).abs(),
        (reward * (1.0 - x2) - c2bar).abs(),
    ];
    let valid = residuals[0] <= RESIDUAL_TOL && residuals[1] <= RESIDUAL_TOL;
    Ok(EssSolution {
        state,
        regime: Regime::SnrScaled,
        residuals,
        valid,
        reason: (!valid).then(|| format!("residuals {residuals:?} exceed {RESIDUAL_TOL}")),
        warnings: Vec::new(),
    })
}

fn invalid_snr_solution(x1: f64, x2: f64, reason: String) -> EssSolution {
    let state = State::normalized(x1, x2, (1.0 - x1 - x2).max(0.0))
        .unwrap_or_else(|_| State::vertex(Action::Idle));
    EssSolution {
        state,
        regime: Regime::SnrScaled,
        residuals: [f64::NAN, f64::NAN],
        valid: false,
        reason: Some(reason),
        warnings: Vec::new(),
    }
}

/// Cross-validation helper: the solved state must be a mixed NE of the game
/// linearized at its own costs.
pub fn verify_ne(solution: &EssSolution, params: &GameParams, tol: f64) -> Result<bool> {
    let payoffs = payoff_matrix_at(&solution.state, params)?;
    Ok(is_mixed_ne(&solution.state, &payoffs, tol))
}

// Bracketed bisection refined by secant steps. The callers guarantee a sign
// change; monotonicity of the defining functions makes the root unique.
fn find_root<F>(f: &F, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    const X_TOL: f64 = 1e-14;
    let mut flo = f(lo)?;
    let mut fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket(format!(
            "f({lo}) = {flo} and f({hi}) = {fhi} have the same sign"
        )));
    }
    for _ in 0..300 {
        if (hi - lo).abs() <= X_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let secant = if fhi != flo { hi - fhi * (hi - lo) / (fhi - flo) } else { mid };
        let inside = secant > lo && secant < hi;
        // fall back to bisection when the secant stalls near an endpoint
        let x = if inside && (secant - lo).min(hi - secant) >= 0.01 * (hi - lo) {
            secant
        } else {
            mid
        };
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
    }
    Ok(0.5 * (lo + hi))
}
