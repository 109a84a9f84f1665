//! Closed-form throughput expressions, the OMA comparison, and parameter
//! sweeps over the cost scale or the average channel SNR.

use crate::ess::{solve_snr_cost, EssSolution};
use crate::game::{GameParams, State};
use crate::{Error, Result};
use serde::Serialize;
use std::collections::HashMap;
use std::io::Write;

/// Per-user throughput of hybrid uplink NOMA at state x:
/// η = (1−x1)x1 + (1−x2)x2.
pub fn throughput_hnoma(x: &State) -> f64 {
    (1.0 - x.x1()) * x.x1() + (1.0 - x.x2()) * x.x2()
}

/// Per-user TDMA throughput when each user is silent with probability δ:
/// η = (1−δ)/2.
pub fn throughput_oma(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok((1.0 - delta) / 2.0)
}

/// Maximum hybrid-NOMA throughput under the truncation constraint
/// x1 + x2 ≤ 1 − δ: η* = (1−δ²)/2, attained at x1 = x2 = (1−δ)/2.
pub fn throughput_hnoma_opt(delta: f64) -> Result<(f64, State)> {
    check_delta(delta)?;
    let half = (1.0 - delta) / 2.0;
    Ok(((1.0 - delta * delta) / 2.0, State::new(half, half, delta)?))
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("delta must be in [0, 1], got {delta}")));
    }
    Ok(())
}

/// Throughput comparison at a state, taking δ = x3 as the silence probability
/// common to both schemes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThroughputReport {
    pub eta_hnoma: f64,
    pub eta_oma: f64,
    pub eta_hnoma_opt: f64,
    /// η_hnoma / η_oma at this state.
    pub ratio: f64,
    /// Ceiling of the ratio: η*_hnoma / η_oma = 1 + x3.
    pub ratio_bound: f64,
}

pub fn throughput_report(x: &State) -> Result<ThroughputReport> {
    let delta = x.x3();
    let eta = throughput_hnoma(x);
    let oma = throughput_oma(delta)?;
    let (opt, _) = throughput_hnoma_opt(delta)?;
    Ok(ThroughputReport {
        eta_hnoma: eta,
        eta_oma: oma,
        eta_hnoma_opt: opt,
        ratio: if oma > 0.0 { eta / oma } else { f64::INFINITY },
        ratio_bound: 1.0 + delta,
    })
}

/// Sweep axis for [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    CostScale,
    AvgSnr,
}

/// One sweep point. Throughputs are absent when the solve was invalid.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub solution: EssSolution,
    pub eta_hnoma: Option<f64>,
    pub eta_oma: Option<f64>,
}

/// Interpolated point where x1* crosses x2*.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Crossover {
    pub value: f64,
    pub x: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    pub crossover: Option<Crossover>,
}

impl SweepTable {
    /// CSV rows `value,x1,x2,x3,valid,eta_hnoma,eta_oma`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "value,x1,x2,x3,valid,eta_hnoma,eta_oma")?;
        for r in &self.rows {
            let s = &r.solution.state;
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.value,
                s.x1(),
                s.x2(),
                s.x3(),
                r.solution.valid,
                r.eta_hnoma.map_or(String::new(), |v| v.to_string()),
                r.eta_oma.map_or(String::new(), |v| v.to_string()),
            )?;
        }
        Ok(())
    }
}

/// Memo of equilibrium solves keyed by the full parameter tuple, so repeated
/// sweeps (figure regeneration, tracking targets) stay incremental.
#[derive(Default)]
pub struct EssCache {
    map: HashMap<[u64; 6], EssSolution>,
}

impl EssCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Solve (or recall) the SNR-cost equilibrium at `params`.
    pub fn solve(&mut self, params: &GameParams) -> Result<EssSolution> {
        let c = match params.cost {
            crate::game::CostModel::SnrScaled { c } => c,
            crate::game::CostModel::Fixed { .. } => {
                return Err(Error::InvalidParameter(
                    "sweeps cover the SNR-scaled cost model".into(),
                ))
            }
        };
        let key = [
            params.reward.to_bits(),
            params.sinr_threshold.to_bits(),
            params.rho_high.to_bits(),
            params.rho_low.to_bits(),
            params.avg_snr.to_bits(),
            c.to_bits(),
        ];
        if let Some(hit) = self.map.get(&key) {
            return Ok(hit.clone());
        }
        let sol = solve_snr_cost(params)?;
        self.map.insert(key, sol.clone());
        Ok(sol)
    }
}

/// Solves the equilibrium along `values` of the chosen axis and tabulates
/// throughputs against the OMA baseline at δ = x3*. Points where the solver
/// reports an invalid or unreachable solution are carried with the invalid
/// flag set rather than aborting the sweep.
pub fn sweep(
    params: &GameParams,
    axis: SweepAxis,
    values: &[f64],
    cache: &mut EssCache,
) -> Result<SweepTable> {
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let point = match axis {
            SweepAxis::CostScale => params.with_cost_scale(v)?,
            SweepAxis::AvgSnr => params.with_avg_snr(v)?,
        };
        let solution = match cache.solve(&point) {
            Ok(s) => s,
            Err(Error::NoBracket(msg)) => EssSolution {
                state: State::vertex(crate::game::Action::Idle),
                regime: crate::ess::Regime::SnrScaled,
                residuals: [f64::NAN, f64::NAN],
                valid: false,
                reason: Some(format!("no bracket: {msg}")),
                warnings: Vec::new(),
            },
            Err(e) => return Err(e),
        };
        let (eta_hnoma, eta_oma) = if solution.valid {
            (
                Some(throughput_hnoma(&solution.state)),
                Some(throughput_oma(solution.state.x3())?),
            )
        } else {
            (None, None)
        };
        rows.push(SweepRow { value: v, solution, eta_hnoma, eta_oma });
    }
    let crossover = detect_crossover(&rows);
    Ok(SweepTable { axis, rows, crossover })
}

// Sign change of x1* - x2* between consecutive valid rows, linearly
// interpolated in the axis value.
fn detect_crossover(rows: &[SweepRow]) -> Option<Crossover> {
    let valid: Vec<&SweepRow> = rows.iter().filter(|r| r.solution.valid).collect();
    for pair in valid.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let da = a.solution.state.x1() - a.solution.state.x2();
        let db = b.solution.state.x1() - b.solution.state.x2();
        if da == 0.0 {
            return Some(Crossover { value: a.value, x: a.solution.state.x1() });
        }
        if da * db < 0.0 {
            let t = da / (da - db);
            let value = a.value + t * (b.value - a.value);
            let x = a.solution.state.x1()
                + t * (b.solution.state.x1() - a.solution.state.x1());
            return Some(Crossover { value, x });
        }
    }
    None
}
