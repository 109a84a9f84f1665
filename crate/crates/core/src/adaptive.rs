//! Estimation-driven state updating: the centralized SU-BS protocol (one
//! shared state updated at the base station) and the distributed SU-U
//! protocol (every user updates its own state from its own feedback), plus
//! block-wise cost schedules and the fairness scaling of the cost factor.
//!
//! Both protocols replace the analytic payoffs in the replicator update with
//! estimates formed over blocks of B slots. SU-BS pools decode outcomes
//! across all M resource blocks and averages user-reported realized costs;
//! convergence is tight. SU-U gives each user only its own ACK/NACK history
//! and realized costs, the minimum feedback a deployment would need; the
//! per-user noise makes the population mean converge more slowly and, at
//! large step sizes, disperse after first approaching the equilibrium
//! (step-size selection is deliberately out of scope).

use crate::ess::payoff_matrix_at;
use crate::game::{Action, CostModel, GameParams, State};
use crate::math::{snr_from_uniform, thresholds_from_state};
use crate::replicator::{replicator_step, EXTINCTION_FLOOR};
use crate::rng::{Lane, SlotRng};
use crate::sim::{decode_block, SimConfig, SlotOutcome, UserOutcome};
use crate::{Error, Result};
use serde::Serialize;
use std::io::Write;

/// Cost scaling factor per block index (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CostSchedule {
    Constant(f64),
    /// c\[b\] = base + slope·b, evaluated at the start of block b.
    Ramp { base: f64, slope: f64 },
}

/// Block structure of a protocol run: B slots per state update, the number
/// of updates, and the cost-scale schedule. The schedule's value is the
/// cost scale in force during a block; it replaces the scale carried by the
/// parameter set (which must still use the SNR-scaled model).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockSchedule {
    pub slots_per_block: usize,
    pub num_blocks: usize,
    pub cost: CostSchedule,
}

impl BlockSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.slots_per_block == 0 || self.num_blocks == 0 {
            return Err(Error::InvalidParameter("schedule needs B >= 1 and at least one block".into()));
        }
        for b in [1, self.num_blocks] {
            if !(self.scale_at(b) > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "cost scale must stay positive, c[{b}] = {}",
                    self.scale_at(b)
                )));
            }
        }
        Ok(())
    }

    /// Scaling factor for 1-based block index `b`.
    pub fn scale_at(&self, b: usize) -> f64 {
        match self.cost {
            CostSchedule::Constant(c) => c,
            CostSchedule::Ramp { base, slope } => base + slope * b as f64,
        }
    }
}

/// Reward estimator variants for SU-BS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RewardMode {
    /// Success rate of action-i transmissions: R·(successes_i / attempts_i),
    /// carrying the previous slot's value when nothing was attempted. This
    /// estimates the conditional success probability entering the payoff,
    /// and is the mode the protocols use.
    Conditional,
    /// Decoded-signal count normalized by the population size:
    /// R̂_i = (R / 2M)·Σ_m Y_m(i), the average action-i successes per user.
    /// Understates the conditional success probability by a factor of x_i,
    /// so the protocol fixed point shifts; kept as a diagnostic.
    PopulationAverage,
}

/// One slot's reward estimates from the outcomes of all M blocks.
pub fn estimate_reward(
    outcomes: &[SlotOutcome],
    reward: f64,
    mode: RewardMode,
    prev: [f64; 2],
) -> [f64; 2] {
    let mut attempts = [0u64; 2];
    let mut successes = [0u64; 2];
    for o in outcomes {
        for u in &o.users {
            if u.action != Action::Idle {
                let i = u.action.index();
                attempts[i] += 1;
                if u.success {
                    successes[i] += 1;
                }
            }
        }
    }
    match mode {
        RewardMode::PopulationAverage => {
            let norm = reward / (2.0 * outcomes.len() as f64);
            [norm * successes[0] as f64, norm * successes[1] as f64]
        }
        RewardMode::Conditional => {
            let mut out = prev;
            for i in 0..2 {
                if attempts[i] > 0 {
                    out[i] = reward * successes[i] as f64 / attempts[i] as f64;
                }
            }
            out
        }
    }
}

/// Fairness scaling of the cost factor: c_k = c_ref·(γ̄_k / γ̄_ref). With this
/// scaling the average costs lose their 1/γ̄ dependence, so users at different
/// average SNRs share the same equilibrium state.
pub fn fairness_scale(user_avg_snr: f64, c_ref: f64, ref_avg_snr: f64) -> f64 {
    c_ref * user_avg_snr / ref_avg_snr
}

/// Per-user protocol state.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct UserState {
    pub state: State,
    pub cost_scale: f64,
}

/// Protocol options.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    /// SU-BS reward estimator variant.
    pub estimator: RewardMode,
    /// Replace all estimates with analytic payoffs: the protocol then
    /// reproduces the plain replicator iteration exactly.
    pub exact_payoffs: bool,
    /// Scale each user's cost factor with its average SNR.
    pub fairness: bool,
    /// Retain the full per-user state history (SU-U only).
    pub record_user_states: bool,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            estimator: RewardMode::Conditional,
            exact_payoffs: false,
            fairness: false,
            record_user_states: false,
        }
    }
}

/// One protocol block as recorded in a run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BlockRecord {
    /// 1-based block index.
    pub block: usize,
    /// Shared state (SU-BS) or mean user state (SU-U) after the update.
    pub state: State,
    pub cost_scale: f64,
    /// Estimated payoffs of the transmit actions used in the update
    /// (mean over users for SU-U).
    pub est_payoff: [f64; 2],
}

/// A recorded protocol run.
#[derive(Debug, Clone, Serialize)]
pub struct AdaptiveRun {
    pub records: Vec<BlockRecord>,
    pub step_size: f64,
    /// Collapse notes: which state components hit zero and when.
    pub flags: Vec<String>,
    /// Per-block standard deviation of user states (SU-U only).
    pub dispersion: Option<Vec<[f64; 3]>>,
    /// Full per-user history, block-major (SU-U with `record_user_states`).
    pub user_states: Option<Vec<Vec<State>>>,
}

impl AdaptiveRun {
    pub fn final_state(&self) -> State {
        self.records.last().expect("run holds at least one block").state
    }

    /// Component-wise mean of the last `n` block states.
    pub fn tail_mean(&self, n: usize) -> [f64; 3] {
        let take = n.min(self.records.len());
        let mut acc = [0.0; 3];
        for r in &self.records[self.records.len() - take..] {
            let a = r.state.as_array();
            for i in 0..3 {
                acc[i] += a[i];
            }
        }
        acc.map(|v| v / take as f64)
    }

    /// CSV rows `block,x1,x2,x3,c,est_payoff1,est_payoff2`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "block,x1,x2,x3,c,est_payoff1,est_payoff2")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.block,
                r.state.x1(),
                r.state.x2(),
                r.state.x3(),
                r.cost_scale,
                r.est_payoff[0],
                r.est_payoff[1]
            )?;
        }
        Ok(())
    }
}

// Guarded replicator update from estimated payoffs of the transmit actions
// (idle payoff is zero under the cost normalization). Mirrors
// replicator_step's clamp and extinction handling.
fn estimated_step(x: &State, est: [f64; 2], step_size: f64) -> Result<State> {
    let u = [est[0], est[1], 0.0];
    let own: f64 = (0..3).map(|i| x.as_array()[i] * u[i]).sum();
    let mut next = [0.0; 3];
    for i in 0..3 {
        let xi = x.as_array()[i];
        next[i] = xi + step_size * xi * (u[i] - own);
        if next[i] < EXTINCTION_FLOOR {
            next[i] = 0.0;
        }
    }
    State::normalized(next[0], next[1], next[2])
}

fn snr_cost_scale(params: &GameParams) -> Result<f64> {
    match params.cost {
        CostModel::SnrScaled { c } => Ok(c),
        CostModel::Fixed { .. } => Err(Error::InvalidParameter(
            "the state-updating protocols estimate SNR-dependent costs; use the SNR-scaled model"
                .into(),
        )),
    }
}

// The protocols take their slot count from the schedule, so `cfg.slots` is
// not consulted here.
fn validate_protocol_inputs(
    cfg: &SimConfig,
    sched: &BlockSchedule,
    params: &GameParams,
    step_size: f64,
    x0: &State,
) -> Result<()> {
    if cfg.blocks == 0 {
        return Err(Error::InvalidParameter("need at least one block".into()));
    }
    if !(cfg.packet_prob > 0.0 && cfg.packet_prob <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "packet probability must be in (0, 1], got {}",
            cfg.packet_prob
        )));
    }
    cfg.snr.validate(cfg.blocks)?;
    sched.validate()?;
    snr_cost_scale(params)?;
    if !(step_size > 0.0) {
        return Err(Error::InvalidParameter(format!("step size must be > 0, got {step_size}")));
    }
    if !x0.is_interior() {
        return Err(Error::InvalidParameter(
            "initial state must be interior: extinct actions can never re-enter".into(),
        ));
    }
    Ok(())
}

fn note_collapse(flags: &mut Vec<String>, seen: &mut [bool; 3], x: &State, block: usize, who: &str) {
    for (i, &v) in x.as_array().iter().enumerate() {
        if v == 0.0 && !seen[i] {
            seen[i] = true;
            flags.push(format!("{who} x{} pinned at 0 at block {block}", i + 1));
        }
    }
}

// Exact-payoff run shared by both protocols: the estimator noise is removed,
// so SU-BS and every SU-U user reduce to the plain replicator iteration.
fn exact_run(
    sched: &BlockSchedule,
    params: &GameParams,
    step_size: f64,
    x0: &State,
    su_u_shape: bool,
    record_user_states: bool,
    population: usize,
) -> Result<AdaptiveRun> {
    let mut x = *x0;
    let mut records = Vec::with_capacity(sched.num_blocks);
    let mut flags = Vec::new();
    let mut seen = [false; 3];
    let mut dispersion = su_u_shape.then(Vec::new);
    let mut user_states = (su_u_shape && record_user_states).then(Vec::new);
    for b in 1..=sched.num_blocks {
        let c_b = sched.scale_at(b);
        let params_b = params.with_cost_scale(c_b)?;
        let payoffs = payoff_matrix_at(&x, &params_b)?;
        let est = [
            payoffs.pure_payoff(Action::High, &x),
            payoffs.pure_payoff(Action::Low, &x),
        ];
        x = replicator_step(&x, &params_b, step_size)?;
        note_collapse(&mut flags, &mut seen, &x, b, "state");
        records.push(BlockRecord { block: b, state: x, cost_scale: c_b, est_payoff: est });
        if let Some(d) = dispersion.as_mut() {
            d.push([0.0; 3]);
        }
        if let Some(h) = user_states.as_mut() {
            h.push(vec![x; population]);
        }
    }
    Ok(AdaptiveRun { records, step_size, flags, dispersion, user_states })
}

/// State updating at the base station.
///
/// Each block simulates B slots of the whole system at the current shared
/// state (channel-driven through the state/threshold map), estimates the
/// per-action rewards from decode outcomes pooled over all M blocks and the
/// per-action costs from block-averaged user reports (users with no
/// action-i slot re-report their previous value), applies one replicator
/// update with the estimated payoffs, and broadcasts the new state.
pub fn su_bs_run(
    cfg: &SimConfig,
    sched: &BlockSchedule,
    params: &GameParams,
    step_size: f64,
    x0: &State,
    opts: &AdaptiveOptions,
) -> Result<AdaptiveRun> {
    validate_protocol_inputs(cfg, sched, params, step_size, x0)?;
    if opts.exact_payoffs {
        return exact_run(sched, params, step_size, x0, false, false, 2 * cfg.blocks);
    }
    let m = cfg.blocks;
    let users = 2 * m;
    let b_slots = sched.slots_per_block;

    // per-user cost factor, optionally SNR-proportional for fairness
    let user_scale: Vec<f64> = (0..users)
        .map(|k| {
            if opts.fairness {
                fairness_scale(cfg.snr.for_user(k / 2, k % 2), 1.0, params.avg_snr)
            } else {
                1.0
            }
        })
        .collect();

    let mut x = *x0;
    let mut records = Vec::with_capacity(sched.num_blocks);
    let mut flags = Vec::new();
    let mut seen = [false; 3];
    let mut prev_rhat = [0.0f64; 2];
    let mut last_report: Vec<[Option<f64>; 2]> = vec![[None; 2]; users];
    let mut bs_cost = [0.0f64; 2];
    let mut outcomes: Vec<SlotOutcome> = Vec::with_capacity(m);

    for b in 1..=sched.num_blocks {
        let c_b = sched.scale_at(b);
        // per-user thresholds realizing the shared state at each user's SNR
        let thresholds: Vec<_> = (0..users)
            .map(|k| thresholds_from_state(&x, cfg.snr.for_user(k / 2, k % 2)))
            .collect::<Result<Vec<_>>>()?;

        let mut rhat_sum = [0.0f64; 2];
        let mut cost_sum = vec![[0.0f64; 2]; users];
        let mut cost_cnt = vec![[0u32; 2]; users];

        for t in 0..b_slots {
            let slot = ((b - 1) * b_slots + t) as u64;
            outcomes.clear();
            for block in 0..m {
                let mut us = [UserOutcome {
                    action: Action::Idle,
                    snr: 0.0,
                    power: 0.0,
                    success: false,
                }; 2];
                for (j, u) in us.iter_mut().enumerate() {
                    let k = 2 * block + j;
                    let stream = SlotRng::keyed(cfg.seed, block as u64, j as u64);
                    if cfg.packet_prob < 1.0
                        && stream.uniform_at(slot, Lane::Traffic) > cfg.packet_prob
                    {
                        continue;
                    }
                    let gbar = cfg.snr.for_user(block, j);
                    let snr = snr_from_uniform(gbar, stream.uniform_at(slot, Lane::Channel));
                    let (action, power) =
                        crate::sim::decide_action(snr, &thresholds[k], params.rho_high, params.rho_low);
                    u.action = action;
                    u.snr = snr;
                    u.power = power;
                }
                let (s0, s1) = decode_block(us[0].action, us[1].action);
                us[0].success = s0;
                us[1].success = s1;
                for (j, u) in us.iter().enumerate() {
                    if u.action != Action::Idle {
                        let k = 2 * block + j;
                        let i = u.action.index();
                        cost_sum[k][i] += c_b * user_scale[k] * u.power;
                        cost_cnt[k][i] += 1;
                    }
                }
                outcomes.push(SlotOutcome {
                    slot: slot as usize,
                    block,
                    users: us,
                    decoded: s0 as u8 + s1 as u8,
                });
            }
            let rhat = estimate_reward(&outcomes, params.reward, opts.estimator, prev_rhat);
            prev_rhat = rhat;
            rhat_sum[0] += rhat[0];
            rhat_sum[1] += rhat[1];
        }

        // block-averaged user cost reports with carry-over, pooled at the BS
        let mut report_sum = [0.0f64; 2];
        let mut report_cnt = [0u32; 2];
        for k in 0..users {
            for i in 0..2 {
                let report = if cost_cnt[k][i] > 0 {
                    let v = cost_sum[k][i] / cost_cnt[k][i] as f64;
                    last_report[k][i] = Some(v);
                    Some(v)
                } else {
                    last_report[k][i]
                };
                if let Some(v) = report {
                    report_sum[i] += v;
                    report_cnt[i] += 1;
                }
            }
        }
        for i in 0..2 {
            if report_cnt[i] > 0 {
                bs_cost[i] = report_sum[i] / report_cnt[i] as f64;
            }
        }

        let est = [
            rhat_sum[0] / b_slots as f64 - bs_cost[0],
            rhat_sum[1] / b_slots as f64 - bs_cost[1],
        ];
        x = estimated_step(&x, est, step_size)?;
        note_collapse(&mut flags, &mut seen, &x, b, "state");
        records.push(BlockRecord { block: b, state: x, cost_scale: c_b, est_payoff: est });
    }
    Ok(AdaptiveRun { records, step_size, flags, dispersion: None, user_states: None })
}

/// State updating at the users.
///
/// Every user keeps its own state and updates it once per block from the
/// feedback it can observe locally: the ACK/NACK of its own transmissions
/// (carrying the latest value through slots where an action was not played)
/// and its own realized transmit costs. The reported trajectory is the
/// average over all 2M user states; per-block dispersion across users is
/// retained as a diagnostic.
pub fn su_u_run(
    cfg: &SimConfig,
    sched: &BlockSchedule,
    params: &GameParams,
    step_size: f64,
    x0: &State,
    opts: &AdaptiveOptions,
) -> Result<AdaptiveRun> {
    validate_protocol_inputs(cfg, sched, params, step_size, x0)?;
    if opts.exact_payoffs {
        return exact_run(
            sched,
            params,
            step_size,
            x0,
            true,
            opts.record_user_states,
            2 * cfg.blocks,
        );
    }
    let m = cfg.blocks;
    let users = 2 * m;
    let b_slots = sched.slots_per_block;
    let nb = sched.num_blocks;

    let user_scale: Vec<f64> = (0..users)
        .map(|k| {
            if opts.fairness {
                fairness_scale(cfg.snr.for_user(k / 2, k % 2), 1.0, params.avg_snr)
            } else {
                1.0
            }
        })
        .collect();

    let mut states: Vec<State> = vec![*x0; users];
    let mut last_rhat: Vec<[f64; 2]> = vec![[0.0; 2]; users];
    let mut last_cost: Vec<[Option<f64>; 2]> = vec![[None; 2]; users];

    let mut records = Vec::with_capacity(nb);
    let mut flags = Vec::new();
    let mut seen = [false; 3];
    let mut dispersion = Vec::with_capacity(nb);
    let mut history = opts.record_user_states.then(|| Vec::with_capacity(nb));

    for b in 1..=nb {
        let c_b = sched.scale_at(b);
        let thresholds: Vec<_> = (0..users)
            .map(|k| thresholds_from_state(&states[k], cfg.snr.for_user(k / 2, k % 2)))
            .collect::<Result<Vec<_>>>()?;

        let mut rhat_sum = vec![[0.0f64; 2]; users];
        let mut cost_sum = vec![[0.0f64; 2]; users];
        let mut cost_cnt = vec![[0u32; 2]; users];

        for t in 0..b_slots {
            let slot = ((b - 1) * b_slots + t) as u64;
            for block in 0..m {
                let mut acts = [Action::Idle; 2];
                let mut powers = [0.0f64; 2];
                for j in 0..2 {
                    let k = 2 * block + j;
                    let stream = SlotRng::keyed(cfg.seed, block as u64, j as u64);
                    if cfg.packet_prob < 1.0
                        && stream.uniform_at(slot, Lane::Traffic) > cfg.packet_prob
                    {
                        continue;
                    }
                    let gbar = cfg.snr.for_user(block, j);
                    let snr = snr_from_uniform(gbar, stream.uniform_at(slot, Lane::Channel));
                    let (action, power) =
                        crate::sim::decide_action(snr, &thresholds[k], params.rho_high, params.rho_low);
                    acts[j] = action;
                    powers[j] = power;
                }
                let (s0, s1) = decode_block(acts[0], acts[1]);
                for (j, ok) in [s0, s1].into_iter().enumerate() {
                    let k = 2 * block + j;
                    if acts[j] != Action::Idle {
                        let i = acts[j].index();
                        last_rhat[k][i] = params.reward * ok as u8 as f64;
                        cost_sum[k][i] += c_b * user_scale[k] * powers[j];
                        cost_cnt[k][i] += 1;
                    }
                    rhat_sum[k][0] += last_rhat[k][0];
                    rhat_sum[k][1] += last_rhat[k][1];
                }
            }
        }

        // per-user updates
        let mut mean = [0.0f64; 3];
        let mut mean_sq = [0.0f64; 3];
        let mut est_mean = [0.0f64; 2];
        for k in 0..users {
            let mut est = [0.0f64; 2];
            for i in 0..2 {
                let cost = if cost_cnt[k][i] > 0 {
                    let v = cost_sum[k][i] / cost_cnt[k][i] as f64;
                    last_cost[k][i] = Some(v);
                    v
                } else {
                    last_cost[k][i].unwrap_or(0.0)
                };
                est[i] = rhat_sum[k][i] / b_slots as f64 - cost;
            }
            states[k] = estimated_step(&states[k], est, step_size)?;
            note_collapse(&mut flags, &mut seen, &states[k], b, &format!("user {k}"));
            let a = states[k].as_array();
            for i in 0..3 {
                mean[i] += a[i];
                mean_sq[i] += a[i] * a[i];
            }
            est_mean[0] += est[0];
            est_mean[1] += est[1];
        }
        let n = users as f64;
        let mean_state = State::normalized(mean[0] / n, mean[1] / n, mean[2] / n)?;
        let mut sd = [0.0f64; 3];
        for i in 0..3 {
            sd[i] = (mean_sq[i] / n - (mean[i] / n) * (mean[i] / n)).max(0.0).sqrt();
        }
        dispersion.push(sd);
        if let Some(h) = history.as_mut() {
            h.push(states.clone());
        }
        records.push(BlockRecord {
            block: b,
            state: mean_state,
            cost_scale: c_b,
            est_payoff: [est_mean[0] / n, est_mean[1] / n],
        });
    }
    Ok(AdaptiveRun {
        records,
        step_size,
        flags,
        dispersion: Some(dispersion),
        user_states: history,
    })
}
