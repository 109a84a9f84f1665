//! Slot-level Monte-Carlo simulator: M resource blocks × 2 users under
//! Rayleigh block fading, truncated channel-inversion power control, and SIC
//! decoding.
//!
//! Every random draw is addressed by (seed, block, user, slot, lane), so a
//! run is reproducible bit-for-bit regardless of how blocks are partitioned
//! across workers.

use crate::game::{Action, GameParams, State};
use crate::math::{snr_from_uniform, state_from_thresholds, thresholds_from_state, Thresholds};
use crate::rng::{Lane, SlotRng};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

/// How per-slot actions are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Actions sampled i.i.d. from a state; no channel draws.
    StateDriven,
    /// SNRs sampled, actions from the threshold policy.
    ChannelDriven,
}

/// Average channel SNR across the 2M users.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SnrProfile {
    Uniform(f64),
    /// One entry per user, indexed 2·block + user_in_block; length 2M.
    PerUser(Vec<f64>),
}

impl SnrProfile {
    pub fn for_user(&self, block: usize, user_in_block: usize) -> f64 {
        match self {
            SnrProfile::Uniform(g) => *g,
            SnrProfile::PerUser(v) => v[2 * block + user_in_block],
        }
    }

    pub(crate) fn validate(&self, blocks: usize) -> Result<()> {
        match self {
            SnrProfile::Uniform(g) if *g > 0.0 => Ok(()),
            SnrProfile::Uniform(g) => {
                Err(Error::InvalidParameter(format!("avg SNR must be > 0, got {g}")))
            }
            SnrProfile::PerUser(v) => {
                if v.len() != 2 * blocks {
                    return Err(Error::InvalidParameter(format!(
                        "per-user SNR profile has {} entries, expected {}",
                        v.len(),
                        2 * blocks
                    )));
                }
                if v.iter().any(|g| !(*g > 0.0)) {
                    return Err(Error::InvalidParameter("per-user SNRs must be > 0".into()));
                }
                Ok(())
            }
        }
    }
}

/// Simulation shape: M blocks, slot count, channel statistics, action mode,
/// seed, and the Bernoulli packet-arrival probability (1 = always backlogged).
#[derive(Debug, Clone, Serialize)]
pub struct SimConfig {
    pub blocks: usize,
    pub slots: usize,
    pub snr: SnrProfile,
    pub mode: Mode,
    pub seed: u64,
    pub packet_prob: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 {
            return Err(Error::InvalidParameter("need at least one block".into()));
        }
        if self.slots == 0 {
            return Err(Error::InvalidParameter("need at least one slot".into()));
        }
        if !(self.packet_prob > 0.0 && self.packet_prob <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "packet probability must be in (0, 1], got {}",
                self.packet_prob
            )));
        }
        self.snr.validate(self.blocks)
    }
}

/// The policy users follow, given either as action probabilities or as
/// inversion thresholds; the simulator reconciles it with the drive mode
/// through the state/threshold bijection at each user's average SNR.
#[derive(Debug, Clone)]
pub enum Policy {
    Mixed(State),
    Thresholds(Thresholds),
}

/// Outcome of one user in one block-slot.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct UserOutcome {
    pub action: Action,
    /// Instantaneous SNR (0 in state-driven mode).
    pub snr: f64,
    /// Transmit power rho_i / snr (0 when idle or state-driven).
    pub power: f64,
    pub success: bool,
}

/// Outcome of one block in one slot.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlotOutcome {
    pub slot: usize,
    pub block: usize,
    pub users: [UserOutcome; 2],
    /// Number of successfully decoded signals, 0..=2.
    pub decoded: u8,
}

/// Aggregated run statistics. Rates carry binomial standard errors so
/// acceptance tolerances can be stated in standard-error units.
#[derive(Debug, Clone, Serialize)]
pub struct SimStats {
    pub blocks: usize,
    pub slots: usize,
    pub mode: Mode,
    pub seed: u64,
    /// Counts over user-slots by action index.
    pub action_counts: [u64; 3],
    /// Successful decodes by action index (idle never succeeds).
    pub success_counts: [u64; 3],
    pub action_freq: [f64; 3],
    pub action_freq_se: [f64; 3],
    /// Success rate given the action was attempted, per transmit action.
    pub success_rate: [f64; 2],
    pub success_rate_se: [f64; 2],
    /// Successes per user per slot.
    pub throughput_per_user: f64,
    pub throughput_se: f64,
    /// Mean transmit power per transmit action (channel-driven only).
    pub mean_power: [Option<f64>; 2],
    /// Largest transmit power observed (channel-driven only).
    pub max_power: Option<f64>,
    /// Set when the policy has tau = 0: transmit power is unbounded under
    /// deep fades.
    pub power_unbounded: bool,
    /// Histogram of per-block decoded counts Y in {0, 1, 2}.
    pub y_histogram: [u64; 3],
}

#[derive(Default, Clone)]
struct BlockTally {
    action_counts: [u64; 3],
    success_counts: [u64; 3],
    power_sum: [f64; 2],
    max_power: f64,
    y_histogram: [u64; 3],
}

impl BlockTally {
    fn absorb(&mut self, other: &BlockTally) {
        for i in 0..3 {
            self.action_counts[i] += other.action_counts[i];
            self.success_counts[i] += other.success_counts[i];
            self.y_histogram[i] += other.y_histogram[i];
        }
        for i in 0..2 {
            self.power_sum[i] += other.power_sum[i];
        }
        self.max_power = self.max_power.max(other.max_power);
    }
}

/// Applies the threshold policy to an instantaneous SNR, returning the action
/// and its transmit power (rho_i / snr, or 0 when idle). Boundaries follow
/// the closed upper intervals: γ = tau idles, γ = tau_pn transmits low.
pub fn decide_action(snr: f64, t: &Thresholds, rho_high: f64, rho_low: f64) -> (Action, f64) {
    if snr > t.tau_pn() {
        (Action::High, rho_high / snr)
    } else if snr > t.tau() {
        (Action::Low, rho_low / snr)
    } else {
        (Action::Idle, 0.0)
    }
}

/// SIC decode rule for a two-user block: a transmission succeeds exactly when
/// the peer used a different action (distinct levels decode jointly; a lone
/// transmitter always decodes; equal levels collide).
pub fn decode_block(a1: Action, a2: Action) -> (bool, bool) {
    let s1 = a1 != Action::Idle && a1 != a2;
    let s2 = a2 != Action::Idle && a2 != a1;
    (s1, s2)
}

/// Bandwidth efficiencies (users per unit bandwidth × channel usage) of OMA
/// and hybrid NOMA at packet-arrival probability `alpha`:
/// e_o = αM/F and e_h = (2α(1−α) + α²/2)·2M/F.
pub fn efficiency(blocks: usize, bandwidth: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must be in (0, 1], got {alpha}")));
    }
    if !(bandwidth > 0.0) || blocks == 0 {
        return Err(Error::InvalidParameter("need blocks >= 1 and bandwidth > 0".into()));
    }
    let m = blocks as f64;
    let e_o = alpha * m / bandwidth;
    let e_h = (2.0 * alpha * (1.0 - alpha) + 0.5 * alpha * alpha) * 2.0 * m / bandwidth;
    Ok((e_o, e_h))
}

// Per-user policy resolved against the drive mode.
#[derive(Clone)]
enum Resolved {
    State(State),
    Thresholds(Thresholds),
}

fn resolve_policy(
    cfg: &SimConfig,
    policy: &Policy,
    block: usize,
    user: usize,
) -> Result<Resolved> {
    let gbar = cfg.snr.for_user(block, user);
    Ok(match (cfg.mode, policy) {
        (Mode::StateDriven, Policy::Mixed(x)) => Resolved::State(*x),
        (Mode::StateDriven, Policy::Thresholds(t)) => {
            Resolved::State(state_from_thresholds(t, gbar)?)
        }
        (Mode::ChannelDriven, Policy::Thresholds(t)) => Resolved::Thresholds(*t),
        (Mode::ChannelDriven, Policy::Mixed(x)) => {
            Resolved::Thresholds(thresholds_from_state(x, gbar)?)
        }
    })
}

fn user_outcome(
    cfg: &SimConfig,
    params: &GameParams,
    resolved: &Resolved,
    block: usize,
    user: usize,
    slot: usize,
) -> UserOutcome {
    let stream = SlotRng::keyed(cfg.seed, block as u64, user as u64);
    if cfg.packet_prob < 1.0 {
        let arrival = stream.uniform_at(slot as u64, Lane::Traffic);
        if arrival > cfg.packet_prob {
            return UserOutcome { action: Action::Idle, snr: 0.0, power: 0.0, success: false };
        }
    }
    match resolved {
        Resolved::State(x) => {
            let u = stream.uniform_at(slot as u64, Lane::Action);
            let action = if u <= x.x1() {
                Action::High
            } else if u <= x.x1() + x.x2() {
                Action::Low
            } else {
                Action::Idle
            };
            UserOutcome { action, snr: 0.0, power: 0.0, success: false }
        }
        Resolved::Thresholds(t) => {
            let gbar = cfg.snr.for_user(block, user);
            let snr = snr_from_uniform(gbar, stream.uniform_at(slot as u64, Lane::Channel));
            let (action, power) = decide_action(snr, t, params.rho_high, params.rho_low);
            UserOutcome { action, snr, power, success: false }
        }
    }
}

fn block_slot_outcome(
    cfg: &SimConfig,
    params: &GameParams,
    resolved: &[Resolved; 2],
    block: usize,
    slot: usize,
) -> SlotOutcome {
    let mut u0 = user_outcome(cfg, params, &resolved[0], block, 0, slot);
    let mut u1 = user_outcome(cfg, params, &resolved[1], block, 1, slot);
    let (s0, s1) = decode_block(u0.action, u1.action);
    u0.success = s0;
    u1.success = s1;
    SlotOutcome { slot, block, users: [u0, u1], decoded: s0 as u8 + s1 as u8 }
}

fn tally_block(cfg: &SimConfig, params: &GameParams, policy: &Policy, block: usize) -> Result<BlockTally> {
    let resolved = [
        resolve_policy(cfg, policy, block, 0)?,
        resolve_policy(cfg, policy, block, 1)?,
    ];
    let mut tally = BlockTally::default();
    for slot in 0..cfg.slots {
        let out = block_slot_outcome(cfg, params, &resolved, block, slot);
        tally.y_histogram[out.decoded as usize] += 1;
        for u in &out.users {
            let i = u.action.index();
            tally.action_counts[i] += 1;
            if u.success {
                tally.success_counts[i] += 1;
            }
            if u.action != Action::Idle {
                tally.power_sum[i] += u.power;
                tally.max_power = tally.max_power.max(u.power);
            }
        }
    }
    Ok(tally)
}

/// Runs the simulation and aggregates statistics.
///
/// Blocks are simulated in parallel; per-block tallies are reduced in block
/// order, so the result is identical for any worker count.
pub fn run_sim(cfg: &SimConfig, policy: &Policy, params: &GameParams) -> Result<SimStats> {
    cfg.validate()?;
    let tallies: Vec<Result<BlockTally>> = (0..cfg.blocks)
        .into_par_iter()
        .map(|b| tally_block(cfg, params, policy, b))
        .collect();
    let mut total = BlockTally::default();
    for t in tallies {
        total.absorb(&t?);
    }
    Ok(finish_stats(cfg, policy, total))
}

/// Like [`run_sim`] but additionally streams every block-slot outcome to
/// `sink` (block-major, slot-minor order). Runs sequentially.
pub fn run_sim_traced<F>(
    cfg: &SimConfig,
    policy: &Policy,
    params: &GameParams,
    mut sink: F,
) -> Result<SimStats>
where
    F: FnMut(&SlotOutcome),
{
    cfg.validate()?;
    let mut total = BlockTally::default();
    for block in 0..cfg.blocks {
        let resolved = [
            resolve_policy(cfg, policy, block, 0)?,
            resolve_policy(cfg, policy, block, 1)?,
        ];
        let mut tally = BlockTally::default();
        for slot in 0..cfg.slots {
            let out = block_slot_outcome(cfg, params, &resolved, block, slot);
            sink(&out);
            tally.y_histogram[out.decoded as usize] += 1;
            for u in &out.users {
                let i = u.action.index();
                tally.action_counts[i] += 1;
                if u.success {
                    tally.success_counts[i] += 1;
                }
                if u.action != Action::Idle {
                    tally.power_sum[i] += u.power;
                    tally.max_power = tally.max_power.max(u.power);
                }
            }
        }
        total.absorb(&tally);
    }
    Ok(finish_stats(cfg, policy, total))
}

fn finish_stats(cfg: &SimConfig, policy: &Policy, tally: BlockTally) -> SimStats {
    let user_slots = (2 * cfg.blocks * cfg.slots) as f64;
    let binom_se = |p: f64, n: f64| if n > 0.0 { (p * (1.0 - p) / n).sqrt() } else { 0.0 };

    let mut action_freq = [0.0; 3];
    let mut action_freq_se = [0.0; 3];
    for i in 0..3 {
        action_freq[i] = tally.action_counts[i] as f64 / user_slots;
        action_freq_se[i] = binom_se(action_freq[i], user_slots);
    }
    let mut success_rate = [0.0; 2];
    let mut success_rate_se = [0.0; 2];
    for i in 0..2 {
        let n = tally.action_counts[i] as f64;
        if n > 0.0 {
            success_rate[i] = tally.success_counts[i] as f64 / n;
            success_rate_se[i] = binom_se(success_rate[i], n);
        }
    }
    let successes = (tally.success_counts[0] + tally.success_counts[1]) as f64;
    let throughput = successes / user_slots;

    let channel_driven = cfg.mode == Mode::ChannelDriven;
    let mut mean_power = [None; 2];
    if channel_driven {
        for (i, slot) in mean_power.iter_mut().enumerate() {
            if tally.action_counts[i] > 0 {
                *slot = Some(tally.power_sum[i] / tally.action_counts[i] as f64);
            }
        }
    }
    let power_unbounded = channel_driven
        && match policy {
            Policy::Thresholds(t) => t.tau() == 0.0,
            Policy::Mixed(x) => x.x3() <= 0.0,
        };

    SimStats {
        blocks: cfg.blocks,
        slots: cfg.slots,
        mode: cfg.mode,
        seed: cfg.seed,
        action_counts: tally.action_counts,
        success_counts: tally.success_counts,
        action_freq,
        action_freq_se,
        success_rate,
        success_rate_se,
        throughput_per_user: throughput,
        throughput_se: binom_se(throughput, user_slots),
        mean_power,
        max_power: channel_driven.then_some(tally.max_power),
        power_unbounded,
        y_histogram: tally.y_histogram,
    }
}
