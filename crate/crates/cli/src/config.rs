//! Experiment configuration: JSON schemas, unit handling, and validation.
//!
//! Configs are flat JSON objects. SNR-like quantities accept either a `_db`
//! or a `_linear` key (exactly one); conversion to linear happens here and
//! nowhere else. Unknown keys are rejected per command.

use anyhow::{bail, Context, Result};
use hnoma_core::adaptive::{BlockSchedule, CostSchedule, RewardMode};
use hnoma_core::game::{CostModel, GameParams, State};
use hnoma_core::math::Thresholds;
use hnoma_core::sim::{Mode, SimConfig, SnrProfile};
use serde::Deserialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

/// Raw config file with its provenance hash.
pub struct LoadedConfig {
    pub value: Value,
    pub sha256: String,
}

pub fn load(path: &Path) -> Result<LoadedConfig> {
    let bytes = fs::read(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let value: Value = serde_json::from_slice(&bytes)
        .with_context(|| format!("config {} is not valid JSON", path.display()))?;
    if !value.is_object() {
        bail!("config {} must be a JSON object", path.display());
    }
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(LoadedConfig { value, sha256: format!("{:x}", hasher.finalize()) })
}

/// Rejects keys outside the command's schema.
pub fn check_keys(value: &Value, allowed: &[&str]) -> Result<()> {
    let set: BTreeSet<&str> = allowed.iter().copied().collect();
    let obj = value.as_object().expect("checked on load");
    for key in obj.keys() {
        if !set.contains(key.as_str()) {
            bail!(
                "unknown config key {key:?}; allowed keys: {}",
                allowed.join(", ")
            );
        }
    }
    Ok(())
}

pub const PARAM_KEYS: [&str; 9] = [
    "R", "c", "C1", "C2", "C3", "gamma_db", "gamma_linear", "gbar_db", "gbar_linear",
];

#[derive(Debug, Deserialize)]
pub struct ParamsConfig {
    #[serde(rename = "R")]
    pub reward: f64,
    pub c: Option<f64>,
    #[serde(rename = "C1")]
    pub c1: Option<f64>,
    #[serde(rename = "C2")]
    pub c2: Option<f64>,
    #[serde(rename = "C3")]
    pub c3: Option<f64>,
    pub gamma_db: Option<f64>,
    pub gamma_linear: Option<f64>,
    pub gbar_db: Option<f64>,
    pub gbar_linear: Option<f64>,
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn one_of(name: &str, db: Option<f64>, linear: Option<f64>) -> Result<f64> {
    match (db, linear) {
        (Some(v), None) => Ok(db_to_linear(v)),
        (None, Some(v)) => Ok(v),
        (Some(_), Some(_)) => bail!("give exactly one of {name}_db and {name}_linear, not both"),
        (None, None) => bail!("missing {name}_db or {name}_linear"),
    }
}

impl ParamsConfig {
    pub fn build(&self) -> Result<GameParams> {
        let gamma = one_of("gamma", self.gamma_db, self.gamma_linear)?;
        let gbar = one_of("gbar", self.gbar_db, self.gbar_linear)?;
        let cost = match (self.c, self.c1, self.c2) {
            (Some(c), None, None) => {
                if self.c3.is_some() {
                    bail!("C3 applies to the fixed-cost model, not the scaled one");
                }
                CostModel::SnrScaled { c }
            }
            (None, Some(c1), Some(c2)) => {
                CostModel::Fixed { c1, c2, c3: self.c3.unwrap_or(0.0) }
            }
            (None, None, None) => bail!("missing cost model: give c, or C1 and C2"),
            _ => bail!("give either c (scaled costs) or C1 and C2 (fixed costs), not a mix"),
        };
        GameParams::from_sinr_threshold(self.reward, gamma, gbar, cost)
            .map_err(anyhow::Error::from)
    }
}

pub fn parse_params(value: &Value) -> Result<ParamsConfig> {
    Ok(serde_json::from_value(value.clone())?)
}

#[derive(Debug, Deserialize)]
pub struct ReplicatorConfig {
    pub x0: [f64; 3],
    pub mu: Option<f64>,
    pub max_iters: Option<usize>,
    pub drift_tol: Option<f64>,
}

pub const REPLICATOR_KEYS: [&str; 4] = ["x0", "mu", "max_iters", "drift_tol"];

#[derive(Debug, Deserialize)]
pub struct ThresholdsConfig {
    pub tau: f64,
    /// Absent or null means +infinity (high power disabled).
    pub tau_pn: Option<f64>,
}

impl ThresholdsConfig {
    pub fn build(&self) -> Result<Thresholds> {
        Ok(Thresholds::new(self.tau, self.tau_pn.unwrap_or(f64::INFINITY))?)
    }
}

#[derive(Debug, Deserialize)]
pub struct PolicyConfig {
    pub state: Option<[f64; 3]>,
    pub thresholds: Option<ThresholdsConfig>,
}

impl PolicyConfig {
    pub fn build(&self) -> Result<hnoma_core::sim::Policy> {
        match (&self.state, &self.thresholds) {
            (Some(x), None) => {
                Ok(hnoma_core::sim::Policy::Mixed(State::new(x[0], x[1], x[2])?))
            }
            (None, Some(t)) => Ok(hnoma_core::sim::Policy::Thresholds(t.build()?)),
            _ => bail!("policy needs exactly one of \"state\" and \"thresholds\""),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct SimulateConfig {
    pub blocks: usize,
    pub slots: usize,
    pub mode: ModeConfig,
    pub policy: PolicyConfig,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub trace: Option<bool>,
    pub per_user_gbar_db: Option<Vec<f64>>,
    pub per_user_gbar_linear: Option<Vec<f64>>,
}

pub const SIMULATE_KEYS: [&str; 9] = [
    "blocks",
    "slots",
    "mode",
    "policy",
    "alpha",
    "seed",
    "trace",
    "per_user_gbar_db",
    "per_user_gbar_linear",
];

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeConfig {
    StateDriven,
    ChannelDriven,
}

impl From<ModeConfig> for Mode {
    fn from(m: ModeConfig) -> Mode {
        match m {
            ModeConfig::StateDriven => Mode::StateDriven,
            ModeConfig::ChannelDriven => Mode::ChannelDriven,
        }
    }
}

fn snr_profile(
    uniform: f64,
    per_db: &Option<Vec<f64>>,
    per_linear: &Option<Vec<f64>>,
) -> Result<SnrProfile> {
    match (per_db, per_linear) {
        (None, None) => Ok(SnrProfile::Uniform(uniform)),
        (Some(v), None) => Ok(SnrProfile::PerUser(v.iter().map(|&d| db_to_linear(d)).collect())),
        (None, Some(v)) => Ok(SnrProfile::PerUser(v.clone())),
        (Some(_), Some(_)) => {
            bail!("give at most one of per_user_gbar_db and per_user_gbar_linear")
        }
    }
}

impl SimulateConfig {
    pub fn build(&self, params: &GameParams, seed_override: Option<u64>) -> Result<SimConfig> {
        let seed = seed_override
            .or(self.seed)
            .context("simulation needs a seed (config \"seed\" or --seed)")?;
        Ok(SimConfig {
            blocks: self.blocks,
            slots: self.slots,
            snr: snr_profile(params.avg_snr, &self.per_user_gbar_db, &self.per_user_gbar_linear)?,
            mode: self.mode.into(),
            seed,
            packet_prob: self.alpha.unwrap_or(1.0),
        })
    }
}

#[derive(Debug, Deserialize)]
pub struct RampConfig {
    pub base: f64,
    pub slope: f64,
}

#[derive(Debug, Deserialize)]
pub struct ScheduleConfig {
    pub constant: Option<f64>,
    pub ramp: Option<RampConfig>,
}

impl ScheduleConfig {
    fn cost(&self) -> Result<CostSchedule> {
        match (&self.constant, &self.ramp) {
            (Some(c), None) => Ok(CostSchedule::Constant(*c)),
            (None, Some(r)) => Ok(CostSchedule::Ramp { base: r.base, slope: r.slope }),
            _ => bail!("schedule needs exactly one of \"constant\" and \"ramp\""),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct AdaptiveConfig {
    pub blocks: usize,
    pub slots_per_block: usize,
    pub num_blocks: usize,
    pub mu: f64,
    pub x0: [f64; 3],
    pub schedule: ScheduleConfig,
    pub seed: Option<u64>,
    pub estimator: Option<EstimatorConfig>,
    pub exact_payoffs: Option<bool>,
    pub fairness: Option<bool>,
    pub record_users: Option<bool>,
    pub alpha: Option<f64>,
    pub per_user_gbar_db: Option<Vec<f64>>,
    pub per_user_gbar_linear: Option<Vec<f64>>,
}

pub const ADAPTIVE_KEYS: [&str; 14] = [
    "blocks",
    "slots_per_block",
    "num_blocks",
    "mu",
    "x0",
    "schedule",
    "seed",
    "estimator",
    "exact_payoffs",
    "fairness",
    "record_users",
    "alpha",
    "per_user_gbar_db",
    "per_user_gbar_linear",
];

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorConfig {
    Conditional,
    PopulationAverage,
}

impl From<EstimatorConfig> for RewardMode {
    fn from(e: EstimatorConfig) -> RewardMode {
        match e {
            EstimatorConfig::Conditional => RewardMode::Conditional,
            EstimatorConfig::PopulationAverage => RewardMode::PopulationAverage,
        }
    }
}

impl AdaptiveConfig {
    pub fn build(
        &self,
        params: &GameParams,
        seed_override: Option<u64>,
    ) -> Result<(SimConfig, BlockSchedule, State, hnoma_core::adaptive::AdaptiveOptions)> {
        let seed = seed_override
            .or(self.seed)
            .context("adaptive runs need a seed (config \"seed\" or --seed)")?;
        let cfg = SimConfig {
            blocks: self.blocks,
            slots: self.slots_per_block,
            snr: snr_profile(params.avg_snr, &self.per_user_gbar_db, &self.per_user_gbar_linear)?,
            mode: Mode::ChannelDriven,
            seed,
            packet_prob: self.alpha.unwrap_or(1.0),
        };
        let sched = BlockSchedule {
            slots_per_block: self.slots_per_block,
            num_blocks: self.num_blocks,
            cost: self.schedule.cost()?,
        };
        let x0 = State::new(self.x0[0], self.x0[1], self.x0[2])?;
        let opts = hnoma_core::adaptive::AdaptiveOptions {
            estimator: self.estimator.unwrap_or(EstimatorConfig::Conditional).into(),
            exact_payoffs: self.exact_payoffs.unwrap_or(false),
            fairness: self.fairness.unwrap_or(false),
            record_user_states: self.record_users.unwrap_or(false),
        };
        Ok((cfg, sched, x0, opts))
    }
}

#[derive(Debug, Deserialize)]
pub struct SweepConfig {
    pub axis: AxisConfig,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub count: Option<usize>,
}

pub const SWEEP_KEYS: [&str; 5] = ["axis", "values", "start", "stop", "count"];

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisConfig {
    C,
    Gbar,
}

impl SweepConfig {
    pub fn values(&self) -> Result<Vec<f64>> {
        match (&self.values, self.start, self.stop, self.count) {
            (Some(v), None, None, None) if !v.is_empty() => Ok(v.clone()),
            (None, Some(a), Some(b), Some(n)) if n >= 2 && b > a => Ok((0..n)
                .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                .collect()),
            _ => bail!("sweep needs \"values\": [..] or start/stop/count with count >= 2"),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct ThroughputConfig {
    pub state: Option<[f64; 3]>,
    pub delta: Option<f64>,
}

pub const THROUGHPUT_KEYS: [&str; 2] = ["state", "delta"];

pub fn subset_value(value: &Value, keys: &[&str]) -> Value {
    let obj = value.as_object().expect("checked on load");
    let filtered: serde_json::Map<String, Value> = obj
        .iter()
        .filter(|(k, _)| keys.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    Value::Object(filtered)
}
