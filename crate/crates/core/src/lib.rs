//! Evolutionary-game analysis and slot-level simulation of hybrid uplink NOMA
//! with truncated channel inversion power control.
//!
//! Two users share each radio resource block and contend in the power domain:
//! a user transmits at a high or low target receive level (decodable jointly
//! via successive interference cancellation) or stays silent, depending on its
//! instantaneous SNR against a pair of inversion thresholds.  The population
//! behaviour is a symmetric three-action evolutionary game whose stable states
//! this crate computes analytically ([`ess`]), by replicator dynamics
//! ([`replicator`]), and empirically by Monte-Carlo simulation ([`sim`]) and
//! estimation-driven state-updating protocols ([`adaptive`]).
//!
//! All SNR and power quantities are linear (not dB) throughout.

// validation guards use `!(x > 0.0)` so that NaN fails them too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod analysis;
pub mod ess;
pub mod game;
pub mod math;
pub mod replicator;
pub mod rng;
pub mod sim;

pub use ess::{solve_fixed_cost, solve_snr_cost, EssSolution, Regime};
pub use game::{derive_power_levels, Action, CostModel, GameParams, PayoffMatrix, State};
pub use math::{exp_integral_e1, state_from_thresholds, thresholds_from_state, Thresholds};
pub use replicator::{run_replicator, Trajectory};
pub use sim::{run_sim, SimConfig, SimStats};

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A probability triple violated the simplex invariants.
    #[error("invalid state: {0}")]
    InvalidState(String),
    /// A parameter violated its documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// An argument fell outside a function's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// An average-cost evaluation diverged (channel inversion without truncation).
    #[error("infinite cost: {0}")]
    InfiniteCost(String),
    /// Fixed-cost parameters fell on a region boundary.
    #[error("ambiguous region: {0}")]
    AmbiguousRegion(String),
    /// A root finder could not bracket a sign change.
    #[error("no bracket: {0}")]
    NoBracket(String),
}

pub type Result<T> = std::result::Result<T, Error>;
