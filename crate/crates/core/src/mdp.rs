//! Discrete decision problem shared by every agent: ten states binned on the
//! one-step change of `[C] - [D]`, nine feed levels, and a per-state reward.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RvlError};

pub const N_STATES: usize = 10;
pub const N_ACTIONS: usize = 9;

/// Feed increment between consecutive action levels.
pub const FEED_STEP: f64 = 0.001;

/// State `S1..=S10`, stored zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct DiscreteState(u8);

impl DiscreteState {
    /// Build from the one-based label (1 = best, 10 = worst).
    pub fn new(label: usize) -> Result<Self> {
        if (1..=N_STATES).contains(&label) {
            Ok(Self((label - 1) as u8))
        } else {
            Err(RvlError::InvalidParameter(format!(
                "state label {label} outside 1..={N_STATES}"
            )))
        }
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < N_STATES, "state index {index} out of range");
        Self(index as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn label(self) -> usize {
        self.0 as usize + 1
    }

    pub fn all() -> impl Iterator<Item = DiscreteState> {
        (0..N_STATES).map(Self::from_index)
    }
}

impl TryFrom<usize> for DiscreteState {
    type Error = RvlError;
    fn try_from(label: usize) -> Result<Self> {
        Self::new(label)
    }
}

impl From<DiscreteState> for usize {
    fn from(s: DiscreteState) -> usize {
        s.label()
    }
}

impl fmt::Display for DiscreteState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.label())
    }
}

/// Feed level `1..=9`, stored zero-based; level `i` feeds `0.001 * i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct ControlAction(u8);

impl TryFrom<usize> for ControlAction {
    type Error = RvlError;
    fn try_from(label: usize) -> Result<Self> {
        Self::new(label)
    }
}

impl From<ControlAction> for usize {
    fn from(a: ControlAction) -> usize {
        a.label()
    }
}

impl ControlAction {
    pub fn new(label: usize) -> Result<Self> {
        if (1..=N_ACTIONS).contains(&label) {
            Ok(Self((label - 1) as u8))
        } else {
            Err(RvlError::InvalidParameter(format!(
                "action label {label} outside 1..={N_ACTIONS}"
            )))
        }
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < N_ACTIONS, "action index {index} out of range");
        Self(index as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn label(self) -> usize {
        self.0 as usize + 1
    }

    pub fn feed(self) -> f64 {
        FEED_STEP * self.label() as f64
    }

    /// Inverse of [`ControlAction::feed`] for the nine grid values.
    pub fn from_feed(u: f64) -> Option<Self> {
        let level = (u / FEED_STEP).round();
        if (1.0..=N_ACTIONS as f64).contains(&level) && (u - level * FEED_STEP).abs() < 1e-12 {
            Some(Self(level as u8 - 1))
        } else {
            None
        }
    }

    pub fn all() -> impl Iterator<Item = ControlAction> {
        (0..N_ACTIONS).map(Self::from_index)
    }
}

impl fmt::Display for ControlAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.label())
    }
}

/// An action held for `m` control steps, chosen in period `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiStepAction {
    pub action: ControlAction,
    pub m: usize,
    pub k: usize,
}

/// Lower edges of states S9, S8, ..., S1. Anything below the first edge is S10.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateBins(pub Vec<f64>);

impl Default for StateBins {
    fn default() -> Self {
        Self(vec![
            0.0, 0.0001, 0.0002, 0.0003, 0.0004, 0.0005, 0.0006, 0.0007, 0.0008,
        ])
    }
}

impl StateBins {
    pub fn validate(&self) -> Result<()> {
        if self.0.len() != N_STATES - 1 {
            return Err(RvlError::InvalidParameter(format!(
                "expected {} bin edges, got {}",
                N_STATES - 1,
                self.0.len()
            )));
        }
        if self.0.iter().any(|e| !e.is_finite()) || self.0.windows(2).any(|w| w[0] >= w[1]) {
            return Err(RvlError::InvalidParameter(
                "bin edges must be finite and strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// Bin `delta_c - delta_d` with lower-inclusive edges.
    pub fn encode(&self, delta_c: f64, delta_d: f64) -> DiscreteState {
        let x = delta_c - delta_d;
        // Number of edges at or below x; NaN compares false everywhere and lands in S10.
        let passed = self.0.iter().take_while(|&&edge| x >= edge).count();
        DiscreteState::from_index(N_STATES - 1 - passed)
    }
}

/// Reward per state, S1 first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RewardTable(pub Vec<f64>);

impl Default for RewardTable {
    fn default() -> Self {
        Self(vec![
            100.0, 90.0, 80.0, 70.0, 60.0, 50.0, 40.0, 30.0, 10.0, -50.0,
        ])
    }
}

impl RewardTable {
    pub fn validate(&self) -> Result<()> {
        if self.0.len() != N_STATES {
            return Err(RvlError::InvalidParameter(format!(
                "reward table needs {N_STATES} entries, got {}",
                self.0.len()
            )));
        }
        if self.0.iter().any(|r| !r.is_finite()) || self.0.windows(2).any(|w| w[0] <= w[1]) {
            return Err(RvlError::InvalidParameter(
                "rewards must be finite and strictly decreasing from S1 to S10".into(),
            ));
        }
        Ok(())
    }

    pub fn reward(&self, state: DiscreteState) -> f64 {
        self.0[state.index()]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|r| r * factor).collect())
    }
}

/// Hold-duration sampling for multi-step actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoldSpec {
    /// Longest hold in control steps.
    pub m_max: usize,
    /// Control steps per period; `k = t / period_len`.
    pub period_len: usize,
}

impl Default for HoldSpec {
    fn default() -> Self {
        Self {
            m_max: 10,
            period_len: 30,
        }
    }
}

impl HoldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m_max == 0 || self.period_len == 0 {
            return Err(RvlError::InvalidParameter(
                "m_max and period_len must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Draw `m` uniformly from `1..=min(m_max, remaining)` and tag the period of step `t`.
///
/// When only `m = 1` is possible no random number is consumed, so a learner
/// with `m_max = 1` follows the same random stream as a single-step learner.
pub fn sample_multistep<R: Rng + ?Sized>(
    rng: &mut R,
    remaining: usize,
    t: usize,
    spec: &HoldSpec,
) -> (usize, usize) {
    debug_assert!(remaining >= 1);
    let upper = spec.m_max.min(remaining).max(1);
    let m = if upper == 1 { 1 } else { rng.gen_range(1..=upper) };
    (m, t / spec.period_len)
}

/// `sum gamma^n r_n` over the sequence.
pub fn episode_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut discount = 1.0;
    let mut total = 0.0;
    for r in rewards {
        total += discount * r;
        discount *= gamma;
    }
    total
}

/// Bins plus rewards: everything needed to turn concentration changes into
/// states and rewards.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mdp {
    pub bins: StateBins,
    pub rewards: RewardTable,
    pub hold: HoldSpec,
}

impl Mdp {
    pub fn validate(&self) -> Result<()> {
        self.bins.validate()?;
        self.rewards.validate()?;
        self.hold.validate()
    }

    pub fn encode(&self, delta_c: f64, delta_d: f64) -> DiscreteState {
        self.bins.encode(delta_c, delta_d)
    }

    pub fn reward(&self, state: DiscreteState) -> f64 {
        self.rewards.reward(state)
    }

    /// State before any control has acted: both changes are zero.
    pub fn initial_state(&self) -> DiscreteState {
        self.encode(0.0, 0.0)
    }
}
