use serde::{Deserialize, Serialize};

use super::env::ReactorEnv;
use super::qtable::QTable;
use crate::error::Result;
use crate::mdp::DiscreteState;
use crate::reactor::{simulate_with, Trajectory};

/// Anything that maps the current discrete state and step to a feed rate.
pub trait FeedPolicy {
    fn feed(&self, state: DiscreteState, t: usize) -> f64;
}

impl FeedPolicy for QTable {
    fn feed(&self, state: DiscreteState, _t: usize) -> f64 {
        self.greedy(state).feed()
    }
}

/// Holds one feed rate for the whole batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantFeed(pub f64);

impl FeedPolicy for ConstantFeed {
    fn feed(&self, _state: DiscreteState, _t: usize) -> f64 {
        self.0
    }
}

/// Final-state quality of one greedy batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlMetrics {
    pub c: f64,
    pub d: f64,
    pub v: f64,
    pub c_minus_d: f64,
    /// `(c - d) * v`.
    pub objective: f64,
    /// Undiscounted sum of per-step rewards.
    pub total_benefits: f64,
    pub rewards: Vec<f64>,
    pub states: Vec<DiscreteState>,
    pub trajectory: Trajectory,
}

/// Run one deterministic batch from the initial state, one decision per step.
pub fn evaluate_policy<P: FeedPolicy + ?Sized>(env: &ReactorEnv, policy: &P) -> Result<ControlMetrics> {
    let mut s = env.mdp.initial_state();
    let mut rewards = Vec::with_capacity(env.horizon());
    let mut states = Vec::with_capacity(env.horizon());
    let trajectory = simulate_with(env.params, &env.initial, |t, history| {
        if t > 0 {
            let (prev, cur) = (&history[t - 1], &history[t]);
            s = env.mdp.encode(cur.c - prev.c, cur.d - prev.d);
            rewards.push(env.mdp.reward(s));
            states.push(s);
        }
        policy.feed(s, t)
    })?;
    let n = trajectory.states.len();
    let (prev, last) = (&trajectory.states[n - 2], &trajectory.states[n - 1]);
    let s_last = env.mdp.encode(last.c - prev.c, last.d - prev.d);
    rewards.push(env.mdp.reward(s_last));
    states.push(s_last);
    let fin = *trajectory.final_state();
    let c_minus_d = fin.c - fin.d;
    Ok(ControlMetrics {
        c: fin.c,
        d: fin.d,
        v: fin.v,
        c_minus_d,
        objective: c_minus_d * fin.v,
        total_benefits: rewards.iter().sum(),
        rewards,
        states,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Mdp;
    use crate::reactor::{KineticsParams, ReactorState};

    #[test]
    fn zero_feed_gives_zero_objective() {
        let params = KineticsParams::default();
        let mdp = Mdp::default();
        let env = ReactorEnv::new(&params, &mdp, ReactorState::INITIAL);
        let m = evaluate_policy(&env, &ConstantFeed(0.0)).unwrap();
        assert_eq!((m.c, m.d, m.v, m.objective), (0.0, 0.0, 0.5, 0.0));
        // zero change every step lands in the 0 <= x < 0.0001 bin
        assert_eq!(m.total_benefits, 120.0 * 10.0);
        assert_eq!(m.rewards.len(), 120);
    }

    #[test]
    fn metrics_are_self_consistent() {
        let params = KineticsParams::default();
        let mdp = Mdp::default();
        let env = ReactorEnv::new(&params, &mdp, ReactorState::INITIAL);
        let mut q = QTable::zeros();
        q.values[8][3] = 1.0;
        let m = evaluate_policy(&env, &q).unwrap();
        assert!((m.objective - m.c_minus_d * m.v).abs() < 1e-12);
        assert!((m.c_minus_d - (m.c - m.d)).abs() < 1e-12);
        assert_eq!(m.trajectory.controls.len(), 120);
        assert!(m.objective > 0.0);
    }
}
