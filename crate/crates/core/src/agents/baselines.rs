//! Model-free learners trained directly on the reactor.

use serde::{Deserialize, Serialize};

use super::env::ReactorEnv;
use super::learning::{epsilon_greedy, Transition};
use super::qtable::QTable;
use super::rvl::{EpisodeKind, LogEntry, TrainingLog};
use crate::error::{Result, RvlError};
use crate::mdp::{sample_multistep, HoldSpec};
use crate::rng::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub alpha: f64,
    pub gamma: f64,
    /// Probability of acting greedily.
    pub epsilon: f64,
    pub episodes: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.98,
            epsilon: 0.7,
            episodes: 5000,
            seed: 0,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) || !(0.0..1.0).contains(&self.gamma) {
            return Err(RvlError::InvalidParameter(
                "alpha must lie in (0, 1) and gamma in [0, 1)".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(RvlError::InvalidParameter("epsilon must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Standard one-step Q-learning update with a max bootstrap.
pub fn q_update(table: &mut QTable, tr: &Transition, alpha: f64, gamma: f64) -> f64 {
    let target = tr.r + gamma * table.max_value(tr.s_next);
    let old = table.get(tr.s, tr.a);
    let new = old + alpha * (target - old);
    table.set(tr.s, tr.a, new);
    table.visit(tr.s, tr.a);
    new
}

/// Epsilon-greedy Q-learning where every chosen action is held for a duration
/// drawn from `hold`; the table is updated after every control step.
pub fn train_multistep(
    env: &ReactorEnv,
    cfg: &BaselineConfig,
    hold: &HoldSpec,
) -> Result<(QTable, TrainingLog)> {
    cfg.validate()?;
    hold.validate()?;
    let mut rng = rng_from(cfg.seed);
    let mut table = QTable::zeros();
    let mut log = TrainingLog::default();
    let horizon = env.horizon();
    for j in 1..=cfg.episodes {
        let mut state = env.initial;
        let mut s = env.mdp.initial_state();
        let mut t = 0;
        let mut total = 0.0;
        while t < horizon {
            let a = epsilon_greedy(&table, s, cfg.epsilon, &mut rng);
            let (m, _k) = sample_multistep(&mut rng, horizon - t, t, hold);
            for _ in 0..m {
                let step = env
                    .step(&state, a)
                    .map_err(|e| e.at_step(t).at_iteration(j))?;
                let tr = Transition {
                    s,
                    a,
                    r: step.reward,
                    s_next: step.state,
                };
                q_update(&mut table, &tr, cfg.alpha, cfg.gamma);
                total += step.reward;
                state = step.next;
                s = step.state;
                t += 1;
            }
        }
        log.entries.push(LogEntry {
            iteration: j,
            kind: EpisodeKind::Real,
            ret: total,
        });
    }
    Ok((table, log))
}

/// Single-step tabular Q-learning.
pub fn train_q_learning(env: &ReactorEnv, cfg: &BaselineConfig) -> Result<(QTable, TrainingLog)> {
    let single = HoldSpec {
        m_max: 1,
        ..env.mdp.hold
    };
    train_multistep(env, cfg, &single)
}

/// Stochastic multi-step-action Q-learning with the MDP's hold distribution.
pub fn train_smsa(env: &ReactorEnv, cfg: &BaselineConfig) -> Result<(QTable, TrainingLog)> {
    train_multistep(env, cfg, &env.mdp.hold)
}
