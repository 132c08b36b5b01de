//! Alternating virtual/real training of one sight policy.
//!
//! Iterations `J = 1..=O` run a virtual episode unless `J` is a multiple of
//! the schedule period, in which case the agent drives the real reactor with
//! lookahead-guided actions. Virtual updates bootstrap on the virtual table
//! until the first real episode is due and on the real table afterwards.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::env::ReactorEnv;
use super::learning::{
    epsilon_greedy, top_k_actions, update_real_q, update_virtual_feedback, update_virtual_q,
    Transition,
};
use super::lookahead::{lookahead_select, VirtualEnvironment};
use super::qtable::QTable;
use crate::error::{Result, RvlError};
use crate::mdp::sample_multistep;
use crate::rng::rng_from;

/// Which next-state action the real update bootstraps on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapMode {
    /// The action that was just executed.
    #[default]
    SameAction,
    /// The best virtual action in the next state.
    NextTop1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RvlConfig {
    pub alpha: f64,
    pub gamma_v: f64,
    pub gamma_r: f64,
    /// Probability of acting greedily.
    pub epsilon: f64,
    pub top_k: usize,
    pub n_sight: usize,
    /// A real episode runs every `period` iterations.
    pub period: usize,
    pub episodes: usize,
    #[serde(default)]
    pub bootstrap: BootstrapMode,
    pub seed: u64,
}

impl Default for RvlConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma_v: 0.7,
            gamma_r: 0.98,
            epsilon: 0.7,
            top_k: 3,
            n_sight: 1,
            period: 10,
            episodes: 5000,
            bootstrap: BootstrapMode::SameAction,
            seed: 0,
        }
    }
}

impl RvlConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(self.alpha) || !open_unit(self.gamma_v) || !open_unit(self.gamma_r) {
            return Err(RvlError::InvalidParameter(
                "alpha, gamma_v and gamma_r must lie in (0, 1)".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(RvlError::InvalidParameter("epsilon must lie in [0, 1]".into()));
        }
        if self.top_k == 0 || self.top_k > crate::mdp::N_ACTIONS {
            return Err(RvlError::InvalidParameter("top_k must lie in 1..=9".into()));
        }
        if !(1..=120).contains(&self.n_sight) {
            return Err(RvlError::InvalidParameter("n_sight must lie in 1..=120".into()));
        }
        if self.period == 0 {
            return Err(RvlError::InvalidParameter("schedule period must be >= 1".into()));
        }
        Ok(())
    }
}

/// Virtual and real tables learned for one lookahead depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SightPolicy {
    pub virtual_table: QTable,
    pub real_table: QTable,
    pub n_sight: usize,
}

/// Combine two sight policies by taking the larger real-table value per cell.
pub fn combine_policies(a: &QTable, b: &QTable) -> QTable {
    a.elementwise_max(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeKind {
    Virtual,
    Real,
}

impl EpisodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EpisodeKind::Virtual => "virtual",
            EpisodeKind::Real => "real",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iteration: usize,
    pub kind: EpisodeKind,
    /// Undiscounted sum of rewards over the episode.
    pub ret: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub entries: Vec<LogEntry>,
    /// Virtual-space steps spent inside lookahead.
    pub lookahead_steps: usize,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,kind,return\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{}\n", e.iteration, e.kind.as_str(), e.ret));
        }
        out
    }

    pub fn returns(&self, kind: EpisodeKind) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| e.ret)
            .collect()
    }
}

struct Learner<'c> {
    cfg: &'c RvlConfig,
    virtual_table: QTable,
    real_table: QTable,
}

impl Learner<'_> {
    fn virtual_episode<V: VirtualEnvironment, R: Rng>(
        &mut self,
        space: &V,
        env: &ReactorEnv,
        feedback: bool,
        rng: &mut R,
    ) -> Result<f64> {
        let horizon = env.horizon();
        let mut carry = space.start();
        let mut s = env.mdp.initial_state();
        let mut t = 0;
        let mut total = 0.0;
        while t < horizon {
            let a = epsilon_greedy(&self.virtual_table, s, self.cfg.epsilon, rng);
            let (m, _k) = sample_multistep(rng, horizon - t, t, &env.mdp.hold);
            for _ in 0..m {
                let s_next = space.advance(&mut carry, a)?;
                let tr = Transition {
                    s,
                    a,
                    r: env.mdp.reward(s_next),
                    s_next,
                };
                if feedback {
                    update_virtual_feedback(&mut self.virtual_table, &self.real_table, &tr, self.cfg.alpha, self.cfg.gamma_v);
                } else {
                    update_virtual_q(&mut self.virtual_table, &tr, self.cfg.alpha, self.cfg.gamma_v);
                }
                total += tr.r;
                s = s_next;
                t += 1;
            }
        }
        Ok(total)
    }

    fn real_episode<V: VirtualEnvironment, R: Rng>(
        &mut self,
        space: &V,
        env: &ReactorEnv,
        rng: &mut R,
        lookahead_steps: &mut usize,
    ) -> Result<f64> {
        let horizon = env.horizon();
        let mut carry = space.start();
        let mut state = env.initial;
        let mut s = env.mdp.initial_state();
        let mut t = 0;
        let mut total = 0.0;
        while t < horizon {
            let candidates = top_k_actions(&self.virtual_table, s, self.cfg.top_k);
            let pick = lookahead_select(
                space,
                &self.virtual_table,
                &carry,
                s,
                &candidates,
                self.cfg.n_sight,
                env.mdp,
            )?;
            *lookahead_steps += pick.model_steps;
            let a = pick.action;
            let (m, _k) = sample_multistep(rng, horizon - t, t, &env.mdp.hold);
            for _ in 0..m {
                let step = env.step(&state, a).map_err(|e| e.at_step(t))?;
                space.observe(&mut carry, step.u_applied, &step.next);
                let a_boot = match self.cfg.bootstrap {
                    BootstrapMode::SameAction => a,
                    BootstrapMode::NextTop1 => self.virtual_table.greedy(step.state),
                };
                let tr = Transition {
                    s,
                    a,
                    r: step.reward,
                    s_next: step.state,
                };
                update_real_q(&mut self.real_table, &self.virtual_table, &tr, a_boot, self.cfg.alpha, self.cfg.gamma_r);
                total += step.reward;
                state = step.next;
                s = step.state;
                t += 1;
            }
        }
        Ok(total)
    }
}

/// Train one sight policy. `space` must already be fitted.
pub fn train_rvl<V: VirtualEnvironment>(
    env: &ReactorEnv,
    space: &V,
    cfg: &RvlConfig,
) -> Result<(SightPolicy, TrainingLog)> {
    cfg.validate()?;
    let mut rng = rng_from(cfg.seed);
    let mut learner = Learner {
        cfg,
        virtual_table: QTable::zeros(),
        real_table: QTable::zeros(),
    };
    let mut log = TrainingLog::default();
    for j in 1..=cfg.episodes {
        let (kind, ret) = if j % cfg.period != 0 {
            let feedback = j >= cfg.period;
            let r = learner.virtual_episode(space, env, feedback, &mut rng);
            (EpisodeKind::Virtual, r)
        } else {
            let r = learner.real_episode(space, env, &mut rng, &mut log.lookahead_steps);
            (EpisodeKind::Real, r)
        };
        let ret = ret.map_err(|e| e.at_iteration(j))?;
        log.entries.push(LogEntry {
            iteration: j,
            kind,
            ret,
        });
    }
    Ok((
        SightPolicy {
            virtual_table: learner.virtual_table,
            real_table: learner.real_table,
            n_sight: cfg.n_sight,
        },
        log,
    ))
}
