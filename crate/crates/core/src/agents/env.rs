use crate::error::Result;
use crate::mdp::{ControlAction, DiscreteState, Mdp};
use crate::reactor::{control_step, KineticsParams, ReactorState};

/// The simulated reactor seen through the decision-problem lens.
#[derive(Debug, Clone, Copy)]
pub struct ReactorEnv<'a> {
    pub params: &'a KineticsParams,
    pub mdp: &'a Mdp,
    pub initial: ReactorState,
}

/// Result of applying one control step to the reactor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvStep {
    pub u_applied: f64,
    pub next: ReactorState,
    pub state: DiscreteState,
    pub reward: f64,
}

impl<'a> ReactorEnv<'a> {
    pub fn new(params: &'a KineticsParams, mdp: &'a Mdp, initial: ReactorState) -> Self {
        Self {
            params,
            mdp,
            initial,
        }
    }

    pub fn horizon(&self) -> usize {
        self.params.n_steps()
    }

    /// Apply feed `u` (capped) and classify the resulting change.
    pub fn step_feed(&self, current: &ReactorState, u: f64) -> Result<EnvStep> {
        let (u_applied, next) = control_step(current, u, self.params)?;
        let state = self.mdp.encode(next.c - current.c, next.d - current.d);
        Ok(EnvStep {
            u_applied,
            next,
            state,
            reward: self.mdp.reward(state),
        })
    }

    pub fn step(&self, current: &ReactorState, action: ControlAction) -> Result<EnvStep> {
        self.step_feed(current, action.feed())
    }
}
