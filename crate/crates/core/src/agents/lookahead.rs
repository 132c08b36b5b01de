//! N-step lookahead through a transition model.
//!
//! Each candidate action is applied to a fork of the model's carried state,
//! then the rollout follows the greedy action of the virtual table for the
//! remaining steps. A candidate's score is the reward of the current state
//! plus the undiscounted rewards of every state the rollout visits.

use super::qtable::QTable;
use crate::error::{Result, RvlError};
use crate::mdp::{ControlAction, DiscreteState, Mdp};
use crate::reactor::{apply_volume_cap, KineticsParams, ReactorState};
use crate::surrogate::{VirtualCarry, VirtualSpace};

/// Anything that can be stepped forward one control interval from a cloneable
/// carried state and reports the discrete state it lands in.
pub trait TransitionModel {
    type Carry: Clone;

    fn advance(&self, carry: &mut Self::Carry, action: ControlAction) -> Result<DiscreteState>;

    /// Control steps left before the batch ends, if the model has a horizon.
    fn steps_remaining(&self, _carry: &Self::Carry) -> Option<usize> {
        None
    }
}

/// A transition model that can also follow a real batch.
pub trait VirtualEnvironment: TransitionModel {
    /// Carry at the start of a batch.
    fn start(&self) -> Self::Carry;

    /// Advance under the feed actually applied to the reactor and resync with
    /// the measured state.
    fn observe(&self, carry: &mut Self::Carry, u_applied: f64, measured: &ReactorState);
}

#[derive(Debug, Clone, PartialEq)]
pub struct LookaheadOutcome {
    pub action: ControlAction,
    pub value: f64,
    /// Score of every candidate, in candidate order.
    pub candidate_values: Vec<f64>,
    /// Model steps spent across all candidates.
    pub model_steps: usize,
}

/// Score each candidate by an `n_sight`-step rollout and return the best;
/// ties go to the earliest candidate.
pub fn lookahead_select<M: TransitionModel>(
    model: &M,
    virtual_table: &QTable,
    carry: &M::Carry,
    current: DiscreteState,
    candidates: &[ControlAction],
    n_sight: usize,
    mdp: &Mdp,
) -> Result<LookaheadOutcome> {
    if candidates.is_empty() {
        return Err(RvlError::InvalidParameter("no lookahead candidates".into()));
    }
    if n_sight == 0 {
        return Err(RvlError::InvalidParameter("lookahead depth must be >= 1".into()));
    }
    let depth = match model.steps_remaining(carry) {
        Some(left) => n_sight.min(left).max(1),
        None => n_sight,
    };
    let base = mdp.reward(current);
    let mut values = Vec::with_capacity(candidates.len());
    let mut steps = 0;
    for (i, &candidate) in candidates.iter().enumerate() {
        let mut fork = carry.clone();
        let mut total = base;
        let mut action = candidate;
        for _ in 0..depth {
            let next = model.advance(&mut fork, action).map_err(|e| RvlError::Candidate {
                candidate: i,
                source: Box::new(e),
            })?;
            steps += 1;
            total += mdp.reward(next);
            action = virtual_table.greedy(next);
        }
        values.push(total);
    }
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    Ok(LookaheadOutcome {
        action: candidates[best],
        value: values[best],
        candidate_values: values,
        model_steps: steps,
    })
}

/// The virtual space wrapped as a batch process: tracks volume and time so
/// the feed cap and the horizon match the real reactor.
pub struct VirtualProcess<'a> {
    pub space: &'a VirtualSpace,
    pub mdp: &'a Mdp,
    pub params: &'a KineticsParams,
    pub initial: ReactorState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessCarry {
    pub inner: VirtualCarry,
    pub v: f64,
    pub t: usize,
}

impl<'a> VirtualProcess<'a> {
    pub fn new(
        space: &'a VirtualSpace,
        mdp: &'a Mdp,
        params: &'a KineticsParams,
        initial: ReactorState,
    ) -> Self {
        Self {
            space,
            mdp,
            params,
            initial,
        }
    }
}

impl TransitionModel for VirtualProcess<'_> {
    type Carry = ProcessCarry;

    fn advance(&self, carry: &mut ProcessCarry, action: ControlAction) -> Result<DiscreteState> {
        let probe = ReactorState {
            v: carry.v,
            ..self.initial
        };
        let u = apply_volume_cap(&probe, action.feed(), self.params);
        let (c_prev, d_prev) = (carry.inner.c, carry.inner.d);
        let (c, d) = self.space.advance(&mut carry.inner, u);
        if !(c.is_finite() && d.is_finite()) {
            return Err(RvlError::IntegrationDiverged {
                field: "virtual prediction",
            });
        }
        carry.v += u * self.params.dt_control;
        carry.t += 1;
        Ok(self.mdp.encode(c - c_prev, d - d_prev))
    }

    fn steps_remaining(&self, carry: &ProcessCarry) -> Option<usize> {
        Some(self.params.n_steps().saturating_sub(carry.t))
    }
}

impl VirtualEnvironment for VirtualProcess<'_> {
    fn start(&self) -> ProcessCarry {
        ProcessCarry {
            inner: self.space.reset(self.initial.c, self.initial.d),
            v: self.initial.v,
            t: 0,
        }
    }

    fn observe(&self, carry: &mut ProcessCarry, u_applied: f64, measured: &ReactorState) {
        self.space
            .observe(&mut carry.inner, u_applied, measured.c, measured.d);
        carry.v = measured.v;
        carry.t += 1;
    }
}
