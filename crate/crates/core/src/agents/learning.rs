//! Action selection and the three temporal-difference updates.
//!
//! All updates share the form `Q(s,a) += alpha * (target - Q(s,a))`; they
//! differ only in where the bootstrap value of the next state comes from.

use rand::Rng;

use super::qtable::QTable;
use crate::mdp::{ControlAction, DiscreteState, N_ACTIONS};

/// Greedy with probability `epsilon`, uniform over all nine actions otherwise.
pub fn epsilon_greedy<R: Rng + ?Sized>(
    table: &QTable,
    state: DiscreteState,
    epsilon: f64,
    rng: &mut R,
) -> ControlAction {
    if rng.gen::<f64>() < epsilon {
        table.greedy(state)
    } else {
        ControlAction::from_index(rng.gen_range(0..N_ACTIONS))
    }
}

fn td_update(table: &mut QTable, s: DiscreteState, a: ControlAction, target: f64, alpha: f64) -> f64 {
    let old = table.get(s, a);
    let new = old + alpha * (target - old);
    table.set(s, a, new);
    table.visit(s, a);
    new
}

/// One observed step: `r` is the reward of landing in `s_next`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: DiscreteState,
    pub a: ControlAction,
    pub r: f64,
    pub s_next: DiscreteState,
}

/// Virtual-table update bootstrapping on its own best next value.
pub fn update_virtual_q(virtual_table: &mut QTable, tr: &Transition, alpha: f64, gamma_v: f64) -> f64 {
    let target = tr.r + gamma_v * virtual_table.max_value(tr.s_next);
    td_update(virtual_table, tr.s, tr.a, target, alpha)
}

/// Real-table update bootstrapping on the virtual table at `(s_next, a_boot)`.
pub fn update_real_q(
    real_table: &mut QTable,
    virtual_table: &QTable,
    tr: &Transition,
    a_boot: ControlAction,
    alpha: f64,
    gamma_r: f64,
) -> f64 {
    let target = tr.r + gamma_r * virtual_table.get(tr.s_next, a_boot);
    td_update(real_table, tr.s, tr.a, target, alpha)
}

/// Virtual-table update bootstrapping on the real table at `(s_next, a)`.
pub fn update_virtual_feedback(
    virtual_table: &mut QTable,
    real_table: &QTable,
    tr: &Transition,
    alpha: f64,
    gamma_v: f64,
) -> f64 {
    let target = tr.r + gamma_v * real_table.get(tr.s_next, tr.a);
    td_update(virtual_table, tr.s, tr.a, target, alpha)
}

/// Candidate actions for lookahead: the `k` best under the virtual table.
pub fn top_k_actions(virtual_table: &QTable, state: DiscreteState, k: usize) -> Vec<ControlAction> {
    virtual_table.top_k(state, k)
}
