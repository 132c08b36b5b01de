//! Tabular learners: the cooperating virtual/real policies, lookahead
//! selection, sight combination, model-free baselines and evaluation.

pub mod baselines;
pub mod env;
pub mod evaluate;
pub mod learning;
pub mod lookahead;
pub mod qtable;
pub mod rvl;

use serde::{Deserialize, Serialize};

pub use baselines::{train_q_learning, train_smsa, BaselineConfig};
pub use env::{EnvStep, ReactorEnv};
pub use evaluate::{evaluate_policy, ConstantFeed, ControlMetrics, FeedPolicy};
pub use learning::{
    epsilon_greedy, top_k_actions, update_real_q, update_virtual_feedback, update_virtual_q,
    Transition,
};
pub use lookahead::{
    lookahead_select, LookaheadOutcome, ProcessCarry, TransitionModel, VirtualEnvironment,
    VirtualProcess,
};
pub use qtable::QTable;
pub use rvl::{
    combine_policies, train_rvl, BootstrapMode, EpisodeKind, RvlConfig, SightPolicy, TrainingLog,
};

use crate::provenance::Provenance;

pub const POLICY_SCHEMA_VERSION: u32 = 1;

/// How a policy checkpoint was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyOrigin {
    Rvl { config: RvlConfig },
    Baseline { algorithm: String, config: BaselineConfig },
    Combined { parts: Vec<String> },
}

/// A trained policy on disk. `table` is what evaluation acts on; RVL runs
/// also keep their virtual table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyCheckpoint {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub origin: PolicyOrigin,
    pub table: QTable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub virtual_table: Option<QTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}
