//! Reinforcement virtual learning for fed-batch reactor control.
//!
//! The crate is layered bottom-up: [`reactor`] is the ground-truth process,
//! [`dataset`] records excitation batches from it, [`surrogate`] learns the
//! virtual space, [`mdp`] defines states, actions and rewards, and [`agents`]
//! holds the learners. [`pipeline`] and [`report`] drive full experiments.

pub mod agents;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fmt;
pub mod mdp;
pub mod pipeline;
pub mod provenance;
pub mod reactor;
pub mod report;
pub mod rng;
pub mod surrogate;

pub use agents::{PolicyCheckpoint, QTable, RvlConfig, SightPolicy};
pub use config::ExperimentConfig;
pub use error::{Result, RvlError};
pub use pipeline::{Combination, Pipeline, RunDir, Variant};
pub use mdp::{ControlAction, DiscreteState, Mdp, RewardTable, StateBins};
pub use reactor::{KineticsParams, ReactorState, Trajectory};
