use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = RvlError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RvlError {
    #[error("degenerate reactor volume {volume}")]
    DegenerateVolume { volume: f64 },

    #[error("integration diverged: non-finite value in {field}")]
    IntegrationDiverged { field: &'static str },

    #[error("concentration {field} went negative ({value:e}) beyond clamp tolerance")]
    NegativeConcentration { field: &'static str, value: f64 },

    #[error("simulation failed at control step {step}: {source}")]
    SimulationStep {
        step: usize,
        #[source]
        source: Box<RvlError>,
    },

    #[error("episode {episode}: {source}")]
    Episode {
        episode: usize,
        #[source]
        source: Box<RvlError>,
    },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<RvlError>,
    },

    #[error("lookahead candidate {candidate}: {source}")]
    Candidate {
        candidate: usize,
        #[source]
        source: Box<RvlError>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected}, got {actual} ({what})")]
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifacts in {dir}: {missing:?}")]
    MissingArtifacts { dir: PathBuf, missing: Vec<String> },

    #[error("provenance mismatch: {0}")]
    Provenance(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RvlError {
    pub(crate) fn at_step(self, step: usize) -> Self {
        RvlError::SimulationStep {
            step,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_episode(self, episode: usize) -> Self {
        RvlError::Episode {
            episode,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        RvlError::Iteration {
            iteration,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RvlError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad configuration rather than runtime failure.
    pub fn is_config_error(&self) -> bool {
        matches!(self, RvlError::Config(_) | RvlError::InvalidParameter(_))
    }
}
