//! Experiment configuration: one TOML document covering every stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{BaselineConfig, BootstrapMode, RvlConfig};
use crate::dataset::Excitation;
use crate::error::{Result, RvlError};
use crate::mdp::Mdp;
use crate::reactor::{KineticsParams, ReactorState};
use crate::surrogate::{Normalization, TrainingConfig};

/// The committed default, with full-size predictors and training budgets.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../../../configs/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every random stream descends from it.
    pub seed: u64,
    /// Run directory; not part of the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub reactor: KineticsParams,
    #[serde(default = "initial_state")]
    pub initial: ReactorState,
    pub dataset: DatasetSection,
    pub surrogate: SurrogateSection,
    pub mdp: Mdp,
    pub agent: AgentSection,
    pub baseline: BaselineSection,
}

fn initial_state() -> ReactorState {
    ReactorState::INITIAL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub n: usize,
    pub train_n: usize,
    pub excitation: Excitation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSection {
    #[serde(default)]
    pub normalization: Normalization,
    pub c: TrainingConfig,
    pub d: TrainingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sights {
    pub short: usize,
    pub long: usize,
    pub immediates: Vec<usize>,
    /// Immediate depth paired with short and long in combinations.
    pub combination_immediate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub alpha: f64,
    pub gamma_v: f64,
    pub gamma_r: f64,
    pub epsilon: f64,
    pub top_k: usize,
    pub period: usize,
    pub episodes: usize,
    #[serde(default)]
    pub bootstrap: BootstrapMode,
    pub sights: Sights,
}

impl AgentSection {
    pub fn rvl_config(&self, n_sight: usize, seed: u64) -> RvlConfig {
        RvlConfig {
            alpha: self.alpha,
            gamma_v: self.gamma_v,
            gamma_r: self.gamma_r,
            epsilon: self.epsilon,
            top_k: self.top_k,
            n_sight,
            period: self.period,
            episodes: self.episodes,
            bootstrap: self.bootstrap,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub episodes: usize,
}

impl BaselineSection {
    pub fn baseline_config(&self, seed: u64) -> BaselineConfig {
        BaselineConfig {
            alpha: self.alpha,
            gamma: self.gamma,
            epsilon: self.epsilon,
            episodes: self.episodes,
            seed,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| RvlError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RvlError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            RvlError::Config(msg) => RvlError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn default_config() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG_TOML).expect("committed default config is valid")
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| RvlError::Config(e.to_string()))
    }

    /// Check every section; failures are reported as config errors.
    pub fn validate(&self) -> Result<()> {
        self.validate_inner()
            .map_err(|e| if e.is_config_error() { e } else { RvlError::Config(e.to_string()) })
    }

    fn validate_inner(&self) -> Result<()> {
        self.reactor.validate()?;
        self.mdp.validate()?;
        self.dataset.excitation.validate()?;
        if self.dataset.n == 0 || self.dataset.train_n >= self.dataset.n {
            return Err(RvlError::Config(
                "dataset.n must be >= 1 and dataset.train_n < dataset.n".into(),
            ));
        }
        self.surrogate.c.validate()?;
        self.surrogate.d.validate()?;
        let n = &self.surrogate.normalization;
        if ![n.u_scale, n.c_scale, n.d_scale].iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(RvlError::Config("normalization scales must be positive".into()));
        }
        let sights = &self.agent.sights;
        for depth in self.sight_depths() {
            self.agent.rvl_config(depth, 0).validate()?;
        }
        if !sights.immediates.contains(&sights.combination_immediate) {
            return Err(RvlError::Config(
                "agent.sights.combination_immediate must be one of agent.sights.immediates".into(),
            ));
        }
        self.baseline.baseline_config(0).validate()?;
        Ok(())
    }

    /// Every lookahead depth trained: short, immediates, long.
    pub fn sight_depths(&self) -> Vec<usize> {
        let s = &self.agent.sights;
        let mut out = vec![s.short];
        out.extend(&s.immediates);
        out.push(s.long);
        out
    }

    /// Short hex digest of the experiment-defining settings. The run directory
    /// and the surrogate epoch budgets are excluded so resumed training and
    /// relocated runs keep their identity.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.out = None;
        canon.surrogate.c.epochs = 0;
        canon.surrogate.d.epochs = 0;
        let json = serde_json::to_string(&canon).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }

    /// Reduced sizes for a quick end-to-end run.
    pub fn smoke(mut self) -> Self {
        self.dataset.n = 50;
        self.dataset.train_n = 40;
        for c in [&mut self.surrogate.c, &mut self.surrogate.d] {
            c.hidden_size = 8;
            c.epochs = 5;
            c.mini_batch = 10;
        }
        self.agent.episodes = 50;
        self.baseline.episodes = 50;
        self
    }
}
