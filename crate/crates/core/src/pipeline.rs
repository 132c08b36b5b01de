//! Run-directory layout and the stages of a full experiment.
//!
//! ```text
//! <run>/config.toml              effective configuration
//! <run>/manifest.json            config hash + master seed
//! <run>/data/dataset.jsonl
//! <run>/surrogate/virtual_space.json, loss_c.csv, loss_d.csv, rmse.csv, prediction.csv
//! <run>/policies/<name>.json, <name>.log.csv
//! <run>/eval/<name>.json, <name>.trajectory.csv
//! <run>/report/...
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::agents::{
    combine_policies, evaluate_policy, train_q_learning, train_rvl, train_smsa, ControlMetrics,
    PolicyCheckpoint, PolicyOrigin, QTable, ReactorEnv, TrainingLog, VirtualProcess,
    POLICY_SCHEMA_VERSION,
};
use crate::config::ExperimentConfig;
use crate::dataset::{generate_dataset, load_dataset, save_dataset, split_dataset, Dataset, DatasetSplit};
use crate::error::{Result, RvlError};
use crate::fmt::sig10;
use crate::mdp::DiscreteState;
use crate::provenance::Provenance;
use crate::rng::{derive_seed, Stream};
use crate::surrogate::{
    evaluate_rmse, fit_product, loss_curve_csv, FitResult, ModelRecord, Product, RmseReport,
    VirtualSpace, VirtualSpaceCheckpoint, CHECKPOINT_VERSION,
};

/// A trainable learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Rvl(SightSpec),
    QLearning,
    Smsa,
}

/// Lookahead depth as written on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SightSpec {
    Short,
    Long,
    Depth(usize),
}

impl Variant {
    /// Lookahead depth under `cfg`, for RVL variants.
    pub fn depth(&self, cfg: &ExperimentConfig) -> Option<usize> {
        match self {
            Variant::Rvl(SightSpec::Short) => Some(cfg.agent.sights.short),
            Variant::Rvl(SightSpec::Long) => Some(cfg.agent.sights.long),
            Variant::Rvl(SightSpec::Depth(n)) => Some(*n),
            _ => None,
        }
    }

    /// Canonical artifact name: depths equal to the short or long sight use
    /// those names so one policy never appears twice.
    pub fn name(&self, cfg: &ExperimentConfig) -> String {
        match self.depth(cfg) {
            Some(n) if n == cfg.agent.sights.short => "rvl-short".into(),
            Some(n) if n == cfg.agent.sights.long => "rvl-long".into(),
            Some(n) => format!("rvl-{n}"),
            None => self.to_string(),
        }
    }

    /// Every learner a complete report needs.
    pub fn all(cfg: &ExperimentConfig) -> Vec<Variant> {
        let mut out = vec![Variant::Rvl(SightSpec::Short)];
        out.extend(
            cfg.agent
                .sights
                .immediates
                .iter()
                .map(|&n| Variant::Rvl(SightSpec::Depth(n))),
        );
        out.extend([Variant::Rvl(SightSpec::Long), Variant::QLearning, Variant::Smsa]);
        out
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Rvl(SightSpec::Short) => f.write_str("rvl-short"),
            Variant::Rvl(SightSpec::Long) => f.write_str("rvl-long"),
            Variant::Rvl(SightSpec::Depth(n)) => write!(f, "rvl-{n}"),
            Variant::QLearning => f.write_str("qlearning"),
            Variant::Smsa => f.write_str("smsa"),
        }
    }
}

impl FromStr for Variant {
    type Err = RvlError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            RvlError::Config(format!(
                "unknown variant {s:?}; expected rvl-short, rvl-long, rvl-<N>, qlearning or smsa"
            ))
        };
        match s {
            "qlearning" => Ok(Variant::QLearning),
            "smsa" => Ok(Variant::Smsa),
            "rvl-short" => Ok(Variant::Rvl(SightSpec::Short)),
            "rvl-long" => Ok(Variant::Rvl(SightSpec::Long)),
            _ => {
                let n: usize = s
                    .strip_prefix("rvl-")
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(bad)?;
                if !(1..=120).contains(&n) {
                    return Err(bad());
                }
                Ok(Variant::Rvl(SightSpec::Depth(n)))
            }
        }
    }
}

/// The three named sight combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combination {
    ShortImmediate,
    ImmediateLong,
    ShortLong,
}

impl Combination {
    pub const ALL: [Combination; 3] = [
        Combination::ShortImmediate,
        Combination::ImmediateLong,
        Combination::ShortLong,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Combination::ShortImmediate => "short-immediate",
            Combination::ImmediateLong => "immediate-long",
            Combination::ShortLong => "short-long",
        }
    }

    /// The two policies combined, by artifact name.
    pub fn parts(self, cfg: &ExperimentConfig) -> [String; 2] {
        let imm = Variant::Rvl(SightSpec::Depth(cfg.agent.sights.combination_immediate)).name(cfg);
        match self {
            Combination::ShortImmediate => ["rvl-short".into(), imm],
            Combination::ImmediateLong => [imm, "rvl-long".into()],
            Combination::ShortLong => ["rvl-short".into(), "rvl-long".into()],
        }
    }
}

impl FromStr for Combination {
    type Err = RvlError;

    fn from_str(s: &str) -> Result<Self> {
        Combination::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                RvlError::Config(format!(
                    "unknown combination {s:?}; expected short-immediate, immediate-long or short-long"
                ))
            })
    }
}

/// Paths inside one run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
    pub fn dataset(&self) -> PathBuf {
        self.root.join("data/dataset.jsonl")
    }
    pub fn surrogate(&self) -> PathBuf {
        self.root.join("surrogate/virtual_space.json")
    }
    pub fn surrogate_file(&self, name: &str) -> PathBuf {
        self.root.join("surrogate").join(name)
    }
    pub fn policy(&self, name: &str) -> PathBuf {
        self.root.join("policies").join(format!("{name}.json"))
    }
    pub fn policy_log(&self, name: &str) -> PathBuf {
        self.root.join("policies").join(format!("{name}.log.csv"))
    }
    pub fn metrics(&self, name: &str) -> PathBuf {
        self.root.join("eval").join(format!("{name}.json"))
    }
    pub fn trajectory(&self, name: &str) -> PathBuf {
        self.root.join("eval").join(format!("{name}.trajectory.csv"))
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| RvlError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| RvlError::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| RvlError::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| RvlError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Evaluation result as stored on disk; the trajectory goes to its own CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationRecord {
    pub name: String,
    pub c: f64,
    pub d: f64,
    pub v: f64,
    pub c_minus_d: f64,
    pub objective: f64,
    pub total_benefits: f64,
    pub rewards: Vec<f64>,
    pub states: Vec<DiscreteState>,
    pub controls: Vec<f64>,
    pub c_series: Vec<f64>,
    pub d_series: Vec<f64>,
    pub provenance: Provenance,
}

impl EvaluationRecord {
    pub fn new(name: &str, m: &ControlMetrics, provenance: Provenance) -> Self {
        Self {
            name: name.to_string(),
            c: m.c,
            d: m.d,
            v: m.v,
            c_minus_d: m.c_minus_d,
            objective: m.objective,
            total_benefits: m.total_benefits,
            rewards: m.rewards.clone(),
            states: m.states.clone(),
            controls: m.trajectory.controls.clone(),
            c_series: m.trajectory.c_series(),
            d_series: m.trajectory.d_series(),
            provenance,
        }
    }
}

/// Train one learner with an explicit agent seed. RVL variants need the
/// virtual space; baselines ignore it. Shared by the pipeline and by
/// multi-seed studies that reuse one virtual space.
pub fn train_learner(
    cfg: &ExperimentConfig,
    space: Option<&VirtualSpace>,
    variant: Variant,
    seed: u64,
) -> Result<(QTable, Option<QTable>, PolicyOrigin, TrainingLog)> {
    let env = ReactorEnv::new(&cfg.reactor, &cfg.mdp, cfg.initial);
    match variant.depth(cfg) {
        Some(depth) => {
            let space = space.ok_or_else(|| {
                RvlError::InvalidParameter(format!("{variant} needs a trained virtual space"))
            })?;
            let rvl = cfg.agent.rvl_config(depth, seed);
            let process = VirtualProcess::new(space, &cfg.mdp, &cfg.reactor, cfg.initial);
            let (policy, log) = train_rvl(&env, &process, &rvl)?;
            Ok((
                policy.real_table,
                Some(policy.virtual_table),
                PolicyOrigin::Rvl { config: rvl },
                log,
            ))
        }
        None => {
            let base = cfg.baseline.baseline_config(seed);
            let (table, log) = match variant {
                Variant::QLearning => train_q_learning(&env, &base)?,
                _ => train_smsa(&env, &base)?,
            };
            Ok((
                table,
                None,
                PolicyOrigin::Baseline {
                    algorithm: variant.to_string(),
                    config: base,
                },
                log,
            ))
        }
    }
}

/// One experiment bound to one run directory.
pub struct Pipeline {
    pub cfg: ExperimentConfig,
    pub run: RunDir,
    pub provenance: Provenance,
}

impl Pipeline {
    /// Bind `cfg` to `run`, writing the manifest on first use and refusing a
    /// directory that belongs to a different configuration.
    pub fn open(cfg: ExperimentConfig, run: RunDir) -> Result<Self> {
        cfg.validate()?;
        let provenance = Provenance {
            config_hash: cfg.hash(),
            seed: cfg.seed,
        };
        let manifest = run.manifest();
        if manifest.exists() {
            let existing: Provenance = read_json(&manifest)?;
            if existing != provenance {
                return Err(RvlError::Provenance(format!(
                    "{} belongs to config {} seed {}, not {} seed {}",
                    run.root.display(),
                    existing.config_hash,
                    existing.seed,
                    provenance.config_hash,
                    provenance.seed
                )));
            }
        } else {
            write_json(&manifest, &provenance)?;
        }
        let mut stored = cfg.clone();
        stored.out = None;
        write_text(&run.config(), &stored.to_toml_string()?)?;
        Ok(Self {
            cfg,
            run,
            provenance,
        })
    }

    fn check(&self, found: Option<&Provenance>, what: &Path) -> Result<()> {
        match found {
            Some(p) if *p == self.provenance => Ok(()),
            Some(p) => Err(RvlError::Provenance(format!(
                "{} has config {} seed {}, run has {} seed {}",
                what.display(),
                p.config_hash,
                p.seed,
                self.provenance.config_hash,
                self.provenance.seed
            ))),
            None => Err(RvlError::Provenance(format!(
                "{} carries no provenance",
                what.display()
            ))),
        }
    }

    fn stamp(&self, body: &str) -> String {
        self.provenance.stamp_csv(body)
    }

    pub fn gen_data(&self) -> Result<Dataset> {
        let ds = &self.cfg.dataset;
        let mut dataset = generate_dataset(
            ds.n,
            &ds.excitation,
            derive_seed(self.cfg.seed, Stream::Dataset, 0),
            &self.cfg.reactor,
            &self.cfg.initial,
        )?;
        dataset.meta.provenance = Some(self.provenance.clone());
        let path = self.run.dataset();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| RvlError::io(parent, e))?;
        }
        save_dataset(&dataset, &path)?;
        Ok(dataset)
    }

    pub fn load_data(&self) -> Result<Dataset> {
        let path = self.run.dataset();
        let dataset = load_dataset(&path)?;
        self.check(dataset.meta.provenance.as_ref(), &path)?;
        Ok(dataset)
    }

    pub fn split(&self, dataset: &Dataset) -> Result<DatasetSplit> {
        split_dataset(
            dataset,
            self.cfg.dataset.train_n,
            derive_seed(self.cfg.seed, Stream::Split, 0),
        )
    }

    /// Fit both predictors up to their configured epoch totals, resuming from
    /// an existing checkpoint in the run directory.
    pub fn train_surrogate(&self) -> Result<VirtualSpaceCheckpoint> {
        let dataset = self.load_data()?;
        let split = self.split(&dataset)?;
        let sc = &self.cfg.surrogate;
        let path = self.run.surrogate();
        let previous = if path.exists() {
            let ck: VirtualSpaceCheckpoint = read_json(&path)?;
            self.check(ck.provenance.as_ref(), &path)?;
            Some(ck)
        } else {
            None
        };
        let fit = |product: Product| -> Result<(FitResult, ModelRecord)> {
            let (stream, base) = match product {
                Product::C => (Stream::SurrogateC, sc.c),
                Product::D => (Stream::SurrogateD, sc.d),
            };
            let config = crate::surrogate::TrainingConfig {
                seed: derive_seed(self.cfg.seed, stream, 0),
                ..base
            };
            let resume = match &previous {
                Some(ck) => Some(
                    match product {
                        Product::C => &ck.model_c,
                        Product::D => &ck.model_d,
                    }
                    .to_fit()?,
                ),
                None => None,
            };
            let done = resume.as_ref().map_or(0, |r| r.trainer.epochs_done);
            let remaining = config.epochs.saturating_sub(done);
            let result = fit_product(&split.train, product, &sc.normalization, &config, remaining, resume)?;
            let record = ModelRecord::from_fit(&result, &config);
            Ok((result, record))
        };
        let (c, d) = rayon::join(|| fit(Product::C), || fit(Product::D));
        let ((fit_c, rec_c), (fit_d, rec_d)) = (c?, d?);
        let checkpoint = VirtualSpaceCheckpoint {
            schema_version: CHECKPOINT_VERSION,
            normalization: sc.normalization,
            model_c: rec_c,
            model_d: rec_d,
            provenance: Some(self.provenance.clone()),
        };
        write_json(&path, &checkpoint)?;
        write_text(
            &self.run.surrogate_file("loss_c.csv"),
            &self.stamp(&loss_curve_csv(&fit_c.trainer.loss_curve)),
        )?;
        write_text(
            &self.run.surrogate_file("loss_d.csv"),
            &self.stamp(&loss_curve_csv(&fit_d.trainer.loss_curve)),
        )?;

        let space = checkpoint.to_space()?;
        let (rc, rd) = evaluate_rmse(&space, &split.test)?;
        write_text(&self.run.surrogate_file("rmse.csv"), &self.stamp(&rmse_csv(&rc, &rd)))?;
        if let Some(ep) = split.test.first() {
            let (pc, pd) = space.rollout_predict(&ep.u, ep.c[0], ep.d[0]);
            let mut body = String::from("t,c_true,c_pred,d_true,d_pred\n");
            for t in 0..ep.c.len() {
                body.push_str(&format!(
                    "{t},{},{},{},{}\n",
                    sig10(ep.c[t]),
                    sig10(pc[t]),
                    sig10(ep.d[t]),
                    sig10(pd[t])
                ));
            }
            write_text(&self.run.surrogate_file("prediction.csv"), &self.stamp(&body))?;
        }
        Ok(checkpoint)
    }

    pub fn load_space(&self) -> Result<VirtualSpace> {
        let path = self.run.surrogate();
        let ck: VirtualSpaceCheckpoint = read_json(&path)?;
        self.check(ck.provenance.as_ref(), &path)?;
        ck.to_space()
    }

    fn agent_seed(&self, variant: Variant) -> u64 {
        match variant {
            Variant::Rvl(_) => derive_seed(self.cfg.seed, Stream::Agent, 0),
            _ => derive_seed(self.cfg.seed, Stream::Baseline, 0),
        }
    }

    pub fn train_variant(&self, variant: Variant) -> Result<PolicyCheckpoint> {
        let name = variant.name(&self.cfg);
        let seed = self.agent_seed(variant);
        let space = match variant {
            Variant::Rvl(_) => Some(self.load_space()?),
            _ => None,
        };
        let (table, virtual_table, origin, log) =
            train_learner(&self.cfg, space.as_ref(), variant, seed)?;
        let checkpoint = PolicyCheckpoint {
            schema_version: POLICY_SCHEMA_VERSION,
            name: name.clone(),
            seed,
            origin,
            table,
            virtual_table,
            provenance: Some(self.provenance.clone()),
        };
        write_json(&self.run.policy(&name), &checkpoint)?;
        write_text(&self.run.policy_log(&name), &self.stamp(&log.to_csv()))?;
        Ok(checkpoint)
    }

    /// Train several learners concurrently; each owns its own output files.
    pub fn train_variants(&self, variants: &[Variant]) -> Result<Vec<PolicyCheckpoint>> {
        variants.par_iter().map(|&v| self.train_variant(v)).collect()
    }

    pub fn load_policy(&self, name: &str) -> Result<PolicyCheckpoint> {
        let path = self.run.policy(name);
        let ck: PolicyCheckpoint = read_json(&path)?;
        self.check(ck.provenance.as_ref(), &path)?;
        Ok(ck)
    }

    /// Elementwise maximum of two stored policies, saved under `name`.
    pub fn combine(&self, name: &str, a: &str, b: &str) -> Result<PolicyCheckpoint> {
        let pa = self.load_policy(a)?;
        let pb = self.load_policy(b)?;
        let checkpoint = PolicyCheckpoint {
            schema_version: POLICY_SCHEMA_VERSION,
            name: name.to_string(),
            seed: self.cfg.seed,
            origin: PolicyOrigin::Combined {
                parts: vec![a.to_string(), b.to_string()],
            },
            table: combine_policies(&pa.table, &pb.table),
            virtual_table: None,
            provenance: Some(self.provenance.clone()),
        };
        write_json(&self.run.policy(name), &checkpoint)?;
        Ok(checkpoint)
    }

    pub fn combine_named(&self, combination: Combination) -> Result<PolicyCheckpoint> {
        let [a, b] = combination.parts(&self.cfg);
        self.combine(combination.name(), &a, &b)
    }

    /// Greedy batch with the stored policy; writes metrics and trajectory.
    pub fn evaluate(&self, name: &str) -> Result<EvaluationRecord> {
        let policy = self.load_policy(name)?;
        let env = ReactorEnv::new(&self.cfg.reactor, &self.cfg.mdp, self.cfg.initial);
        let metrics = evaluate_policy(&env, &policy.table)?;
        let record = EvaluationRecord::new(name, &metrics, self.provenance.clone());
        write_json(&self.run.metrics(name), &record)?;
        write_text(
            &self.run.trajectory(name),
            &self.stamp(&metrics.trajectory.to_csv(self.cfg.reactor.dt_control)),
        )?;
        Ok(record)
    }

    pub fn load_evaluation(&self, name: &str) -> Result<EvaluationRecord> {
        let path = self.run.metrics(name);
        let record: EvaluationRecord = read_json(&path)?;
        self.check(Some(&record.provenance), &path)?;
        Ok(record)
    }

    /// Names of every policy a complete run evaluates.
    pub fn policy_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Variant::all(&self.cfg)
            .iter()
            .map(|v| v.name(&self.cfg))
            .collect();
        names.extend(Combination::ALL.iter().map(|c| c.name().to_string()));
        names
    }

    /// Every stage in order, ending with the report.
    pub fn run_all(&self) -> Result<crate::report::ReportBundle> {
        self.gen_data()?;
        self.train_surrogate()?;
        self.train_variants(&Variant::all(&self.cfg))?;
        for c in Combination::ALL {
            self.combine_named(c)?;
        }
        for name in self.policy_names() {
            self.evaluate(&name)?;
        }
        crate::report::write_report(&self.run.root)
    }
}

pub fn rmse_csv(c: &RmseReport, d: &RmseReport) -> String {
    let mut out = String::from("t,rmse_c,rmse_d\n");
    for (t, (rc, rd)) in c.per_step.iter().zip(&d.per_step).enumerate() {
        out.push_str(&format!("{t},{},{}\n", sig10(*rc), sig10(*rd)));
    }
    out
}
