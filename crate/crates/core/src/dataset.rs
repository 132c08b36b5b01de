//! Historical excitation episodes used to fit the virtual space.
//!
//! On disk a dataset is JSON lines: a metadata record first, then one episode
//! per line with fields `seed`, `u`, `c`, `d`.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RvlError};
use crate::mdp::{ControlAction, N_ACTIONS};
use crate::provenance::Provenance;
use crate::reactor::{simulate, KineticsParams, ReactorState};
use crate::rng::{derive_seed, rng_from, Stream};

pub const SCHEMA_VERSION: u32 = 1;

/// How the historical feed sequences were driven.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Excitation {
    /// Piecewise-constant feed: segment lengths uniform on
    /// `min_segment..=max_segment`, level uniform over the nine actions.
    PiecewiseConstant {
        min_segment: usize,
        max_segment: usize,
    },
    Constant {
        u: f64,
    },
}

impl Default for Excitation {
    fn default() -> Self {
        Excitation::PiecewiseConstant {
            min_segment: 1,
            max_segment: 10,
        }
    }
}

impl Excitation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Excitation::PiecewiseConstant {
                min_segment,
                max_segment,
            } if min_segment == 0 || max_segment < min_segment => Err(
                RvlError::InvalidParameter("segment bounds must satisfy 1 <= min <= max".into()),
            ),
            Excitation::Constant { u } if !(u >= 0.0) => Err(RvlError::InvalidParameter(
                "constant excitation must be >= 0".into(),
            )),
            _ => Ok(()),
        }
    }

    fn controls<R: Rng>(&self, rng: &mut R, n_steps: usize) -> Vec<f64> {
        match *self {
            Excitation::Constant { u } => vec![u; n_steps],
            Excitation::PiecewiseConstant {
                min_segment,
                max_segment,
            } => {
                let mut out = Vec::with_capacity(n_steps);
                while out.len() < n_steps {
                    let len = rng.gen_range(min_segment..=max_segment);
                    let level = ControlAction::from_index(rng.gen_range(0..N_ACTIONS));
                    let take = len.min(n_steps - out.len());
                    out.extend(std::iter::repeat(level.feed()).take(take));
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeRecord {
    pub seed: u64,
    /// Effective feed per control step.
    pub u: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

impl EpisodeRecord {
    fn validate(&self, n_steps: usize) -> std::result::Result<(), String> {
        if self.u.len() != n_steps {
            return Err(format!("u has {} entries, expected {n_steps}", self.u.len()));
        }
        for (name, series) in [("c", &self.c), ("d", &self.d)] {
            if series.len() != n_steps + 1 {
                return Err(format!(
                    "{name} has {} entries, expected {}",
                    series.len(),
                    n_steps + 1
                ));
            }
        }
        let all = self.u.iter().chain(&self.c).chain(&self.d);
        if all.clone().any(|x| !x.is_finite() || *x < 0.0) {
            return Err("values must be finite and non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub schema_version: u32,
    pub seed: u64,
    pub n: usize,
    pub params: KineticsParams,
    pub initial: ReactorState,
    pub excitation: Excitation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub episodes: Vec<EpisodeRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<EpisodeRecord>,
    pub test: Vec<EpisodeRecord>,
}

/// Simulate `n` episodes under `excitation`; episode `i` uses a seed derived
/// from `(seed, i)` so generation order does not matter.
pub fn generate_dataset(
    n: usize,
    excitation: &Excitation,
    seed: u64,
    params: &KineticsParams,
    initial: &ReactorState,
) -> Result<Dataset> {
    if n == 0 {
        return Err(RvlError::InvalidParameter(
            "dataset needs at least one episode".into(),
        ));
    }
    excitation.validate()?;
    params.validate()?;
    let n_steps = params.n_steps();
    let episodes = (0..n)
        .into_par_iter()
        .map(|i| {
            let ep_seed = derive_seed(seed, Stream::Dataset, i as u64);
            let mut rng = rng_from(ep_seed);
            let controls = excitation.controls(&mut rng, n_steps);
            let traj = simulate(&controls, params, initial).map_err(|e| e.in_episode(i))?;
            Ok(EpisodeRecord {
                seed: ep_seed,
                c: traj.c_series(),
                d: traj.d_series(),
                u: traj.controls,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        meta: DatasetMeta {
            schema_version: SCHEMA_VERSION,
            seed,
            n,
            params: *params,
            initial: *initial,
            excitation: *excitation,
            provenance: None,
        },
        episodes,
    })
}

/// Uniform random partition into `train_n` training and the rest test episodes.
pub fn split_dataset(dataset: &Dataset, train_n: usize, seed: u64) -> Result<DatasetSplit> {
    let total = dataset.episodes.len();
    if train_n >= total {
        return Err(RvlError::InvalidParameter(format!(
            "train size {train_n} must be smaller than dataset size {total}"
        )));
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng_from(derive_seed(seed, Stream::Split, 0)));
    let train_idx: BTreeSet<usize> = order[..train_n].iter().copied().collect();
    let (mut train, mut test) = (Vec::with_capacity(train_n), Vec::new());
    for (i, ep) in dataset.episodes.iter().enumerate() {
        if train_idx.contains(&i) {
            train.push(ep.clone());
        } else {
            test.push(ep.clone());
        }
    }
    Ok(DatasetSplit { train, test })
}

impl Dataset {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&self.meta)?;
        out.push('\n');
        for ep in &self.episodes {
            out.push_str(&serde_json::to_string(ep)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Fraction of control steps spent at each of the nine feed levels.
    pub fn level_coverage(&self) -> [f64; N_ACTIONS] {
        let mut counts = [0usize; N_ACTIONS];
        let mut total = 0usize;
        for ep in &self.episodes {
            for &u in &ep.u {
                total += 1;
                if let Some(a) = ControlAction::from_feed(u) {
                    counts[a.index()] += 1;
                }
            }
        }
        counts.map(|c| c as f64 / total.max(1) as f64)
    }
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| RvlError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>, line: String| -> Result<()> {
        w.write_all(line.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| RvlError::io(path, e))
    };
    write(&mut w, serde_json::to_string(&dataset.meta)?)?;
    for ep in &dataset.episodes {
        write(&mut w, serde_json::to_string(ep)?)?;
    }
    w.flush().map_err(|e| RvlError::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| RvlError::io(path, e))?;
    let parse_err = |line: usize, message: String| RvlError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?
        .map_err(|e| RvlError::io(path, e))?;
    let meta: DatasetMeta =
        serde_json::from_str(&first).map_err(|e| parse_err(1, e.to_string()))?;
    if meta.schema_version != SCHEMA_VERSION {
        return Err(parse_err(
            1,
            format!("unsupported schema_version {}", meta.schema_version),
        ));
    }
    let n_steps = meta.params.n_steps();
    let mut episodes = Vec::with_capacity(meta.n);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| RvlError::io(path, e))?;
        let ep: EpisodeRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
        ep.validate(n_steps).map_err(|m| parse_err(lineno, m))?;
        episodes.push(ep);
    }
    if episodes.len() != meta.n {
        return Err(parse_err(
            episodes.len() + 2,
            format!("expected {} episodes, found {}", meta.n, episodes.len()),
        ));
    }
    Ok(Dataset { meta, episodes })
}
