//! Tables and plot-ready series assembled from a finished run directory.
//!
//! Every table lists the measured rows of this run next to the published
//! reference values. Derived columns are recomputed for both so printed
//! inconsistencies in the reference rows are visible.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Result, RvlError};
use crate::fmt::sig10;
use crate::pipeline::{read_json, read_text, write_text, Combination, EvaluationRecord, RunDir, Variant};
use crate::provenance::{strip_csv_stamp, Provenance};

/// Published final-state results: `[C]`, `[D]`, `[V]`, `[C]-[D]` as printed
/// (where printed) and `([C]-[D])*[V]` as printed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedRow {
    pub label: &'static str,
    pub c: f64,
    pub d: f64,
    pub v: f64,
    pub c_minus_d: Option<f64>,
    pub objective: f64,
}

const fn row(label: &'static str, c: f64, d: f64, v: f64, cmd: Option<f64>, objective: f64) -> PublishedRow {
    PublishedRow {
        label,
        c,
        d,
        v,
        c_minus_d: cmd,
        objective,
    }
}

pub const PUBLISHED_COMPARISON: [PublishedRow; 6] = [
    row("recurrent-neuro-fuzzy", 0.0559, 0.0304, 0.9900, Some(0.0355), 0.0351),
    row("nominal-control", 0.0615, 0.0345, 0.9918, Some(0.0267), 0.0264),
    row("minimal-risk", 0.0612, 0.0236, 1.000, Some(0.0376), 0.0376),
    row("qlearning", 0.0590, 0.0193, 0.9220, Some(0.0366), 0.0366),
    row("smsa", 0.0618, 0.0236, 0.9800, Some(0.0361), 0.0361),
    row("rvl", 0.0614, 0.0199, 0.9254, Some(0.0415), 0.0384),
];

pub const PUBLISHED_PURE_STEPS: [PublishedRow; 5] = [
    row("1-step", 0.0606, 0.0182, 0.8999, None, 0.0381),
    row("30-step", 0.0558, 0.0173, 0.9433, None, 0.0363),
    row("50-step", 0.0566, 0.0179, 0.9638, None, 0.0372),
    row("80-step", 0.0579, 0.0218, 1.0000, None, 0.0361),
    row("120-step", 0.0613, 0.0211, 0.9254, None, 0.0372),
];

pub const PUBLISHED_COMBINATIONS: [PublishedRow; 3] = [
    row("short-immediate", 0.0603, 0.0173, 0.8898, None, 0.0382),
    row("immediate-long", 0.0601, 0.0171, 0.8913, None, 0.0383),
    row("short-long", 0.0614, 0.0199, 0.9254, None, 0.0384),
];

/// Published total expected benefits. Absolute values depend on a reward
/// table that is not recoverable, so only orderings are comparable.
pub const PUBLISHED_BENEFITS: [(&str, f64); 8] = [
    ("1-step", 33100.0),
    ("30-step", 6500.0),
    ("50-step", 16200.0),
    ("80-step", 7900.0),
    ("120-step", 26700.0),
    ("short-immediate", 34400.0),
    ("immediate-long", 33400.0),
    ("short-long", 30800.0),
];

/// Files written by one report pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub provenance: Provenance,
}

const TABLE_HEADER: &str =
    "algorithm,source,C,D,V,C_minus_D,objective,C_minus_D_recomputed,objective_recomputed\n";

fn measured_line(label: &str, r: &EvaluationRecord) -> String {
    format!(
        "{label},measured,{},{},{},{},{},{},{}\n",
        sig10(r.c),
        sig10(r.d),
        sig10(r.v),
        sig10(r.c_minus_d),
        sig10(r.objective),
        sig10(r.c - r.d),
        sig10((r.c - r.d) * r.v)
    )
}

fn published_line(p: &PublishedRow) -> String {
    format!(
        "{},published,{},{},{},{},{},{},{}\n",
        p.label,
        sig10(p.c),
        sig10(p.d),
        sig10(p.v),
        p.c_minus_d.map(sig10).unwrap_or_default(),
        sig10(p.objective),
        sig10(p.c - p.d),
        sig10((p.c - p.d) * p.v)
    )
}

/// Named columns over time, padded with empty cells.
fn series_csv(index_name: &str, start: usize, columns: &[(String, &[f64])]) -> String {
    let mut out = String::from(index_name);
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let len = columns.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
    for i in 0..len {
        out.push_str(&(start + i).to_string());
        for (_, s) in columns {
            out.push(',');
            if let Some(x) = s.get(i) {
                out.push_str(&sig10(*x));
            }
        }
        out.push('\n');
    }
    out
}

fn check_csv(path: &Path, expected: &Provenance) -> Result<String> {
    let text = read_text(path)?;
    match Provenance::from_csv(&text) {
        Some(p) if p == *expected => Ok(strip_csv_stamp(&text).to_string()),
        Some(p) => Err(RvlError::Provenance(format!(
            "{} has config {} seed {}, run has {} seed {}",
            path.display(),
            p.config_hash,
            p.seed,
            expected.config_hash,
            expected.seed
        ))),
        None => Err(RvlError::Provenance(format!(
            "{} carries no provenance",
            path.display()
        ))),
    }
}

/// Build every table and figure series for the run at `root`.
pub fn write_report(root: &Path) -> Result<ReportBundle> {
    let run = RunDir::new(root);
    if !run.manifest().exists() || !run.config().exists() {
        let missing = [run.manifest(), run.config()]
            .iter()
            .filter(|p| !p.exists())
            .map(|p| p.strip_prefix(root).unwrap_or(p).display().to_string())
            .collect();
        return Err(RvlError::MissingArtifacts {
            dir: root.to_path_buf(),
            missing,
        });
    }
    let provenance: Provenance = read_json(&run.manifest())?;
    let cfg = ExperimentConfig::load(&run.config())?;
    if cfg.hash() != provenance.config_hash || cfg.seed != provenance.seed {
        return Err(RvlError::Provenance(format!(
            "{} does not match its manifest",
            run.config().display()
        )));
    }

    let pure: Vec<String> = Variant::all(&cfg)
        .iter()
        .filter(|v| matches!(v, Variant::Rvl(_)))
        .map(|v| v.name(&cfg))
        .collect();
    let combos: Vec<&str> = Combination::ALL.iter().map(|c| c.name()).collect();
    let baselines = ["qlearning", "smsa"];
    let csv_inputs = ["loss_c.csv", "loss_d.csv", "rmse.csv", "prediction.csv"];

    let mut missing = Vec::new();
    for name in csv_inputs {
        if !run.surrogate_file(name).exists() {
            missing.push(format!("surrogate/{name}"));
        }
    }
    for name in pure.iter().map(String::as_str).chain(combos.iter().copied()).chain(baselines) {
        if !run.metrics(name).exists() {
            missing.push(format!("eval/{name}.json"));
        }
    }
    if !missing.is_empty() {
        return Err(RvlError::MissingArtifacts {
            dir: root.to_path_buf(),
            missing,
        });
    }

    let load = |name: &str| -> Result<EvaluationRecord> {
        let path = run.metrics(name);
        let r: EvaluationRecord = read_json(&path)?;
        if r.provenance != provenance {
            return Err(RvlError::Provenance(format!(
                "{} has config {} seed {}, run has {} seed {}",
                path.display(),
                r.provenance.config_hash,
                r.provenance.seed,
                provenance.config_hash,
                provenance.seed
            )));
        }
        Ok(r)
    };
    let pure_evals: Vec<EvaluationRecord> = pure.iter().map(|n| load(n)).collect::<Result<_>>()?;
    let combo_evals: Vec<EvaluationRecord> = combos.iter().map(|n| load(n)).collect::<Result<_>>()?;
    let q = load("qlearning")?;
    let smsa = load("smsa")?;
    let surrogate_csv: Vec<String> = csv_inputs
        .iter()
        .map(|n| check_csv(&run.surrogate_file(n), &provenance))
        .collect::<Result<_>>()?;

    let dir = run.report();
    let mut files = Vec::new();
    let mut emit = |name: &str, body: &str| -> Result<()> {
        let path = dir.join(name);
        write_text(&path, &provenance.stamp_csv(body))?;
        files.push(path);
        Ok(())
    };

    let short_long = &combo_evals[2];
    let mut t3 = String::from(TABLE_HEADER);
    t3.push_str(&measured_line("rvl", short_long));
    t3.push_str(&measured_line("qlearning", &q));
    t3.push_str(&measured_line("smsa", &smsa));
    PUBLISHED_COMPARISON.iter().for_each(|p| t3.push_str(&published_line(p)));
    emit("table3_comparison.csv", &t3)?;

    let depth_label = |name: &str| match name {
        "rvl-short" => format!("{}-step", cfg.agent.sights.short),
        "rvl-long" => format!("{}-step", cfg.agent.sights.long),
        other => format!("{}-step", other.trim_start_matches("rvl-")),
    };
    let mut t4 = String::from(TABLE_HEADER);
    for r in &pure_evals {
        t4.push_str(&measured_line(&depth_label(&r.name), r));
    }
    PUBLISHED_PURE_STEPS.iter().for_each(|p| t4.push_str(&published_line(p)));
    emit("table4_pure_steps.csv", &t4)?;

    let mut t5 = String::from(TABLE_HEADER);
    for r in &combo_evals {
        t5.push_str(&measured_line(&r.name, r));
    }
    PUBLISHED_COMBINATIONS.iter().for_each(|p| t5.push_str(&published_line(p)));
    emit("table5_combinations.csv", &t5)?;

    let mut t6 = String::from("algorithm,source,total_benefits\n");
    for r in &pure_evals {
        t6.push_str(&format!("{},measured,{}\n", depth_label(&r.name), sig10(r.total_benefits)));
    }
    for r in &combo_evals {
        t6.push_str(&format!("{},measured,{}\n", r.name, sig10(r.total_benefits)));
    }
    for (label, value) in PUBLISHED_BENEFITS {
        t6.push_str(&format!("{label},published,{}\n", sig10(value)));
    }
    emit("table6_benefits.csv", &t6)?;

    let mut f4 = String::from("t,u,C,D\n");
    for t in 0..short_long.c_series.len() {
        let u = short_long.controls.get(t).map(|&u| sig10(u)).unwrap_or_default();
        f4.push_str(&format!(
            "{t},{u},{},{}\n",
            sig10(short_long.c_series[t]),
            sig10(short_long.d_series[t])
        ));
    }
    emit("fig4_control.csv", &f4)?;
    emit("fig5_prediction.csv", &surrogate_csv[3])?;
    emit("fig6_rmse.csv", &surrogate_csv[2])?;

    let curves = |evals: &[EvaluationRecord]| {
        let mut cols = Vec::new();
        for r in evals {
            cols.push((format!("C_{}", r.name), r.c_series.as_slice()));
            cols.push((format!("D_{}", r.name), r.d_series.as_slice()));
        }
        series_csv("t", 0, &cols)
    };
    emit("fig7_pure_steps.csv", &curves(&pure_evals))?;
    emit("fig8_combinations.csv", &curves(&combo_evals))?;

    let mut reward_cols = Vec::new();
    for r in pure_evals.iter().chain(&combo_evals) {
        reward_cols.push((r.name.clone(), r.rewards.as_slice()));
    }
    emit("fig9_rewards.csv", &series_csv("t", 1, &reward_cols))?;

    let loss_c = parse_loss(&surrogate_csv[0]);
    let loss_d = parse_loss(&surrogate_csv[1]);
    emit(
        "loss_curves.csv",
        &series_csv(
            "epoch",
            1,
            &[("loss_c".into(), loss_c.as_slice()), ("loss_d".into(), loss_d.as_slice())],
        ),
    )?;

    Ok(ReportBundle {
        dir,
        files,
        provenance,
    })
}

fn parse_loss(body: &str) -> Vec<f64> {
    body.lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(1)?.parse().ok())
        .collect()
}
