//! Acceptance run: every criterion at its stated tolerance, one line each.
//! Exits non-zero when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rvl_core::agents::{combine_policies, evaluate_policy, QTable, ReactorEnv};
use rvl_core::pipeline::train_learner;
use rvl_core::reactor::simulate;
use rvl_core::rng::{derive_seed, Stream};
use rvl_core::surrogate::{evaluate_rmse, fit_product, Product, TrainingConfig, VirtualSpace};
use rvl_core::{Combination, ExperimentConfig, KineticsParams, Pipeline, ReactorState, RunDir, Variant};

const SEEDS: u64 = 10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn report(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f));
    let secs = started.elapsed().as_secs_f64();
    let (pass, detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n} [{name}]: {verdict} ({secs:.1}s) {detail}");
    pass
}

fn reactor_physics() -> Outcome {
    let started = Instant::now();
    let params = KineticsParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut ac, mut sum, mut volume_ok) = (0.0f64, 0.0f64, true);
    for _ in 0..100 {
        let u = common::random_feeds(&mut rng);
        let traj = simulate(&u, &params, &ReactorState::INITIAL).expect("simulation");
        let (a, s, v) = common::balance_violation(&traj, &params);
        ac = ac.max(a);
        sum = sum.max(s);
        volume_ok &= v;
    }
    let ratios = common::rk4_error_ratios();
    let ratios_ok = ratios.iter().all(|r| (12.0..=20.0).contains(r));
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let secs = started.elapsed().as_secs_f64();
    outcome(
        ac < 1e-6 && sum < 1e-6 && volume_ok && ratios_ok && secs < 10.0,
        format!(
            "A/C balance {ac:.1e}, species sum {sum:.1e} (tol 1e-6), volume ok {volume_ok}, RK4 ratios {lo:.2}..{hi:.2} (need 12..20)"
        ),
    )
}

fn desk_config() -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    ExperimentConfig::load(&path).expect("desk config")
}

fn untrained_rmse(cfg: &ExperimentConfig, pipeline: &Pipeline) -> (f64, f64) {
    let dataset = pipeline.load_data().unwrap();
    let split = pipeline.split(&dataset).unwrap();
    let norm = &cfg.surrogate.normalization;
    let fresh = |product: Product, stream: Stream, base: TrainingConfig| {
        let config = TrainingConfig {
            seed: derive_seed(cfg.seed, stream, 0),
            ..base
        };
        fit_product(&split.train, product, norm, &config, 0, None).unwrap().model
    };
    let space = VirtualSpace::new(
        fresh(Product::C, Stream::SurrogateC, cfg.surrogate.c),
        fresh(Product::D, Stream::SurrogateD, cfg.surrogate.d),
        *norm,
    )
    .unwrap();
    let (c, d) = evaluate_rmse(&space, &split.test).unwrap();
    (c.mean, d.mean)
}

fn surrogate_correctness(cfg: &ExperimentConfig, pipeline: &Pipeline) -> Outcome {
    let started = Instant::now();
    let grad = (5..8).map(common::gradient_check_error).fold(0.0, f64::max);

    pipeline.gen_data().expect("dataset");
    pipeline.train_surrogate().expect("surrogate training");
    let space = pipeline.load_space().unwrap();
    let dataset = pipeline.load_data().unwrap();
    let split = pipeline.split(&dataset).unwrap();
    let (rc, rd) = evaluate_rmse(&space, &split.test).unwrap();
    let range = |f: &dyn Fn(&rvl_core::dataset::EpisodeRecord) -> &Vec<f64>| {
        let all = split.test.iter().flat_map(|e| f(e).iter().cloned());
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(x), h.max(x)));
        hi - lo
    };
    let (range_c, range_d) = (range(&|e| &e.c), range(&|e| &e.d));
    let (u_c, u_d) = untrained_rmse(cfg, pipeline);
    let secs = started.elapsed().as_secs_f64();
    let pct = |x: f64, r: f64| 100.0 * x / r;
    let pass = grad < 1e-4
        && rc.mean < 0.02 * range_c
        && rd.mean < 0.02 * range_d
        && rc.mean < 0.5 * u_c
        && rd.mean < 0.5 * u_d
        && secs <= 1800.0;
    outcome(
        pass,
        format!(
            "gradient rel err {grad:.1e} (tol 1e-4); held-out RMSE C {:.2}% of range ({:.1}% of untrained), D {:.2}% of range ({:.1}% of untrained); need < 2% and < 50%; {} train / {} test episodes, {} epochs",
            pct(rc.mean, range_c),
            100.0 * rc.mean / u_c,
            pct(rd.mean, range_d),
            100.0 * rd.mean / u_d,
            split.train.len(),
            split.test.len(),
            cfg.surrogate.c.epochs
        ),
    )
}

fn update_oracles() -> Outcome {
    let err = common::scripted_update_error();
    let (deviation, gap) = common::geometric_convergence();
    outcome(
        err < 1e-12 && deviation < 1e-9 && gap < 1e-3,
        format!("20 scripted transitions max error {err:.1e} (tol 1e-12); contraction deviation {deviation:.1e}, final gap {gap:.1e}"),
    )
}

fn lookahead_oracle() -> Outcome {
    let started = Instant::now();
    let (cases, bad) = common::lookahead_mismatches();
    let secs = started.elapsed().as_secs_f64();
    outcome(
        bad == 0 && secs < 1.0,
        format!("{cases} (model, depth, start, candidate set) cases, {bad} mismatches"),
    )
}

/// Objective and total benefits of every evaluated policy, per agent seed.
struct Study {
    runs: Vec<BTreeMap<String, (f64, f64)>>,
    secs: f64,
}

impl Study {
    fn mean(&self, name: &str, pick: impl Fn(&(f64, f64)) -> f64) -> f64 {
        self.runs.iter().map(|r| pick(&r[name])).sum::<f64>() / self.runs.len() as f64
    }
}

fn seed_study(cfg: &ExperimentConfig, space: &VirtualSpace) -> Study {
    let started = Instant::now();
    let env = ReactorEnv::new(&cfg.reactor, &cfg.mdp, cfg.initial);
    let variants = Variant::all(cfg);
    let jobs: Vec<(u64, Variant)> = (0..SEEDS).flat_map(|i| variants.iter().map(move |&v| (i, v))).collect();
    let tables: Vec<(u64, String, QTable)> = jobs
        .par_iter()
        .map(|&(i, v)| {
            let stream = if v.depth(cfg).is_some() { Stream::Agent } else { Stream::Baseline };
            let seed = derive_seed(cfg.seed, stream, i);
            let (table, ..) = train_learner(cfg, Some(space), v, seed).expect("training");
            (i, v.name(cfg), table)
        })
        .collect();
    let mut runs = Vec::new();
    for i in 0..SEEDS {
        let mut named: BTreeMap<String, QTable> = tables
            .iter()
            .filter(|(s, ..)| *s == i)
            .map(|(_, n, t)| (n.clone(), t.clone()))
            .collect();
        for c in Combination::ALL {
            let [a, b] = c.parts(cfg);
            named.insert(c.name().to_string(), combine_policies(&named[&a], &named[&b]));
        }
        let metrics = named
            .iter()
            .map(|(n, t)| {
                let m = evaluate_policy(&env, t).expect("evaluation");
                (n.clone(), (m.objective, m.total_benefits))
            })
            .collect();
        runs.push(metrics);
    }
    Study {
        runs,
        secs: started.elapsed().as_secs_f64(),
    }
}

fn table3(study: &Study, surrogate_secs: f64) -> Outcome {
    let obj = |n: &str| study.mean(n, |m| m.0);
    let (rvl, q, smsa) = (obj("short-long"), obj("qlearning"), obj("smsa"));
    let total = study.secs + surrogate_secs;
    outcome(
        rvl >= 0.034 && rvl > q && rvl > smsa && total <= 3600.0,
        format!(
            "mean objective over {SEEDS} seeds: short-long {rvl:.4} (need >= 0.034), qlearning {q:.4}, smsa {smsa:.4}; agents {:.0}s + surrogate {surrogate_secs:.0}s",
            study.secs
        ),
    )
}

fn table45(study: &Study, cfg: &ExperimentConfig) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in Combination::ALL {
        let [a, b] = c.parts(cfg);
        let wins = study
            .runs
            .iter()
            .filter(|r| r[c.name()].0 >= r[&a].0.min(r[&b].0))
            .count();
        pass &= wins >= 8;
        parts.push(format!("{} >= worse part on {wins}/{SEEDS}", c.name()));
    }
    let best = study
        .runs
        .iter()
        .filter(|r| {
            let sl = r["short-long"].0;
            sl >= r["short-immediate"].0 && sl >= r["immediate-long"].0
        })
        .count();
    pass &= 2 * best > SEEDS as usize;
    parts.push(format!("short-long best combination on {best}/{SEEDS}"));
    outcome(pass, parts.join("; "))
}

fn table6(study: &Study, cfg: &ExperimentConfig) -> Outcome {
    let benefits = |n: &str| study.mean(n, |m| m.1);
    let immediates: Vec<(String, f64)> = cfg
        .agent
        .sights
        .immediates
        .iter()
        .map(|d| {
            let name = Variant::Rvl(rvl_core::pipeline::SightSpec::Depth(*d)).name(cfg);
            let v = benefits(&name);
            (name, v)
        })
        .collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for c in Combination::ALL {
        let total = benefits(c.name());
        pass &= immediates.iter().all(|(_, v)| total > *v);
        parts.push(format!("{} {total:.0}", c.name()));
    }
    for (n, v) in &immediates {
        parts.push(format!("{n} {v:.0}"));
    }
    outcome(pass, format!("mean total benefits: {}", parts.join(", ")))
}

fn determinism() -> Outcome {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let roots: Vec<_> = ["a", "b"].iter().map(|n| tmp.path().join(n)).collect();
    for root in &roots {
        let cfg = ExperimentConfig::default_config().smoke();
        Pipeline::open(cfg, RunDir::new(root)).unwrap().run_all().expect("smoke pipeline");
    }
    let secs = started.elapsed().as_secs_f64() / 2.0;
    let mut compared = 0;
    let mut differing = Vec::new();
    for sub in ["policies", "report"] {
        let mut names: Vec<_> = std::fs::read_dir(roots[0].join(sub))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        let other = std::fs::read_dir(roots[1].join(sub)).unwrap().count();
        if other != names.len() {
            differing.push(format!("{sub}/ file count"));
        }
        for n in names {
            let x = std::fs::read(roots[0].join(sub).join(&n)).unwrap();
            let y = std::fs::read(roots[1].join(sub).join(&n)).ok();
            compared += 1;
            if y.as_deref() != Some(x.as_slice()) {
                differing.push(format!("{sub}/{}", n.to_string_lossy()));
            }
        }
    }
    outcome(
        differing.is_empty() && compared > 0 && secs < 120.0,
        format!("{compared} policy and report files compared, differing: {differing:?}; smoke run {secs:.1}s (need < 120s)"),
    )
}

fn main() {
    let mut passed = Vec::new();
    passed.push(report(1, "reactor physics", reactor_physics));

    let cfg = desk_config();
    let tmp = tempfile::tempdir().unwrap();
    let pipeline = Pipeline::open(cfg.clone(), RunDir::new(tmp.path().join("desk"))).unwrap();
    let surrogate_started = Instant::now();
    passed.push(report(2, "surrogate correctness", || surrogate_correctness(&cfg, &pipeline)));
    let surrogate_secs = surrogate_started.elapsed().as_secs_f64();

    passed.push(report(3, "update oracles", update_oracles));
    passed.push(report(4, "lookahead oracle", lookahead_oracle));

    let study = catch_unwind(AssertUnwindSafe(|| {
        let space = pipeline.load_space().expect("virtual space from criterion 2");
        seed_study(&cfg, &space)
    }));
    match &study {
        Ok(study) => {
            passed.push(report(5, "comparison table", || table3(study, surrogate_secs)));
            passed.push(report(6, "pure and combined ordering", || table45(study, &cfg)));
            passed.push(report(7, "total benefits direction", || table6(study, &cfg)));
        }
        Err(_) => {
            for (n, name) in [(5, "comparison table"), (6, "pure and combined ordering"), (7, "total benefits direction")] {
                passed.push(report(n, name, || outcome(false, "seed study did not complete".into())));
            }
        }
    }

    passed.push(report(8, "determinism", determinism));

    let ok = passed.iter().filter(|p| **p).count();
    println!("acceptance: {ok}/{} criteria passed", passed.len());
    if ok != passed.len() {
        std::process::exit(1);
    }
}
