//! Acceptance suite. Each criterion runs in turn and prints one PASS/FAIL
//! line; the process exits non-zero when any criterion fails.
//!
//! Run alone with `cargo test -p copipe --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use copipe::experiment::{
    self, DatasetSpec, EvalConfig, GapRecord, TrainConfig, GAPS_FILE, SUMMARY_FILE, WEIGHTS_FILE,
};
use copipe::graphs::{
    enumerate_spanning_trees, mst_constrained, mst_kruskal, Forest, Graph, UnionFind,
};
use copipe::learning::{self, direct_minimize, BoundParams, DirectConfig, LearnerConfig};
use copipe::model::PerturbationConfig;
use copipe::scheduling::{self, PostProcessing, SchedInstance};
use copipe::two_stage::{self, SubgradientConfig, ThetaVector, TwoStageInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(name: &str, elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed <= limit {
        Ok(())
    } else {
        Err(format!("{name} took {elapsed:.1?}, limit {limit:?}"))
    }
}

/// Connected graph on `n` vertices: a random spanning tree plus random
/// extra edges, at most `max_edges` in total.
fn random_graph(rng: &mut ChaCha8Rng, n: usize, max_edges: usize) -> Graph {
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.random_range(0..v), v));
    }
    let extra = rng.random_range(0..=max_edges.saturating_sub(n - 1));
    for _ in 0..extra * 3 {
        if edges.len() >= max_edges {
            break;
        }
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let e = (a.min(b), a.max(b));
        if a != b && !edges.iter().any(|&(u, v)| (u.min(v), u.max(v)) == e) {
            edges.push(e);
        }
    }
    Graph::new(n, edges).unwrap()
}

fn random_two_stage(rng: &mut ChaCha8Rng) -> TwoStageInstance {
    let n = rng.random_range(2..=5);
    let g = random_graph(rng, n, 8);
    let m = g.num_edges();
    let ns = rng.random_range(1..=3);
    let c = (0..m)
        .map(|_| -f64::from(rng.random_range(0..=20)))
        .collect();
    let d = (0..m)
        .map(|_| {
            (0..ns)
                .map(|_| -f64::from(rng.random_range(0..=20)))
                .collect()
        })
        .collect();
    TwoStageInstance::new(g, c, d).unwrap()
}

fn random_jobs(rng: &mut ChaCha8Rng, with_release: bool) -> SchedInstance {
    let n = rng.random_range(1..=8);
    let p = (0..n)
        .map(|_| f64::from(rng.random_range(1..=100)))
        .collect();
    let r = (0..n)
        .map(|_| {
            if with_release {
                f64::from(rng.random_range(0..=150))
            } else {
                0.0
            }
        })
        .collect();
    SchedInstance::new(p, r).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut checked_forced = 0;
    for i in 0..500 {
        let n = rng.random_range(2..=6);
        let g = random_graph(&mut rng, n, 15);
        let w: Vec<f64> = (0..g.num_edges())
            .map(|_| f64::from(rng.random_range(-10..=10)))
            .collect();
        let trees = enumerate_spanning_trees(&g).unwrap();
        let best = trees
            .iter()
            .map(|t| t.weight(&w))
            .fold(f64::INFINITY, f64::min);
        let mst = mst_kruskal(&g, &w).unwrap();
        if !mst.is_spanning_tree(&g) || mst.weight(&w) != best {
            return Err(format!(
                "graph {i}: kruskal {} vs enumeration {best}",
                mst.weight(&w)
            ));
        }
        let optimal: Vec<&Forest> = trees.iter().filter(|t| t.weight(&w) == best).collect();
        if optimal.len() == 1 && optimal[0] != &mst {
            return Err(format!(
                "graph {i}: unique optimum differs from kruskal tree"
            ));
        }

        // a random acyclic forced set
        let mut uf = UnionFind::new(n);
        let forced: Vec<usize> = (0..g.num_edges())
            .filter(|&e| {
                rng.random_bool(0.3) && {
                    let (a, b) = g.edge(e);
                    uf.union(a, b)
                }
            })
            .collect();
        let forced = Forest::from_edges(forced);
        let constrained = mst_constrained(&g, &w, &forced).unwrap();
        let best_forced = trees
            .iter()
            .filter(|t| forced.edge_ids().iter().all(|&e| t.contains(e)))
            .map(|t| t.weight(&w))
            .fold(f64::INFINITY, f64::min);
        if constrained.weight(&w) != best_forced
            || !forced.edge_ids().iter().all(|&e| constrained.contains(e))
        {
            return Err(format!(
                "graph {i}: constrained {} vs enumeration {best_forced}",
                constrained.weight(&w)
            ));
        }
        checked_forced += usize::from(!forced.is_empty());
    }
    within("criterion 1", start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "500 graphs, {checked_forced} with forced edges, {:.2?}",
        start.elapsed()
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_slack = f64::INFINITY;
    for i in 0..300 {
        let x = random_two_stage(&mut rng);
        let (opt, _) = two_stage::brute_force_optimum(&x).unwrap();
        let base = two_stage::approx_theta(&x).to_flat();
        for k in 0..10 {
            let dir: Vec<f64> = base.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
            let l1: f64 = dir.iter().map(|v: &f64| v.abs()).sum();
            let radius = rng.random_range(0.0..=10.0);
            let p: Vec<f64> = dir.iter().map(|v| v * radius / l1).collect();
            let p_norm: f64 = p.iter().map(|v| v.abs()).sum();
            let theta: Vec<f64> = base.iter().zip(&p).map(|(a, b)| a + b).collect();
            let theta = ThetaVector::from_flat(&theta, x.num_edges()).unwrap();
            let (_, cost) = two_stage::run_pipeline(&x, &theta).unwrap();
            let slack = 0.5 * opt.abs() + p_norm - (cost - opt);
            if slack < -1e-9 {
                return Err(format!(
                    "instance {i}, perturbation {k}: violation {}",
                    -slack
                ));
            }
            worst_slack = worst_slack.min(slack);
        }
    }
    within("criterion 2", start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "3000 checks, zero violations, min slack {worst_slack:.3}, {:.2?}",
        start.elapsed()
    ))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_ratio = 0.0_f64;
    for i in 0..300 {
        let x = random_two_stage(&mut rng);
        let (opt, _) = two_stage::brute_force_optimum(&x).unwrap();
        let z = two_stage::approx_baseline(&x);
        let cost = two_stage::evaluate_solution(&x, &z).unwrap();
        if cost - opt > 0.5 * opt.abs() + 1e-9 {
            return Err(format!("instance {i}: cost {cost}, optimum {opt}"));
        }
        if opt != 0.0 {
            worst_ratio = worst_ratio.max((cost - opt) / opt.abs());
        }
    }
    Ok(format!(
        "300 instances, zero violations, worst (C - C*)/|C*| = {worst_ratio:.3}"
    ))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut single = 0;
    let mut worst_gap = 0.0_f64;
    for i in 0..200 {
        let x = random_two_stage(&mut rng);
        let (opt, _) = two_stage::brute_force_optimum(&x).unwrap();
        let lb = two_stage::lagrangian_bound(&x, 300, &SubgradientConfig::default()).lower_bound;
        if lb > opt + 1e-9 {
            return Err(format!("instance {i}: bound {lb} above optimum {opt}"));
        }
        if x.num_scenarios() == 1 {
            single += 1;
            if (lb - opt).abs() > 1e-6 {
                return Err(format!(
                    "single-scenario instance {i}: bound {lb}, optimum {opt}"
                ));
            }
        }
        worst_gap = worst_gap.max(opt - lb);
    }
    check(
        single > 0,
        format!(
            "200 instances ({single} single-scenario, all tight), largest C* - LB = {worst_gap:.3}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for i in 0..200 {
        let x = random_jobs(&mut rng, false);
        let s = scheduling::spt_layer(x.processing_times());
        let (cost, _) = scheduling::evaluate_schedule(&x, &s).unwrap();
        let (opt, _) = scheduling::brute_force_schedule(&x).unwrap();
        if cost != opt {
            return Err(format!("instance {i}: SPT {cost}, optimum {opt}"));
        }
    }
    Ok("200 instances, SPT equals brute force".into())
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut strict = 0;
    for i in 0..200 {
        let x = random_jobs(&mut rng, true);
        let srpt: f64 = scheduling::srpt_preemptive(&x).completion.iter().sum();
        let (opt, _) = scheduling::brute_force_schedule(&x).unwrap();
        if srpt > opt {
            return Err(format!("instance {i}: SRPT {srpt} above optimum {opt}"));
        }
        strict += usize::from(srpt < opt);
    }
    Ok(format!(
        "200 instances, SRPT never above optimum ({strict} strictly below)"
    ))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst = 0.0_f64;
    for d in [2, 3, 5] {
        for k in 0..10 {
            let target: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let f = |w: &[f64]| {
                w.iter()
                    .zip(&target)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
            };
            let res = direct_minimize(&f, &DirectConfig::symmetric(d, 1.0, 1000, k));
            if res.value_best > 1e-3 {
                return Err(format!(
                    "d = {d}, target {k}: best value {}",
                    res.value_best
                ));
            }
            worst = worst.max(res.value_best);
        }
    }
    within("criterion 7", start.elapsed(), Duration::from_secs(5))?;
    Ok(format!(
        "30 runs, worst value {worst:.2e}, {:.2?}",
        start.elapsed()
    ))
}

fn mean_gap(records: &[GapRecord], algorithm: &str) -> f64 {
    let gaps: Vec<f64> = records
        .iter()
        .filter(|r| r.algorithm == algorithm)
        .map(|r| r.gap_pct)
        .collect();
    gaps.iter().sum::<f64>() / gaps.len() as f64
}

fn eval_cfg() -> EvalConfig {
    EvalConfig {
        timing: false,
        ..EvalConfig::default()
    }
}

/// Desk two-stage train/test datasets shared by criteria 8 and 9.
struct TwoStageDesk {
    _dir: tempfile::TempDir,
    train: std::path::PathBuf,
    test: std::path::PathBuf,
}

impl TwoStageDesk {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let train = dir.path().join("train");
        let test = dir.path().join("test");
        experiment::cmd_generate(&DatasetSpec::two_stage_desk(1), &train).unwrap();
        experiment::cmd_generate(&DatasetSpec::two_stage_desk(2), &test).unwrap();
        Self {
            _dir: dir,
            train,
            test,
        }
    }

    fn train_and_eval(&self, cfg: &TrainConfig, tag: &str) -> Vec<GapRecord> {
        let model = self.train.parent().unwrap().join(format!("model-{tag}"));
        experiment::cmd_train(cfg, &self.train, &model).unwrap();
        let out = self.train.parent().unwrap().join(format!("eval-{tag}"));
        experiment::cmd_eval(&eval_cfg(), &self.test, &model.join(WEIGHTS_FILE), &out)
            .unwrap()
            .0
    }
}

fn criterion_8(desk: &TwoStageDesk) -> Outcome {
    let start = Instant::now();
    let records = desk.train_and_eval(&TrainConfig::default(), "plain");
    let learned = mean_gap(&records, "learned");
    let approx = mean_gap(&records, "approx");
    let heuristic = mean_gap(&records, "lagrangian_heuristic");
    let negative = records.iter().filter(|r| r.gap_pct < -1e-9).count();
    within("criterion 8", start.elapsed(), Duration::from_secs(15 * 60))?;
    let detail = format!(
        "mean gap on 24 test instances: learned {learned:.3}%, approx {approx:.3}%, \
         lagrangian heuristic {heuristic:.3}%; margin {:.3} pp (target >= 1 pp), {:.1?}",
        approx - learned,
        start.elapsed()
    );
    if negative > 0 {
        return Err(format!("{negative} negative gaps; {detail}"));
    }
    if learned > approx {
        return Err(format!("ordering violated; {detail}"));
    }
    if approx - learned < 1.0 {
        // gaps are non-negative, so the margin is capped by the approx gap
        return Err(format!(
            "ordering holds but the 1 pp margin is missed (reachable margin is at most the \
             approx gap, {approx:.3} pp); {detail}"
        ));
    }
    Ok(detail)
}

fn criterion_9(desk: &TwoStageDesk) -> Outcome {
    let run = |sigma: f64| {
        let cfg = TrainConfig {
            perturbation: Some(PerturbationConfig {
                sigma,
                nsamples: 20,
                seed: 9,
            }),
            ..TrainConfig::default()
        };
        mean_gap(
            &desk.train_and_eval(&cfg, &format!("sigma-{sigma}")),
            "learned",
        )
    };
    let small = run(1e-3);
    let large = run(0.3);
    check(
        large >= small,
        format!("held-out mean gap: sigma = 0.3 -> {large:.3}%, sigma = 1e-3 -> {small:.3}%"),
    )
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = (dir.path().join("train"), dir.path().join("test"));
    experiment::cmd_generate(&DatasetSpec::scheduling_desk(1), &train).unwrap();
    experiment::cmd_generate(&DatasetSpec::scheduling_desk(2), &test).unwrap();
    let model = dir.path().join("model");
    experiment::cmd_train(&TrainConfig::default(), &train, &model).unwrap();
    let (records, _) = experiment::cmd_eval(
        &eval_cfg(),
        &test,
        &model.join(WEIGHTS_FILE),
        &dir.path().join("eval"),
    )
    .unwrap();
    let ls_gap = mean_gap(&records, "learned_ls");

    // the perturbed decoder, with and without local search, against the
    // unperturbed pipeline on every test instance
    let w: copipe::model::WeightVector =
        serde_json::from_str(&std::fs::read_to_string(model.join(WEIGHTS_FILE)).unwrap()).unwrap();
    let (_, data) = experiment::Dataset::load(&test).unwrap();
    let experiment::Dataset::Scheduling(instances) = data else {
        return Err("expected a scheduling dataset".into());
    };
    let cfg = PerturbationConfig {
        sigma: 0.1,
        nsamples: 150,
        seed: 0,
    };
    for (entry, x) in &instances {
        let phi = scheduling::features(x);
        for post in [PostProcessing::None, PostProcessing::LocalSearch] {
            let (_, plain) = scheduling::run_pipeline(x, &phi, w.values(), post).unwrap();
            let (_, pert) = scheduling::perturbed_decode(x, &phi, w.values(), &cfg, post).unwrap();
            if pert > plain {
                return Err(format!(
                    "{}: perturbed {pert} above unperturbed {plain}",
                    entry.id
                ));
            }
        }
    }
    check(
        ls_gap <= 3.0,
        format!(
            "learned + local search mean gap {ls_gap:.3}% on 18 instances (learned {:.3}%, \
             perturbed + local search {:.3}%); perturbed decode never worse",
            mean_gap(&records, "learned"),
            mean_gap(&records, "learned_pert_ls")
        ),
    )
}

/// Tanh-sinh quadrature on (0, 1).
fn tanh_sinh(f: impl Fn(f64) -> f64) -> f64 {
    let h = 1.0 / 64.0;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut total = 0.0;
    for k in -400..=400 {
        let t = k as f64 * h;
        let u = half_pi * t.sinh();
        let x = 0.5 * (1.0 + u.tanh());
        let weight = 0.5 * half_pi * t.cosh() / u.cosh().powi(2);
        if x > 0.0 && x < 1.0 && weight > 0.0 {
            total += h * weight * f(x);
        }
    }
    total
}

fn criterion_11() -> Outcome {
    let quadrature = 48.0 * tanh_sinh(|x| (-x.ln()).sqrt());
    let c = learning::constant_c();
    if (c - quadrature).abs() > 1e-6 {
        return Err(format!("C = {c}, quadrature {quadrature}"));
    }
    let p = BoundParams::default();
    let scaled = |k: f64| BoundParams {
        n: p.n * k,
        ..p.clone()
    };
    let bound_ratio = learning::excess_risk_bound(&scaled(4.0)).unwrap()
        / learning::excess_risk_bound(&p).unwrap();
    let sigma_ratio_4 = learning::sigma_n(&scaled(4.0)).unwrap() / learning::sigma_n(&p).unwrap();
    let sigma_ratio_16 = learning::sigma_n(&scaled(16.0)).unwrap() / learning::sigma_n(&p).unwrap();
    let ok = (bound_ratio - 0.5).abs() < 1e-12
        && (sigma_ratio_4 - 0.5f64.sqrt()).abs() < 1e-12
        && (sigma_ratio_16 - 0.5).abs() < 1e-12;
    check(
        ok,
        format!(
            "C = {c:.9}, quadrature {quadrature:.9}; bound(4n)/bound(n) = {bound_ratio:.12}, \
             sigma(4n)/sigma(n) = {sigma_ratio_4:.12}, sigma(16n)/sigma(n) = {sigma_ratio_16:.12}"
        ),
    )
}

fn full_run(root: &Path, spec: &DatasetSpec, train: &TrainConfig) -> (Vec<u8>, Vec<u8>) {
    let (data, test, model, out) = (
        root.join("data"),
        root.join("test"),
        root.join("model"),
        root.join("eval"),
    );
    experiment::cmd_generate(spec, &data).unwrap();
    experiment::cmd_generate(&spec.clone().with_seed(spec.seed() + 1), &test).unwrap();
    experiment::cmd_train(train, &data, &model).unwrap();
    experiment::cmd_eval(&eval_cfg(), &test, &model.join(WEIGHTS_FILE), &out).unwrap();
    let mut gaps = std::fs::read(out.join(GAPS_FILE)).unwrap();
    gaps.extend(std::fs::read(out.join(SUMMARY_FILE)).unwrap());
    (gaps, std::fs::read(model.join(WEIGHTS_FILE)).unwrap())
}

fn criterion_12() -> Outcome {
    let train = TrainConfig {
        learner: LearnerConfig {
            box_radius: 10.0,
            budget: 300,
            seeds: vec![0, 1, 2],
        },
        perturbation: Some(PerturbationConfig {
            sigma: 0.01,
            nsamples: 5,
            seed: 4,
        }),
        ..TrainConfig::default()
    };
    let specs = [
        (
            "two-stage",
            DatasetSpec::TwoStage {
                widths: vec![3, 4],
                ks: vec![10],
                scenarios: vec![3],
                per_cell: 3,
                seed: 31,
                lagrangian_iters: 200,
            },
        ),
        ("scheduling", DatasetSpec::scheduling_desk(41)),
    ];
    let mut sizes = Vec::new();
    for (name, spec) in specs {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let first = full_run(a.path(), &spec, &train);
        let second = full_run(b.path(), &spec, &train);
        if first != second {
            return Err(format!("{name}: outputs differ between runs"));
        }
        sizes.push(format!("{name} {} CSV bytes", first.0.len()));
    }
    Ok(format!(
        "identical outputs across two full runs ({})",
        sizes.join(", ")
    ))
}

fn run(id: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f))
        .unwrap_or_else(|e| Err(format!("panicked: {:?}", e.downcast_ref::<String>())));
    let (status, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!(
        "criterion {id:>2}: {status} [{:.1?}] {detail}",
        start.elapsed()
    );
    outcome.is_ok()
}

fn main() {
    let desk = TwoStageDesk::new();
    let passed = [
        run("1", criterion_1),
        run("2", criterion_2),
        run("3", criterion_3),
        run("4", criterion_4),
        run("5", criterion_5),
        run("6", criterion_6),
        run("7", criterion_7),
        run("8", || criterion_8(&desk)),
        run("9", || criterion_9(&desk)),
        run("10", criterion_10),
        run("11", criterion_11),
        run("12", criterion_12),
    ];
    let failed = passed.iter().filter(|p| !**p).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        passed.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
