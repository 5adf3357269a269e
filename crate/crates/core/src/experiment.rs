//! Experiment orchestration: dataset generation, training, evaluation gap
//! tables and bound reports. Every command is a plain function over paths so
//! the command-line tool and the tests share one code path.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::learning::{
    self, empirical_risk, learn_by_experience, BoundParams, FylConfig, LearnerConfig,
    LearningError, LossConfig, SchedCase, SeedReport, TrainingReport, TwoStageCase,
    TwoStageImitation,
};
use crate::model::{ModelError, PerturbationConfig, WeightVector};
use crate::scheduling::{self, PostProcessing, SchedError, SchedFile, SchedInstance};
use crate::two_stage::{self, SubgradientConfig, TwoStageError, TwoStageFile, TwoStageInstance};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error(transparent)]
    TwoStage(#[from] TwoStageError),
    #[error(transparent)]
    Scheduling(#[from] SchedError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Application {
    TwoStage,
    Scheduling,
}

/// Instance grid of a dataset. Every cell of the cartesian product gets
/// `per_cell` instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "application", rename_all = "snake_case")]
pub enum DatasetSpec {
    TwoStage {
        widths: Vec<usize>,
        ks: Vec<i64>,
        scenarios: Vec<usize>,
        per_cell: usize,
        seed: u64,
        /// Subgradient iterations of the stored Lagrangian bound.
        #[serde(default = "default_lagrangian_iters")]
        lagrangian_iters: usize,
    },
    Scheduling {
        sizes: Vec<usize>,
        rhos: Vec<f64>,
        per_cell: usize,
        seed: u64,
    },
}

fn default_lagrangian_iters() -> usize {
    learning::loss::DEFAULT_BOUND_ITERATIONS
}

impl DatasetSpec {
    pub fn application(&self) -> Application {
        match self {
            DatasetSpec::TwoStage { .. } => Application::TwoStage,
            DatasetSpec::Scheduling { .. } => Application::Scheduling,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            DatasetSpec::TwoStage { seed, .. } | DatasetSpec::Scheduling { seed, .. } => *seed,
        }
    }

    pub fn with_seed(mut self, new_seed: u64) -> Self {
        match &mut self {
            DatasetSpec::TwoStage { seed, .. } | DatasetSpec::Scheduling { seed, .. } => {
                *seed = new_seed
            }
        }
        self
    }

    /// Desk-scale two-stage grid: widths {4,5,6}, K {10,20}, 3 or 5
    /// scenarios, two instances per cell (24 instances).
    pub fn two_stage_desk(seed: u64) -> Self {
        DatasetSpec::TwoStage {
            widths: vec![4, 5, 6],
            ks: vec![10, 20],
            scenarios: vec![3, 5],
            per_cell: 2,
            seed,
            lagrangian_iters: default_lagrangian_iters(),
        }
    }

    /// Desk-scale scheduling grid: n in {8, 20}, ρ in {0.2, 1.0, 3.0}, three
    /// instances per cell (18 instances).
    pub fn scheduling_desk(seed: u64) -> Self {
        DatasetSpec::Scheduling {
            sizes: vec![8, 20],
            rhos: vec![0.2, 1.0, 3.0],
            per_cell: 3,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMethod {
    #[default]
    Experience,
    Imitation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub method: TrainMethod,
    pub learner: LearnerConfig,
    /// Perturbed loss with common random numbers; `None` trains on the plain
    /// loss.
    pub perturbation: Option<PerturbationConfig>,
    /// Post-processing inside the scheduling training loss.
    pub post: PostProcessing,
    pub fyl: FylConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: TrainMethod::Experience,
            learner: LearnerConfig::default(),
            perturbation: None,
            post: PostProcessing::None,
            fyl: FylConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Samples of the perturbed scheduling decoder.
    pub perturbed_samples: usize,
    pub sigma: f64,
    pub seed: u64,
    /// Subgradient iterations behind the Lagrangian heuristic benchmark.
    pub lagrangian_iters: usize,
    /// Record wall-clock times; when off every `time_s` is written as 0.
    pub timing: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            perturbed_samples: 150,
            sigma: 0.1,
            seed: 0,
            lagrangian_iters: default_lagrangian_iters(),
            timing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        read_json(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    /// Size bucket used by the summary table.
    pub bucket: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub application: Application,
    pub dataset: DatasetSpec,
    pub instances: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FILE: &str = "weights.json";
pub const REPORT_FILE: &str = "report.json";
pub const GAPS_FILE: &str = "gaps.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ExperimentError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| ExperimentError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| ExperimentError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn instance_seed(base: u64, index: usize) -> u64 {
    base.wrapping_mul(1_000_003).wrapping_add(index as u64)
}

struct Planned {
    entry: ManifestEntry,
    job: Job,
}

enum Job {
    TwoStage {
        width: usize,
        k: i64,
        scenarios: usize,
        seed: u64,
        iters: usize,
    },
    Scheduling {
        n: usize,
        rho: f64,
        seed: u64,
    },
}

fn plan(spec: &DatasetSpec) -> Result<Vec<Planned>, ExperimentError> {
    let mut out = Vec::new();
    match spec {
        DatasetSpec::TwoStage {
            widths,
            ks,
            scenarios,
            per_cell,
            seed,
            lagrangian_iters,
        } => {
            for &width in widths {
                for &k in ks {
                    for &ns in scenarios {
                        for i in 0..*per_cell {
                            let id = format!("w{width}-k{k}-s{ns}-{i}");
                            out.push(Planned {
                                entry: ManifestEntry {
                                    file: format!("instances/{id}.json"),
                                    bucket: format!("V={}", width * width),
                                    id,
                                    lower_bound: None,
                                },
                                job: Job::TwoStage {
                                    width,
                                    k,
                                    scenarios: ns,
                                    seed: instance_seed(*seed, out.len()),
                                    iters: *lagrangian_iters,
                                },
                            });
                        }
                    }
                }
            }
        }
        DatasetSpec::Scheduling {
            sizes,
            rhos,
            per_cell,
            seed,
        } => {
            for &n in sizes {
                for &rho in rhos {
                    for i in 0..*per_cell {
                        let id = format!("n{n}-rho{rho}-{i}");
                        out.push(Planned {
                            entry: ManifestEntry {
                                file: format!("instances/{id}.json"),
                                bucket: format!("n={n}"),
                                id,
                                lower_bound: None,
                            },
                            job: Job::Scheduling {
                                n,
                                rho,
                                seed: instance_seed(*seed, out.len()),
                            },
                        });
                    }
                }
            }
        }
    }
    if out.is_empty() {
        return Err(ExperimentError::Config(
            "dataset spec produces no instances".into(),
        ));
    }
    Ok(out)
}

/// Generates every instance of `spec` into `out/instances/` and writes
/// `out/manifest.json`. Two-stage entries carry their Lagrangian bound.
pub fn cmd_generate(spec: &DatasetSpec, out: &Path) -> Result<Manifest, ExperimentError> {
    let planned = plan(spec)?;
    let dir = out.join("instances");
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let entries: Vec<(ManifestEntry, String)> = planned
        .into_par_iter()
        .map(|Planned { mut entry, job }| {
            let text = match job {
                Job::TwoStage {
                    width,
                    k,
                    scenarios,
                    seed,
                    iters,
                } => {
                    let x = two_stage::generate_instance(width, k, scenarios, seed)?;
                    let lb = two_stage::lagrangian_bound(&x, iters, &SubgradientConfig::default());
                    entry.lower_bound = Some(lb.lower_bound);
                    serde_json::to_string(&x.to_file()?)
                }
                Job::Scheduling { n, rho, seed } => {
                    let x = scheduling::generate_sched_instance(n, rho, seed)?;
                    serde_json::to_string(&x.to_file())
                }
            }
            .expect("instance files serialize");
            Ok::<_, ExperimentError>((entry, text))
        })
        .collect::<Result<_, _>>()?;

    let mut instances = Vec::with_capacity(entries.len());
    for (entry, text) in entries {
        let path = out.join(&entry.file);
        fs::write(&path, text + "\n").map_err(io_err(&path))?;
        instances.push(entry);
    }
    let manifest = Manifest {
        application: spec.application(),
        dataset: spec.clone(),
        instances,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// A dataset read back from disk.
#[derive(Debug, Clone)]
pub enum Dataset {
    TwoStage(Vec<(ManifestEntry, TwoStageInstance)>),
    Scheduling(Vec<(ManifestEntry, SchedInstance)>),
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<(Manifest, Self), ExperimentError> {
        let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
        let data = match manifest.application {
            Application::TwoStage => Dataset::TwoStage(
                manifest
                    .instances
                    .iter()
                    .map(|e| {
                        let file: TwoStageFile = read_json(&dir.join(&e.file))?;
                        Ok((e.clone(), TwoStageInstance::from_file(&file)?))
                    })
                    .collect::<Result<_, ExperimentError>>()?,
            ),
            Application::Scheduling => Dataset::Scheduling(
                manifest
                    .instances
                    .iter()
                    .map(|e| {
                        let file: SchedFile = read_json(&dir.join(&e.file))?;
                        Ok((e.clone(), SchedInstance::from_file(&file)?))
                    })
                    .collect::<Result<_, ExperimentError>>()?,
            ),
        };
        Ok((manifest, data))
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::TwoStage(v) => v.len(),
            Dataset::Scheduling(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn lower_bound_of(entry: &ManifestEntry, x: &TwoStageInstance) -> f64 {
    entry.lower_bound.unwrap_or_else(|| {
        two_stage::lagrangian_bound(x, default_lagrangian_iters(), &SubgradientConfig::default())
            .lower_bound
    })
}

pub fn two_stage_cases(data: &[(ManifestEntry, TwoStageInstance)]) -> Vec<TwoStageCase> {
    data.par_iter()
        .map(|(e, x)| TwoStageCase::new(x.clone(), lower_bound_of(e, x)))
        .collect()
}

pub fn sched_cases(
    data: &[(ManifestEntry, SchedInstance)],
    post: PostProcessing,
) -> Vec<SchedCase> {
    data.iter()
        .map(|(_, x)| SchedCase::new(x.clone(), post))
        .collect()
}

fn hash_json<T: Serialize>(value: &T) -> String {
    hex::encode(Sha256::digest(
        serde_json::to_vec(value).expect("configs serialize"),
    ))
}

/// Learns weights on the dataset in `data_dir` and writes
/// `out/weights.json` and `out/report.json`.
pub fn cmd_train(
    cfg: &TrainConfig,
    data_dir: &Path,
    out: &Path,
) -> Result<(WeightVector, TrainingReport), ExperimentError> {
    let (manifest, data) = Dataset::load(data_dir)?;
    let loss_cfg = LossConfig {
        perturbation: cfg.perturbation,
    };
    let (w, report) = match (cfg.method, &data) {
        (TrainMethod::Experience, Dataset::TwoStage(v)) => {
            learn_by_experience(&two_stage_cases(v), &cfg.learner, &loss_cfg)?
        }
        (TrainMethod::Experience, Dataset::Scheduling(v)) => {
            learn_by_experience(&sched_cases(v, cfg.post), &cfg.learner, &loss_cfg)?
        }
        (TrainMethod::Imitation, Dataset::TwoStage(v)) => {
            let iters = match manifest.dataset {
                DatasetSpec::TwoStage {
                    lagrangian_iters, ..
                } => lagrangian_iters,
                DatasetSpec::Scheduling { .. } => default_lagrangian_iters(),
            };
            train_imitation(v, &cfg.fyl, iters)?
        }
        (TrainMethod::Imitation, Dataset::Scheduling(_)) => {
            return Err(ExperimentError::Config(
                "imitation training is only available for two-stage datasets".into(),
            ))
        }
    };
    fs::create_dir_all(out).map_err(io_err(out))?;
    write_json(&out.join(WEIGHTS_FILE), &w)?;
    write_json(&out.join(REPORT_FILE), &report)?;
    Ok((w, report))
}

/// Fenchel-Young imitation of the Lagrangian heuristic, started from the
/// approximation weights.
fn train_imitation(
    data: &[(ManifestEntry, TwoStageInstance)],
    fyl: &FylConfig,
    iters: usize,
) -> Result<(WeightVector, TrainingReport), ExperimentError> {
    let targets: Vec<TwoStageImitation> = data
        .par_iter()
        .map(|(_, x)| {
            let lb = two_stage::lagrangian_bound(x, iters, &SubgradientConfig::default());
            let z = two_stage::lagrangian_heuristic(x, &lb.duals);
            TwoStageImitation::from_solution(x.clone(), &z)
        })
        .collect::<Result<_, _>>()?;
    let w = learning::fyl_learn(&targets, fyl, Some(&two_stage::approx_weights()))?;
    let risk = empirical_risk(&two_stage_cases(data), w.values(), None)?;
    let report = TrainingReport {
        per_seed: vec![SeedReport {
            seed: fyl.seed,
            best_value: risk,
            evals: fyl.steps,
        }],
        best_w: w.values().to_vec(),
        config_hash: hash_json(fyl),
    };
    Ok((w, report))
}

/// One row of the gap table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub instance_id: String,
    pub algorithm: String,
    pub cost: f64,
    pub reference: f64,
    pub gap_pct: f64,
    pub time_s: f64,
}

/// Aggregate of one algorithm over one size bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub bucket: String,
    pub algorithm: String,
    pub instances: usize,
    pub delta_avg_pct: f64,
    pub delta_max_pct: f64,
}

/// `100 (cost - reference) / max(1, |reference|)`.
pub fn gap_pct(cost: f64, reference: f64) -> f64 {
    100.0 * (cost - reference) / reference.abs().max(1.0)
}

/// δ^avg and δ^max per (bucket, algorithm), buckets and algorithms in
/// order of first appearance.
pub fn summarize(records: &[GapRecord], bucket_of: &BTreeMap<String, String>) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String)> = Vec::new();
    let mut gaps: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for r in records {
        let bucket = bucket_of.get(&r.instance_id).cloned().unwrap_or_default();
        let key = (bucket, r.algorithm.clone());
        if !gaps.contains_key(&key) {
            keys.push(key.clone());
        }
        gaps.entry(key).or_default().push(r.gap_pct);
    }
    keys.into_iter()
        .map(|key| {
            let g = &gaps[&key];
            SummaryRow {
                instances: g.len(),
                delta_avg_pct: g.iter().sum::<f64>() / g.len() as f64,
                delta_max_pct: g.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                bucket: key.0,
                algorithm: key.1,
            }
        })
        .collect()
}

fn timed<T>(timing: bool, f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let value = f();
    let secs = if timing {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    };
    (value, secs)
}

fn eval_two_stage(
    entry: &ManifestEntry,
    x: &TwoStageInstance,
    w: &WeightVector,
    cfg: &EvalConfig,
) -> Result<Vec<GapRecord>, ExperimentError> {
    let reference = lower_bound_of(entry, x);
    let case = TwoStageCase::new(x.clone(), reference);
    let mut rows = Vec::with_capacity(3);
    let mut push = |algorithm: &str, cost: f64, time_s: f64| {
        rows.push(GapRecord {
            instance_id: entry.id.clone(),
            algorithm: algorithm.to_string(),
            cost,
            reference,
            gap_pct: gap_pct(cost, reference),
            time_s,
        })
    };

    let (learned, t) = timed(cfg.timing, || case.solve(w.values()));
    push("learned", learned?.1, t);
    let (approx, t) = timed(cfg.timing, || {
        let z = two_stage::approx_baseline(x);
        two_stage::evaluate_solution(x, &z)
    });
    push("approx", approx?, t);
    let (heuristic, t) = timed(cfg.timing, || {
        let lb =
            two_stage::lagrangian_bound(x, cfg.lagrangian_iters, &SubgradientConfig::default());
        let z = two_stage::lagrangian_heuristic(x, &lb.duals);
        two_stage::evaluate_solution(x, &z)
    });
    push("lagrangian_heuristic", heuristic?, t);
    Ok(rows)
}

fn eval_scheduling(
    entry: &ManifestEntry,
    x: &SchedInstance,
    w: &WeightVector,
    cfg: &EvalConfig,
) -> Result<Vec<GapRecord>, ExperimentError> {
    let phi = scheduling::features(x);
    let pert = PerturbationConfig {
        sigma: cfg.sigma,
        nsamples: cfg.perturbed_samples,
        seed: cfg.seed,
    };
    let mut runs: Vec<(&str, f64, f64)> = Vec::with_capacity(4);
    let (r, t) = timed(cfg.timing, || {
        scheduling::run_pipeline(x, &phi, w.values(), PostProcessing::None)
    });
    runs.push(("learned", r?.1, t));
    let (r, t) = timed(cfg.timing, || {
        scheduling::run_pipeline(x, &phi, w.values(), PostProcessing::LocalSearch)
    });
    runs.push(("learned_ls", r?.1, t));
    let (r, t) = timed(cfg.timing, || {
        scheduling::perturbed_decode(x, &phi, w.values(), &pert, PostProcessing::LocalSearch)
    });
    runs.push(("learned_pert_ls", r?.1, t));
    if x.n() <= scheduling::BRUTE_FORCE_JOB_LIMIT {
        let (r, t) = timed(cfg.timing, || scheduling::brute_force_schedule(x));
        runs.push(("brute_force", r?.0, t));
    }
    let reference = runs.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(runs
        .into_iter()
        .map(|(algorithm, cost, time_s)| GapRecord {
            instance_id: entry.id.clone(),
            algorithm: algorithm.to_string(),
            cost,
            reference,
            gap_pct: gap_pct(cost, reference),
            time_s,
        })
        .collect())
}

/// Evaluates the weights in `weights` on the dataset in `data_dir` and
/// writes `out/gaps.csv` and `out/summary.csv`.
pub fn cmd_eval(
    cfg: &EvalConfig,
    data_dir: &Path,
    weights: &Path,
    out: &Path,
) -> Result<(Vec<GapRecord>, Vec<SummaryRow>), ExperimentError> {
    let (manifest, data) = Dataset::load(data_dir)?;
    let w: WeightVector = read_json::<WeightVector>(weights)?.validated()?;
    let per_instance: Vec<Vec<GapRecord>> = match &data {
        Dataset::TwoStage(v) => v
            .par_iter()
            .map(|(e, x)| eval_two_stage(e, x, &w, cfg))
            .collect::<Result<_, _>>()?,
        Dataset::Scheduling(v) => v
            .par_iter()
            .map(|(e, x)| eval_scheduling(e, x, &w, cfg))
            .collect::<Result<_, _>>()?,
    };
    let records: Vec<GapRecord> = per_instance.into_iter().flatten().collect();
    let buckets: BTreeMap<String, String> = manifest
        .instances
        .iter()
        .map(|e| (e.id.clone(), e.bucket.clone()))
        .collect();
    let summary = summarize(&records, &buckets);

    fs::create_dir_all(out).map_err(io_err(out))?;
    write_csv(&out.join(GAPS_FILE), &records)?;
    write_csv(&out.join(SUMMARY_FILE), &summary)?;
    Ok((records, summary))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ExperimentError> {
    let csv_err = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        writer.serialize(row).map_err(csv_err)?;
    }
    writer.flush().map_err(io_err(path))
}

pub fn read_gaps(path: &Path) -> Result<Vec<GapRecord>, ExperimentError> {
    let csv_err = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    reader
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(csv_err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    #[serde(rename = "C")]
    pub c: f64,
    pub excess_risk_bound: f64,
    pub sigma_n: f64,
}

pub fn cmd_bounds(params: &BoundParams) -> Result<BoundsReport, ExperimentError> {
    Ok(BoundsReport {
        c: learning::constant_c(),
        excess_risk_bound: learning::excess_risk_bound(params)?,
        sigma_n: learning::sigma_n(params)?,
    })
}
