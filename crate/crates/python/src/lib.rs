//! Python bindings for the `copipe` pipelines.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use copipe::experiment::{self, DatasetSpec, EvalConfig, TrainConfig};
use copipe::graphs;
use copipe::learning::{self, BoundParams, LearnerConfig, LossConfig};
use copipe::model::PerturbationConfig;
use copipe::scheduling::{self, Permutation, PostProcessing};
use copipe::two_stage::{self, SubgradientConfig, ThetaVector};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn post_processing(local_search: bool) -> PostProcessing {
    if local_search {
        PostProcessing::LocalSearch
    } else {
        PostProcessing::None
    }
}

/// Undirected simple graph on vertices `0..n`.
#[pyclass(frozen)]
struct Graph {
    inner: graphs::Graph,
}

#[pymethods]
impl Graph {
    #[new]
    fn new(num_vertices: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        graphs::Graph::new(num_vertices, edges)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    /// Grid with `width * height` vertices.
    #[staticmethod]
    fn grid(width: usize, height: usize) -> PyResult<Self> {
        graphs::grid_graph(width, height)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    /// Edge ids of a minimum spanning tree.
    fn mst(&self, weights: Vec<f64>) -> PyResult<Vec<usize>> {
        graphs::mst_kruskal(&self.inner, &weights)
            .map(|t| t.edge_ids().to_vec())
            .map_err(value_err)
    }

    /// Edge ids of a minimum spanning tree containing every edge of `forced`.
    fn mst_constrained(&self, weights: Vec<f64>, forced: Vec<usize>) -> PyResult<Vec<usize>> {
        graphs::mst_constrained(&self.inner, &weights, &graphs::Forest::from_edges(forced))
            .map(|t| t.edge_ids().to_vec())
            .map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(num_vertices={}, num_edges={})",
            self.inner.num_vertices(),
            self.inner.num_edges()
        )
    }
}

/// Two-stage stochastic maximum weight spanning tree instance.
#[pyclass(frozen)]
struct TwoStageInstance {
    inner: two_stage::TwoStageInstance,
}

#[pymethods]
impl TwoStageInstance {
    /// `d[e][s]` is the second-stage cost of edge `e` in scenario `s`.
    #[new]
    fn new(graph: &Graph, c: Vec<f64>, d: Vec<Vec<f64>>) -> PyResult<Self> {
        two_stage::TwoStageInstance::new(graph.inner.clone(), c, d)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn generate(width: usize, k: i64, num_scenarios: usize, seed: u64) -> PyResult<Self> {
        two_stage::generate_instance(width, k, num_scenarios, seed)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    #[getter]
    fn num_scenarios(&self) -> usize {
        self.inner.num_scenarios()
    }

    fn first_stage_costs(&self) -> Vec<f64> {
        self.inner.first_stage_costs().to_vec()
    }

    /// Feature matrix as a list of rows, first-stage rows then second-stage.
    fn features(&self) -> Vec<Vec<f64>> {
        let phi = two_stage::features(&self.inner);
        (0..phi.rows()).map(|i| phi.row(i).to_vec()).collect()
    }

    /// Pipeline at `theta` (first-stage entries then second-stage entries);
    /// returns the first-stage edge ids and the cost.
    fn run_pipeline(&self, theta: Vec<f64>) -> PyResult<(Vec<usize>, f64)> {
        let theta = ThetaVector::from_flat(&theta, self.inner.num_edges()).map_err(value_err)?;
        let (z, cost) = two_stage::run_pipeline(&self.inner, &theta).map_err(value_err)?;
        Ok((z.first_stage.edge_ids().to_vec(), cost))
    }

    /// Cost reached by the linear model with weights `w`.
    fn pipeline_cost(&self, w: Vec<f64>) -> PyResult<f64> {
        let case = learning::TwoStageCase::new(self.inner.clone(), 0.0);
        case.solve(&w).map(|(_, cost)| cost).map_err(value_err)
    }

    fn approx_baseline_cost(&self) -> PyResult<f64> {
        let z = two_stage::approx_baseline(&self.inner);
        two_stage::evaluate_solution(&self.inner, &z).map_err(value_err)
    }

    /// Best Lagrangian lower bound after `iterations` subgradient steps and
    /// the cost of the Lagrangian heuristic built from the final duals.
    #[pyo3(signature = (iterations = 500))]
    fn lagrangian(&self, py: Python<'_>, iterations: usize) -> PyResult<(f64, f64)> {
        py.detach(|| {
            let lb =
                two_stage::lagrangian_bound(&self.inner, iterations, &SubgradientConfig::default());
            let z = two_stage::lagrangian_heuristic(&self.inner, &lb.duals);
            two_stage::evaluate_solution(&self.inner, &z).map(|cost| (lb.lower_bound, cost))
        })
        .map_err(value_err)
    }

    /// Exact optimum and its first-stage edges (at most 12 edges).
    fn brute_force(&self) -> PyResult<(f64, Vec<usize>)> {
        two_stage::brute_force_optimum(&self.inner)
            .map(|(cost, z)| (cost, z.first_stage.edge_ids().to_vec()))
            .map_err(value_err)
    }

    fn to_json(&self) -> PyResult<String> {
        let file = self.inner.to_file().map_err(value_err)?;
        serde_json::to_string(&file).map_err(value_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let file: two_stage::TwoStageFile = serde_json::from_str(text).map_err(value_err)?;
        two_stage::TwoStageInstance::from_file(&file)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }
}

/// Single machine instance with processing times and release dates.
#[pyclass(frozen)]
struct SchedInstance {
    inner: scheduling::SchedInstance,
}

#[pymethods]
impl SchedInstance {
    #[new]
    fn new(p: Vec<f64>, r: Vec<f64>) -> PyResult<Self> {
        scheduling::SchedInstance::new(p, r)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn generate(n: usize, rho: f64, seed: u64) -> PyResult<Self> {
        scheduling::generate_sched_instance(n, rho, seed)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn processing_times(&self) -> Vec<f64> {
        self.inner.processing_times().to_vec()
    }

    fn release_times(&self) -> Vec<f64> {
        self.inner.release_times().to_vec()
    }

    /// Total completion time of the job order.
    fn evaluate(&self, order: Vec<usize>) -> PyResult<f64> {
        let s = Permutation::new(order).map_err(value_err)?;
        scheduling::evaluate_schedule(&self.inner, &s)
            .map(|(total, _)| total)
            .map_err(value_err)
    }

    fn srpt_total(&self) -> f64 {
        scheduling::srpt_preemptive(&self.inner)
            .completion
            .iter()
            .sum()
    }

    fn features(&self) -> Vec<Vec<f64>> {
        let phi = scheduling::features(&self.inner);
        (0..phi.rows()).map(|i| phi.row(i).to_vec()).collect()
    }

    /// Order and total completion time produced by the weights `w`.
    #[pyo3(signature = (w, local_search = false))]
    fn run_pipeline(&self, w: Vec<f64>, local_search: bool) -> PyResult<(Vec<usize>, f64)> {
        let phi = scheduling::features(&self.inner);
        scheduling::run_pipeline(&self.inner, &phi, &w, post_processing(local_search))
            .map(|(s, cost)| (s.into_inner(), cost))
            .map_err(value_err)
    }

    /// Best pipeline output over `w` and `nsamples` Gaussian perturbations.
    #[pyo3(signature = (w, sigma, nsamples = 150, seed = 0, local_search = true))]
    fn perturbed_decode(
        &self,
        py: Python<'_>,
        w: Vec<f64>,
        sigma: f64,
        nsamples: usize,
        seed: u64,
        local_search: bool,
    ) -> PyResult<(Vec<usize>, f64)> {
        let phi = scheduling::features(&self.inner);
        let cfg = PerturbationConfig {
            sigma,
            nsamples,
            seed,
        };
        py.detach(|| {
            scheduling::perturbed_decode(&self.inner, &phi, &w, &cfg, post_processing(local_search))
        })
        .map(|(s, cost)| (s.into_inner(), cost))
        .map_err(value_err)
    }

    /// Exact optimum by enumeration (at most 9 jobs).
    fn brute_force(&self) -> PyResult<(f64, Vec<usize>)> {
        scheduling::brute_force_schedule(&self.inner)
            .map(|(cost, s)| (cost, s.into_inner()))
            .map_err(value_err)
    }
}

fn learner(box_radius: f64, budget: usize, seeds: Vec<u64>) -> LearnerConfig {
    LearnerConfig {
        box_radius,
        budget,
        seeds,
    }
}

fn loss_config(sigma: f64, nsamples: usize, seed: u64) -> LossConfig {
    LossConfig {
        perturbation: (sigma > 0.0).then_some(PerturbationConfig {
            sigma,
            nsamples,
            seed,
        }),
    }
}

/// Learns weights by experience on two-stage instances; returns the weights
/// and the best risk per seed.
#[pyfunction]
#[pyo3(signature = (instances, budget = 1000, seeds = None, box_radius = 10.0, sigma = 0.0, nsamples = 20, sample_seed = 0))]
#[allow(clippy::too_many_arguments)]
fn learn_two_stage(
    py: Python<'_>,
    instances: Vec<PyRef<'_, TwoStageInstance>>,
    budget: usize,
    seeds: Option<Vec<u64>>,
    box_radius: f64,
    sigma: f64,
    nsamples: usize,
    sample_seed: u64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let instances: Vec<_> = instances.iter().map(|x| x.inner.clone()).collect();
    let learner = learner(
        box_radius,
        budget,
        seeds.unwrap_or_else(|| (0..10).collect()),
    );
    let loss_cfg = loss_config(sigma, nsamples, sample_seed);
    py.detach(|| {
        let cases: Vec<_> = instances
            .into_iter()
            .map(learning::TwoStageCase::with_computed_bound)
            .collect();
        learning::learn_by_experience(&cases, &learner, &loss_cfg)
    })
    .map(|(w, report)| {
        let values = report.per_seed.iter().map(|r| r.best_value).collect();
        (w.values().to_vec(), values)
    })
    .map_err(value_err)
}

/// Learns scheduling weights by experience.
#[pyfunction]
#[pyo3(signature = (instances, budget = 1000, seeds = None, box_radius = 10.0, local_search = false))]
fn learn_scheduling(
    py: Python<'_>,
    instances: Vec<PyRef<'_, SchedInstance>>,
    budget: usize,
    seeds: Option<Vec<u64>>,
    box_radius: f64,
    local_search: bool,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let cases: Vec<_> = instances
        .iter()
        .map(|x| learning::SchedCase::new(x.inner.clone(), post_processing(local_search)))
        .collect();
    let learner = learner(
        box_radius,
        budget,
        seeds.unwrap_or_else(|| (0..10).collect()),
    );
    py.detach(|| learning::learn_by_experience(&cases, &learner, &LossConfig::default()))
        .map(|(w, report)| {
            let values = report.per_seed.iter().map(|r| r.best_value).collect();
            (w.values().to_vec(), values)
        })
        .map_err(value_err)
}

/// Weights reproducing the approximation algorithm on two-stage instances.
#[pyfunction]
fn approx_weights() -> Vec<f64> {
    two_stage::approx_weights()
}

#[pyfunction]
fn constant_c() -> f64 {
    learning::constant_c()
}

#[allow(clippy::too_many_arguments)]
fn bound_params(
    m: f64,
    d: f64,
    sigma: f64,
    n: f64,
    delta: f64,
    b: f64,
    kappa: f64,
    e_term: f64,
) -> BoundParams {
    BoundParams {
        m,
        d,
        sigma,
        n,
        delta,
        b,
        kappa,
        e_term,
        ..BoundParams::default()
    }
}

#[pyfunction]
#[pyo3(signature = (m, d, sigma, n, delta))]
fn excess_risk_bound(m: f64, d: f64, sigma: f64, n: f64, delta: f64) -> PyResult<f64> {
    learning::excess_risk_bound(&bound_params(m, d, sigma, n, delta, 1.0, 1.0, 1.0))
        .map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (m, d, n, b = 1.0, kappa = 1.0, e_term = 1.0))]
fn sigma_n(m: f64, d: f64, n: f64, b: f64, kappa: f64, e_term: f64) -> PyResult<f64> {
    learning::sigma_n(&bound_params(m, d, 1.0, n, 0.5, b, kappa, e_term)).map_err(value_err)
}

/// Writes a dataset described by a JSON dataset spec; returns the number of
/// instances.
#[pyfunction]
fn generate_dataset(py: Python<'_>, spec_json: &str, out: PathBuf) -> PyResult<usize> {
    let spec: DatasetSpec = serde_json::from_str(spec_json).map_err(value_err)?;
    py.detach(|| experiment::cmd_generate(&spec, &out))
        .map(|m| m.instances.len())
        .map_err(value_err)
}

/// Trains on a dataset directory with a JSON train config; returns the
/// training report as JSON.
#[pyfunction]
fn train(py: Python<'_>, config_json: &str, data: PathBuf, out: PathBuf) -> PyResult<String> {
    let cfg: TrainConfig = serde_json::from_str(config_json).map_err(value_err)?;
    let (_, report) = py
        .detach(|| experiment::cmd_train(&cfg, &data, &out))
        .map_err(value_err)?;
    serde_json::to_string(&report).map_err(value_err)
}

type SummaryTuple = (String, String, usize, f64, f64);

/// Evaluates weights on a dataset; returns the summary rows as
/// `(bucket, algorithm, instances, delta_avg_pct, delta_max_pct)`.
#[pyfunction]
fn evaluate(
    py: Python<'_>,
    config_json: &str,
    data: PathBuf,
    weights: PathBuf,
    out: PathBuf,
) -> PyResult<Vec<SummaryTuple>> {
    let cfg: EvalConfig = serde_json::from_str(config_json).map_err(value_err)?;
    let (_, summary) = py
        .detach(|| experiment::cmd_eval(&cfg, &data, &weights, &out))
        .map_err(value_err)?;
    Ok(summary
        .into_iter()
        .map(|r| {
            (
                r.bucket,
                r.algorithm,
                r.instances,
                r.delta_avg_pct,
                r.delta_max_pct,
            )
        })
        .collect())
}

#[pymodule]
fn copipe_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graph>()?;
    m.add_class::<TwoStageInstance>()?;
    m.add_class::<SchedInstance>()?;
    m.add_function(wrap_pyfunction!(learn_two_stage, m)?)?;
    m.add_function(wrap_pyfunction!(learn_scheduling, m)?)?;
    m.add_function(wrap_pyfunction!(approx_weights, m)?)?;
    m.add_function(wrap_pyfunction!(constant_c, m)?)?;
    m.add_function(wrap_pyfunction!(excess_risk_bound, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_n, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add("TWO_STAGE_FEATURE_DIM", two_stage::FEATURE_DIM)?;
    m.add("SCHEDULING_FEATURE_DIM", scheduling::FEATURE_DIM)?;
    Ok(())
}
