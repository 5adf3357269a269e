//! Two-stage spanning tree problem.
//!
//! An edge `e` bought in the first stage costs `c_e`; bought in scenario `s`
//! it costs `d_es`. A solution picks a first-stage edge set `E1` and, per
//! scenario, a completion `E_s` such that `E1 ∪ E_s` is a spanning tree. The
//! cost is `Σ_{E1} c_e + (1/|S|) Σ_s Σ_{E_s} d_es`. Costs are non-positive
//! (the maximum-weight variant written as a minimization).
//!
//! The pipeline solves the single-scenario surrogate (a spanning tree on
//! `min(c̄_e, d̄_e)`) and decodes its first stage back into a two-stage
//! solution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::{
    grid_graph, kruskal_from_order, mst_kruskal, sorted_edge_order, Forest, Graph, GraphError,
    UnionFind,
};
use crate::model::{quantiles5, FeatureMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwoStageError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("instance needs at least one scenario")]
    NoScenario,
    #[error("first-stage cost of edge {edge} is {value}, expected a finite value <= 0")]
    BadFirstStageCost { edge: usize, value: f64 },
    #[error("second-stage cost of edge {edge} in scenario {scenario} is {value}, expected a finite value <= 0")]
    BadSecondStageCost {
        edge: usize,
        scenario: usize,
        value: f64,
    },
    #[error("expected {expected} {what}, got {actual}")]
    Length {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("solution infeasible in scenario {scenario}: {reason}")]
    Infeasible { scenario: usize, reason: String },
    #[error("brute force limited to {limit} edges, instance has {actual}")]
    TooLarge { limit: usize, actual: usize },
    #[error("instance file is not a grid instance")]
    NotGrid,
}

/// Generator metadata carried by grid instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridMeta {
    pub width: usize,
    pub k: i64,
    pub seed: u64,
}

/// A two-stage spanning tree instance.
#[derive(Debug, Clone)]
pub struct TwoStageInstance {
    graph: Graph,
    c: Vec<f64>,
    /// `d[e][s]`
    d: Vec<Vec<f64>>,
    /// `d_by_scenario[s][e]`
    d_by_scenario: Vec<Vec<f64>>,
    scenario_orders: Vec<Vec<usize>>,
    empty_first_stage: TwoStageSolution,
    empty_first_stage_cost: f64,
    grid: Option<GridMeta>,
}

impl TwoStageInstance {
    /// `d` is edge-major: `d[e][s]`.
    pub fn new(graph: Graph, c: Vec<f64>, d: Vec<Vec<f64>>) -> Result<Self, TwoStageError> {
        let m = graph.num_edges();
        if c.len() != m {
            return Err(TwoStageError::Length {
                what: "first-stage costs",
                expected: m,
                actual: c.len(),
            });
        }
        if d.len() != m {
            return Err(TwoStageError::Length {
                what: "second-stage cost rows",
                expected: m,
                actual: d.len(),
            });
        }
        let num_scenarios = d.first().map_or(0, Vec::len);
        if num_scenarios == 0 {
            return Err(TwoStageError::NoScenario);
        }
        for (edge, &value) in c.iter().enumerate() {
            if !(value.is_finite() && value <= 0.0) {
                return Err(TwoStageError::BadFirstStageCost { edge, value });
            }
        }
        for (edge, row) in d.iter().enumerate() {
            if row.len() != num_scenarios {
                return Err(TwoStageError::Length {
                    what: "scenarios",
                    expected: num_scenarios,
                    actual: row.len(),
                });
            }
            for (scenario, &value) in row.iter().enumerate() {
                if !(value.is_finite() && value <= 0.0) {
                    return Err(TwoStageError::BadSecondStageCost {
                        edge,
                        scenario,
                        value,
                    });
                }
            }
        }
        let d_by_scenario: Vec<Vec<f64>> = (0..num_scenarios)
            .map(|s| d.iter().map(|row| row[s]).collect())
            .collect();
        let scenario_orders = d_by_scenario.iter().map(|w| sorted_edge_order(w)).collect();
        let mut inst = Self {
            graph,
            c,
            d,
            d_by_scenario,
            scenario_orders,
            empty_first_stage: TwoStageSolution {
                first_stage: Forest::empty(),
                second_stage: Vec::new(),
            },
            empty_first_stage_cost: 0.0,
            grid: None,
        };
        let empty = inst.complete_first_stage(&Forest::empty())?;
        inst.empty_first_stage_cost = inst.cost_unchecked(&empty);
        inst.empty_first_stage = empty;
        Ok(inst)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn first_stage_costs(&self) -> &[f64] {
        &self.c
    }

    /// Second-stage costs of scenario `s`, indexed by edge.
    pub fn scenario_costs(&self, s: usize) -> &[f64] {
        &self.d_by_scenario[s]
    }

    /// Second-stage costs of edge `e`, indexed by scenario.
    pub fn edge_scenario_costs(&self, e: usize) -> &[f64] {
        &self.d[e]
    }

    pub fn num_edges(&self) -> usize {
        self.graph.num_edges()
    }

    pub fn num_scenarios(&self) -> usize {
        self.d_by_scenario.len()
    }

    /// Number of θ entries, `2·|E|`.
    pub fn dim(&self) -> usize {
        2 * self.graph.num_edges()
    }

    pub fn grid(&self) -> Option<GridMeta> {
        self.grid
    }

    pub fn mean_second_stage(&self, e: usize) -> f64 {
        self.d[e].iter().sum::<f64>() / self.num_scenarios() as f64
    }

    /// The candidate with no first stage: one minimum spanning tree per
    /// scenario.
    pub fn empty_first_stage(&self) -> (&TwoStageSolution, f64) {
        (&self.empty_first_stage, self.empty_first_stage_cost)
    }

    /// Optimal second-stage completion of a first-stage forest: per scenario,
    /// the cheapest spanning tree containing `first_stage`, minus it.
    pub fn complete_first_stage(
        &self,
        first_stage: &Forest,
    ) -> Result<TwoStageSolution, TwoStageError> {
        let mut base = UnionFind::new(self.graph.num_vertices());
        for &e in first_stage.edge_ids() {
            if e >= self.num_edges() {
                return Err(GraphError::UnknownEdge(e).into());
            }
            let (u, v) = self.graph.edge(e);
            if !base.union(u, v) {
                return Err(GraphError::CyclicForest(e).into());
            }
        }
        let second_stage = self
            .scenario_orders
            .iter()
            .map(|order| {
                let mut uf = base.clone();
                let mut added = Vec::new();
                kruskal_from_order(&self.graph, order, &mut uf, &mut added);
                Forest::from_edges(added)
            })
            .collect();
        Ok(TwoStageSolution {
            first_stage: first_stage.clone(),
            second_stage,
        })
    }

    fn cost_unchecked(&self, z: &TwoStageSolution) -> f64 {
        let first: f64 = z.first_stage.weight(&self.c);
        let second: f64 = z
            .second_stage
            .iter()
            .enumerate()
            .map(|(s, es)| es.weight(&self.d_by_scenario[s]))
            .sum();
        first + second / self.num_scenarios() as f64
    }

    pub fn to_file(&self) -> Result<TwoStageFile, TwoStageError> {
        let grid = self.grid.ok_or(TwoStageError::NotGrid)?;
        Ok(TwoStageFile {
            width: grid.width,
            num_scenarios: self.num_scenarios(),
            c: self.c.iter().map(|&v| v as i64).collect(),
            d: self
                .d
                .iter()
                .map(|row| row.iter().map(|&v| v as i64).collect())
                .collect(),
            seed: grid.seed,
            k: grid.k,
        })
    }

    pub fn from_file(file: &TwoStageFile) -> Result<Self, TwoStageError> {
        let graph = grid_graph(file.width, file.width)?;
        let c = file.c.iter().map(|&v| v as f64).collect();
        let d: Vec<Vec<f64>> = file
            .d
            .iter()
            .map(|row| row.iter().map(|&v| v as f64).collect())
            .collect();
        if d.first().map_or(0, Vec::len) != file.num_scenarios {
            return Err(TwoStageError::Length {
                what: "scenarios",
                expected: file.num_scenarios,
                actual: d.first().map_or(0, Vec::len),
            });
        }
        let mut inst = Self::new(graph, c, d)?;
        inst.grid = Some(GridMeta {
            width: file.width,
            k: file.k,
            seed: file.seed,
        });
        Ok(inst)
    }
}

/// On-disk grid instance. `d` is edge-major and edges follow
/// [`grid_graph`] order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoStageFile {
    pub width: usize,
    pub num_scenarios: usize,
    pub c: Vec<i64>,
    pub d: Vec<Vec<i64>>,
    pub seed: u64,
    #[serde(rename = "K")]
    pub k: i64,
}

/// First-stage edges plus one second-stage completion per scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoStageSolution {
    pub first_stage: Forest,
    pub second_stage: Vec<Forest>,
}

/// Solution of the single-scenario surrogate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EasySolution {
    pub first_stage: Forest,
    pub second_stage: Forest,
}

impl EasySolution {
    /// 0/1 incidence over `I(x)`: entries `0..|E|` are first-stage edges,
    /// `|E|..2|E|` second-stage edges.
    pub fn incidence(&self, num_edges: usize) -> Vec<f64> {
        let mut y = vec![0.0; 2 * num_edges];
        for &e in self.first_stage.edge_ids() {
            y[e] = 1.0;
        }
        for &e in self.second_stage.edge_ids() {
            y[num_edges + e] = 1.0;
        }
        y
    }
}

/// Predicted surrogate costs `(c̄_e, d̄_e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector {
    pub cbar: Vec<f64>,
    pub dbar: Vec<f64>,
}

impl ThetaVector {
    /// Splits a flat θ laid out as `[c̄_0..c̄_{m-1}, d̄_0..d̄_{m-1}]`.
    pub fn from_flat(theta: &[f64], num_edges: usize) -> Result<Self, TwoStageError> {
        if theta.len() != 2 * num_edges {
            return Err(TwoStageError::Length {
                what: "theta entries",
                expected: 2 * num_edges,
                actual: theta.len(),
            });
        }
        Ok(Self {
            cbar: theta[..num_edges].to_vec(),
            dbar: theta[num_edges..].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.cbar.clone();
        v.extend_from_slice(&self.dbar);
        v
    }
}

/// Lagrange multipliers `λ_es` of the nonanticipativity constraints, stored
/// scenario-major. Each edge's multipliers sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    values: Vec<Vec<f64>>,
}

impl DualVector {
    pub fn zeros(num_scenarios: usize, num_edges: usize) -> Self {
        Self {
            values: vec![vec![0.0; num_edges]; num_scenarios],
        }
    }

    pub fn scenario(&self, s: usize) -> &[f64] {
        &self.values[s]
    }

    /// `Σ_s λ_es` per edge; zero up to rounding.
    pub fn edge_sums(&self) -> Vec<f64> {
        let m = self.values.first().map_or(0, Vec::len);
        (0..m)
            .map(|e| self.values.iter().map(|row| row[e]).sum())
            .collect()
    }
}

/// Hard two-stage cost of a feasible solution.
pub fn evaluate_solution(x: &TwoStageInstance, z: &TwoStageSolution) -> Result<f64, TwoStageError> {
    check_feasible(x, z)?;
    Ok(x.cost_unchecked(z))
}

fn check_feasible(x: &TwoStageInstance, z: &TwoStageSolution) -> Result<(), TwoStageError> {
    if z.second_stage.len() != x.num_scenarios() {
        return Err(TwoStageError::Length {
            what: "scenario completions",
            expected: x.num_scenarios(),
            actual: z.second_stage.len(),
        });
    }
    let g = x.graph();
    for (scenario, es) in z.second_stage.iter().enumerate() {
        let infeasible = |reason: String| TwoStageError::Infeasible { scenario, reason };
        if let Some(&e) = es
            .edge_ids()
            .iter()
            .chain(z.first_stage.edge_ids())
            .find(|&&e| e >= g.num_edges())
        {
            return Err(infeasible(format!("unknown edge {e}")));
        }
        if let Some(&e) = es.edge_ids().iter().find(|&&e| z.first_stage.contains(e)) {
            return Err(infeasible(format!("edge {e} bought in both stages")));
        }
        let mut all = z.first_stage.edge_ids().to_vec();
        all.extend_from_slice(es.edge_ids());
        if !Forest::from_edges(all).is_spanning_tree(g) {
            return Err(infeasible(
                "first and second stage do not form a spanning tree".into(),
            ));
        }
    }
    Ok(())
}

/// Surrogate objective `Σ_{Ē1} c̄ + Σ_{Ē2} d̄`.
pub fn easy_objective(theta: &ThetaVector, y: &EasySolution) -> f64 {
    y.first_stage.weight(&theta.cbar) + y.second_stage.weight(&theta.dbar)
}

/// Solves the single-scenario surrogate: a minimum spanning tree on
/// `min(c̄_e, d̄_e)`, each tree edge assigned to the cheaper stage (first
/// stage on ties).
pub fn easy_layer(
    x: &TwoStageInstance,
    theta: &ThetaVector,
) -> Result<EasySolution, TwoStageError> {
    let m = x.num_edges();
    if theta.cbar.len() != m || theta.dbar.len() != m {
        return Err(TwoStageError::Length {
            what: "theta entries per stage",
            expected: m,
            actual: theta.cbar.len().min(theta.dbar.len()),
        });
    }
    let weights: Vec<f64> = theta
        .cbar
        .iter()
        .zip(&theta.dbar)
        .map(|(a, b)| a.min(*b))
        .collect();
    let tree = mst_kruskal(x.graph(), &weights)?;
    let (first, second): (Vec<usize>, Vec<usize>) = tree
        .edge_ids()
        .iter()
        .partition(|&&e| theta.cbar[e] <= theta.dbar[e]);
    Ok(EasySolution {
        first_stage: Forest::from_edges(first),
        second_stage: Forest::from_edges(second),
    })
}

/// Turns a surrogate solution into a two-stage solution: keep `Ē1` and
/// complete each scenario optimally, then compare with the empty first
/// stage. Ties keep the completed candidate.
pub fn decode(x: &TwoStageInstance, y: &EasySolution) -> Result<TwoStageSolution, TwoStageError> {
    decode_with_cost(x, y).map(|(z, _)| z)
}

pub(crate) fn decode_with_cost(
    x: &TwoStageInstance,
    y: &EasySolution,
) -> Result<(TwoStageSolution, f64), TwoStageError> {
    let completed = x.complete_first_stage(&y.first_stage)?;
    let completed_cost = x.cost_unchecked(&completed);
    let (empty, empty_cost) = x.empty_first_stage();
    if completed_cost <= empty_cost {
        Ok((completed, completed_cost))
    } else {
        Ok((empty.clone(), empty_cost))
    }
}

/// easy layer followed by decoding; returns the solution and its cost.
pub fn run_pipeline(
    x: &TwoStageInstance,
    theta: &ThetaVector,
) -> Result<(TwoStageSolution, f64), TwoStageError> {
    decode_with_cost(x, &easy_layer(x, theta)?)
}

/// Number of feature columns produced by [`features`].
pub const FEATURE_DIM: usize = 34;

/// Feature column indices.
pub mod columns {
    pub const FIRST_STAGE_COST: usize = 0;
    pub const SECOND_STAGE_MEAN: usize = 1;
    pub const SECOND_STAGE_QUANTILES: usize = 2;
    pub const NEIGHBOR_FIRST_QUANTILES: usize = 7;
    pub const NEIGHBOR_SECOND_QUANTILES: usize = 12;
    pub const FIRST_STAGE_MST: usize = 17;
    pub const SCENARIO_MST_QUANTILES: usize = 18;
    pub const BEST_FIRST_QUANTILES: usize = 23;
    pub const BEST_SECOND_QUANTILES: usize = 28;
    pub const BIAS: usize = 33;
    /// Columns holding cost values (rescaled by [`super::features`]).
    pub const COST_RANGE: std::ops::Range<usize> = 0..17;
}

/// Per-edge, per-stage features with unscaled costs. Rows `0..|E|` describe
/// `(e, first)`, rows `|E|..2|E|` describe `(e, second)`.
pub fn raw_features(x: &TwoStageInstance) -> FeatureMatrix {
    use columns::*;
    let g = x.graph();
    let m = g.num_edges();
    let ns = x.num_scenarios();
    let c = x.first_stage_costs();

    let first_mst = mst_kruskal(g, c).expect("instance graph is connected");
    // scenario-wise MST on b_es = min(c_e, d_es)
    let scenario_msts: Vec<Forest> = (0..ns)
        .map(|s| {
            let b: Vec<f64> = c
                .iter()
                .zip(x.scenario_costs(s))
                .map(|(a, d)| a.min(*d))
                .collect();
            mst_kruskal(g, &b).expect("instance graph is connected")
        })
        .collect();

    let mut data = vec![0.0; 2 * m * FEATURE_DIM];
    for e in 0..m {
        let (u, v) = g.edge(e);
        let mut neighbors: Vec<usize> =
            g.incident(u).iter().chain(g.incident(v)).copied().collect();
        neighbors.sort_unstable();
        neighbors.dedup();

        let ds = x.edge_scenario_costs(e);
        let in_mst: Vec<f64> = scenario_msts
            .iter()
            .map(|t| f64::from(u8::from(t.contains(e))))
            .collect();
        let best_first: Vec<f64> = (0..ns)
            .map(|s| f64::from(u8::from(in_mst[s] > 0.0 && c[e] <= ds[s])))
            .collect();
        let best_second: Vec<f64> = (0..ns)
            .map(|s| f64::from(u8::from(in_mst[s] > 0.0 && c[e] > ds[s])))
            .collect();
        let neighbor_first: Vec<f64> = neighbors.iter().map(|&n| c[n]).collect();
        let neighbor_second: Vec<f64> = neighbors
            .iter()
            .flat_map(|&n| x.edge_scenario_costs(n).iter().copied())
            .collect();

        let first = &mut data[e * FEATURE_DIM..(e + 1) * FEATURE_DIM];
        first[FIRST_STAGE_COST] = c[e];
        first[NEIGHBOR_FIRST_QUANTILES..NEIGHBOR_FIRST_QUANTILES + 5]
            .copy_from_slice(&quantiles5(&neighbor_first));
        first[FIRST_STAGE_MST] = f64::from(u8::from(first_mst.contains(e)));
        first[BEST_FIRST_QUANTILES..BEST_FIRST_QUANTILES + 5]
            .copy_from_slice(&quantiles5(&best_first));
        first[BIAS] = 1.0;

        let second = &mut data[(m + e) * FEATURE_DIM..(m + e + 1) * FEATURE_DIM];
        second[SECOND_STAGE_MEAN] = x.mean_second_stage(e);
        second[SECOND_STAGE_QUANTILES..SECOND_STAGE_QUANTILES + 5].copy_from_slice(&quantiles5(ds));
        second[NEIGHBOR_SECOND_QUANTILES..NEIGHBOR_SECOND_QUANTILES + 5]
            .copy_from_slice(&quantiles5(&neighbor_second));
        second[SCENARIO_MST_QUANTILES..SCENARIO_MST_QUANTILES + 5]
            .copy_from_slice(&quantiles5(&in_mst));
        second[BEST_SECOND_QUANTILES..BEST_SECOND_QUANTILES + 5]
            .copy_from_slice(&quantiles5(&best_second));
        second[BIAS] = 1.0;
    }
    FeatureMatrix::from_flat(2 * m, FEATURE_DIM, data).expect("features are finite")
}

/// Common scale dividing every cost feature: `max(1, max|c|, max|d|)`.
pub fn cost_scale(x: &TwoStageInstance) -> f64 {
    let max_c = x
        .first_stage_costs()
        .iter()
        .fold(0.0_f64, |a, v| a.max(v.abs()));
    let max_d = (0..x.num_scenarios())
        .flat_map(|s| x.scenario_costs(s).iter())
        .fold(0.0_f64, |a, v| a.max(v.abs()));
    max_c.max(max_d).max(1.0)
}

/// Model features: [`raw_features`] with every cost column divided by
/// [`cost_scale`], so that costs lie in `[-1, 0]` and every row norm is at
/// most `sqrt(FEATURE_DIM)`.
pub fn features(x: &TwoStageInstance) -> FeatureMatrix {
    let raw = raw_features(x);
    let scale = cost_scale(x);
    let mut data = Vec::with_capacity(raw.rows() * FEATURE_DIM);
    for i in 0..raw.rows() {
        for (k, &v) in raw.row(i).iter().enumerate() {
            data.push(if columns::COST_RANGE.contains(&k) {
                v / scale
            } else {
                v
            });
        }
    }
    FeatureMatrix::from_flat(raw.rows(), FEATURE_DIM, data).expect("features are finite")
}

/// Weights selecting the first-stage cost and mean second-stage cost
/// columns; on [`raw_features`] they predict `θ̃ = (c_e, mean_s d_es)`.
pub fn approx_weights() -> Vec<f64> {
    let mut w = vec![0.0; FEATURE_DIM];
    w[columns::FIRST_STAGE_COST] = 1.0;
    w[columns::SECOND_STAGE_MEAN] = 1.0;
    w
}

/// `θ̃ = (c_e, mean_s d_es)`.
pub fn approx_theta(x: &TwoStageInstance) -> ThetaVector {
    ThetaVector {
        cbar: x.first_stage_costs().to_vec(),
        dbar: (0..x.num_edges()).map(|e| x.mean_second_stage(e)).collect(),
    }
}

/// Half-approximation: the pipeline run on `θ̃`.
pub fn approx_baseline(x: &TwoStageInstance) -> TwoStageSolution {
    run_pipeline(x, &approx_theta(x))
        .expect("approximation theta matches the instance")
        .0
}

/// Subgradient step control for [`lagrangian_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubgradientConfig {
    /// Initial `s0` in `step = s0·|LB_best| / (‖g‖² + ε)`.
    pub initial_scale: f64,
    /// Non-improving iterations before `s0` is halved.
    pub patience: usize,
    pub epsilon: f64,
}

impl Default for SubgradientConfig {
    fn default() -> Self {
        Self {
            initial_scale: 0.1,
            patience: 50,
            epsilon: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LagrangianResult {
    pub lower_bound: f64,
    /// Multipliers after the last iteration.
    pub duals: DualVector,
    /// Best bound after each iteration.
    pub trace: Vec<f64>,
}

struct ScenarioSubproblem {
    value: f64,
    first_stage: Vec<bool>,
}

fn solve_scenario_subproblem(x: &TwoStageInstance, s: usize, lambda: &[f64]) -> ScenarioSubproblem {
    let c = x.first_stage_costs();
    let d = x.scenario_costs(s);
    let adjusted: Vec<f64> = c.iter().zip(lambda).map(|(a, l)| a + l).collect();
    let weights: Vec<f64> = adjusted.iter().zip(d).map(|(a, b)| a.min(*b)).collect();
    let tree = mst_kruskal(x.graph(), &weights).expect("instance graph is connected");
    let mut first_stage = vec![false; x.num_edges()];
    for &e in tree.edge_ids() {
        first_stage[e] = adjusted[e] <= d[e];
    }
    ScenarioSubproblem {
        value: tree.weight(&weights),
        first_stage,
    }
}

/// Lower bound from dualizing nonanticipativity on scenario copies of the
/// first stage:
/// `L(λ) = (1/|S|) Σ_s MST(min(c_e + λ_es, d_es))` with `Σ_s λ_es = 0`,
/// maximized by projected subgradient ascent.
pub fn lagrangian_bound(
    x: &TwoStageInstance,
    iters: usize,
    cfg: &SubgradientConfig,
) -> LagrangianResult {
    let ns = x.num_scenarios();
    let m = x.num_edges();
    let mut duals = DualVector::zeros(ns, m);
    let mut best = f64::NEG_INFINITY;
    let mut trace = Vec::with_capacity(iters);
    let mut scale = cfg.initial_scale;
    let mut stall = 0;

    for _ in 0..iters.max(1) {
        let subproblems: Vec<ScenarioSubproblem> = (0..ns)
            .map(|s| solve_scenario_subproblem(x, s, duals.scenario(s)))
            .collect();
        let value = subproblems.iter().map(|p| p.value).sum::<f64>() / ns as f64;
        if value > best {
            best = value;
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.patience {
                scale *= 0.5;
                stall = 0;
            }
        }
        trace.push(best);

        let mut g = vec![vec![0.0; m]; ns];
        let mut norm2 = 0.0;
        #[allow(clippy::needless_range_loop)]
        for e in 0..m {
            let mean = subproblems.iter().filter(|p| p.first_stage[e]).count() as f64 / ns as f64;
            for (s, p) in subproblems.iter().enumerate() {
                let ge = f64::from(u8::from(p.first_stage[e])) - mean;
                g[s][e] = ge;
                norm2 += ge * ge;
            }
        }
        if norm2 == 0.0 {
            // scenario copies agree: the relaxation is tight at this λ
            break;
        }
        let step = scale * best.abs() / (norm2 + cfg.epsilon);
        for (row, grow) in duals.values.iter_mut().zip(&g) {
            for (l, ge) in row.iter_mut().zip(grow) {
                *l += step * ge;
            }
        }
    }
    LagrangianResult {
        lower_bound: best,
        duals,
        trace,
    }
}

/// Majority threshold on the fraction of scenarios that buy an edge in the
/// first stage.
pub const HEURISTIC_THRESHOLD: f64 = 0.5;

/// Primal heuristic from multipliers: edges bought first-stage by at least
/// half the scenario subproblems form a first-stage forest (descending score,
/// cycle-closing edges skipped), each scenario is completed optimally, and
/// the result is compared with the empty first stage.
pub fn lagrangian_heuristic(x: &TwoStageInstance, duals: &DualVector) -> TwoStageSolution {
    let ns = x.num_scenarios();
    let m = x.num_edges();
    let mut score = vec![0.0; m];
    for s in 0..ns {
        let p = solve_scenario_subproblem(x, s, duals.scenario(s));
        for (sc, chosen) in score.iter_mut().zip(&p.first_stage) {
            if *chosen {
                *sc += 1.0 / ns as f64;
            }
        }
    }
    let mut candidates: Vec<usize> = (0..m)
        .filter(|&e| score[e] >= HEURISTIC_THRESHOLD)
        .collect();
    candidates.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    let mut uf = UnionFind::new(x.graph().num_vertices());
    let forest: Vec<usize> = candidates
        .into_iter()
        .filter(|&e| {
            let (u, v) = x.graph().edge(e);
            uf.union(u, v)
        })
        .collect();
    let completed = x
        .complete_first_stage(&Forest::from_edges(forest))
        .expect("forest built with union-find");
    let (empty, empty_cost) = x.empty_first_stage();
    if x.cost_unchecked(&completed) <= empty_cost {
        completed
    } else {
        empty.clone()
    }
}

/// Maximum edge count accepted by [`brute_force_optimum`].
pub const BRUTE_FORCE_EDGE_LIMIT: usize = 12;

/// Exact optimum: every acyclic first-stage edge set, each completed
/// optimally per scenario.
pub fn brute_force_optimum(x: &TwoStageInstance) -> Result<(f64, TwoStageSolution), TwoStageError> {
    let m = x.num_edges();
    if m > BRUTE_FORCE_EDGE_LIMIT {
        return Err(TwoStageError::TooLarge {
            limit: BRUTE_FORCE_EDGE_LIMIT,
            actual: m,
        });
    }
    let g = x.graph();
    let (empty, empty_cost) = x.empty_first_stage();
    let mut best = (empty_cost, empty.clone());
    for mask in 1u32..(1 << m) {
        let mut uf = UnionFind::new(g.num_vertices());
        let edges: Vec<usize> = (0..m).filter(|e| mask & (1 << e) != 0).collect();
        if !edges.iter().all(|&e| {
            let (u, v) = g.edge(e);
            uf.union(u, v)
        }) {
            continue;
        }
        let z = x.complete_first_stage(&Forest::from_edges(edges))?;
        let cost = x.cost_unchecked(&z);
        if cost < best.0 {
            best = (cost, z);
        }
    }
    Ok(best)
}

/// Grid instance with `c_e ~ U{-20..0}` and `d_es ~ U{-K..0}`.
pub fn generate_instance(
    width: usize,
    k: i64,
    num_scenarios: usize,
    seed: u64,
) -> Result<TwoStageInstance, TwoStageError> {
    if num_scenarios == 0 {
        return Err(TwoStageError::NoScenario);
    }
    let graph = grid_graph(width, width)?;
    let m = graph.num_edges();
    let k = k.max(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<i64> = (0..m).map(|_| rng.random_range(-20..=0)).collect();
    let d: Vec<Vec<i64>> = (0..m)
        .map(|_| {
            (0..num_scenarios)
                .map(|_| rng.random_range(-k..=0))
                .collect()
        })
        .collect();
    TwoStageInstance::from_file(&TwoStageFile {
        width,
        num_scenarios,
        c,
        d,
        seed,
        k,
    })
}
