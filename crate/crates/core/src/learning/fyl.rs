//! Imitation benchmark: stochastic gradient descent on the perturbed
//! Fenchel-Young loss of a linear CO layer.
//!
//! With the layer written as `ŷ(θ) = argmin_y ⟨y, θ⟩` and
//! `F_ε(θ) = E[min_y ⟨y, θ + εZ⟩]`, the loss against a target `y*` is
//! `⟨y*, θ⟩ - F_ε(θ) ≥ 0` and its gradient is `y* - E[ŷ(θ + εZ)]`.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::LearningError;
use crate::graphs::{mst_constrained, Forest};
use crate::model::{predict_theta, FeatureMatrix, WeightVector};
use crate::two_stage::{self, ThetaVector, TwoStageInstance};

/// An instance paired with a target solution, as 0/1 incidence over `I(x)`.
pub trait ImitationCase: Sync {
    fn features(&self) -> &FeatureMatrix;
    fn target(&self) -> &[f64];
    /// Incidence vector of the CO layer's solution at `θ`.
    fn solve(&self, theta: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone)]
pub struct TwoStageImitation {
    instance: TwoStageInstance,
    features: FeatureMatrix,
    target: Vec<f64>,
}

impl TwoStageImitation {
    pub fn new(instance: TwoStageInstance, target: &two_stage::EasySolution) -> Self {
        let features = two_stage::features(&instance);
        let target = target.incidence(instance.num_edges());
        Self {
            instance,
            features,
            target,
        }
    }

    /// Target read off a two-stage solution: its first stage, completed to a
    /// spanning tree on the mean second-stage costs.
    pub fn from_solution(
        instance: TwoStageInstance,
        z: &two_stage::TwoStageSolution,
    ) -> Result<Self, LearningError> {
        let mean: Vec<f64> = (0..instance.num_edges())
            .map(|e| instance.mean_second_stage(e))
            .collect();
        let tree = mst_constrained(instance.graph(), &mean, &z.first_stage)
            .map_err(two_stage::TwoStageError::from)?;
        let second = tree
            .edge_ids()
            .iter()
            .copied()
            .filter(|&e| !z.first_stage.contains(e))
            .collect();
        let y = two_stage::EasySolution {
            first_stage: z.first_stage.clone(),
            second_stage: Forest::from_edges(second),
        };
        Ok(Self::new(instance, &y))
    }

    pub fn instance(&self) -> &TwoStageInstance {
        &self.instance
    }
}

impl ImitationCase for TwoStageImitation {
    fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    fn target(&self) -> &[f64] {
        &self.target
    }

    fn solve(&self, theta: &[f64]) -> Vec<f64> {
        let m = self.instance.num_edges();
        let theta = ThetaVector::from_flat(theta, m).expect("theta sized from features");
        two_stage::easy_layer(&self.instance, &theta)
            .expect("instance graph is connected")
            .incidence(m)
    }
}

/// Monte-Carlo estimate of `∇_θ` of the perturbed Fenchel-Young loss,
/// `y* - (1/K) Σ_k ŷ(θ + ε Z_k)`.
pub fn fy_gradient_theta<C: ImitationCase + ?Sized>(
    case: &C,
    theta: &[f64],
    epsilon: f64,
    z: &[Vec<f64>],
) -> Vec<f64> {
    let mut mean = vec![0.0; theta.len()];
    let mut shifted = vec![0.0; theta.len()];
    for zk in z {
        for ((s, t), zi) in shifted.iter_mut().zip(theta).zip(zk) {
            *s = t + epsilon * zi;
        }
        for (m, y) in mean.iter_mut().zip(case.solve(&shifted)) {
            *m += y;
        }
    }
    let k = z.len() as f64;
    case.target()
        .iter()
        .zip(&mean)
        .map(|(t, m)| t - m / k)
        .collect()
}

/// Sample-average perturbed Fenchel-Young loss
/// `⟨y*, θ⟩ - (1/K) Σ_k min_y ⟨y, θ + ε Z_k⟩`.
pub fn fy_loss_theta<C: ImitationCase + ?Sized>(
    case: &C,
    theta: &[f64],
    epsilon: f64,
    z: &[Vec<f64>],
) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut inner = 0.0;
    for zk in z {
        let shifted: Vec<f64> = theta
            .iter()
            .zip(zk)
            .map(|(t, zi)| t + epsilon * zi)
            .collect();
        inner += dot(&case.solve(&shifted), &shifted);
    }
    dot(case.target(), theta) - inner / z.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FylConfig {
    /// Perturbation scale ε in θ-space.
    pub epsilon: f64,
    /// Gaussian samples per gradient estimate.
    pub nsamples: usize,
    pub steps: usize,
    pub rate: f64,
    pub box_radius: f64,
    pub seed: u64,
}

impl Default for FylConfig {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            nsamples: 10,
            steps: 500,
            rate: 0.05,
            box_radius: 10.0,
            seed: 0,
        }
    }
}

/// Projected SGD from `init` (zeros when `None`): each step picks a training
/// pair at random, estimates the θ-gradient, pulls it back through `Φᵀ` and
/// clips to the box.
pub fn fyl_learn<C: ImitationCase>(
    cases: &[C],
    cfg: &FylConfig,
    init: Option<&[f64]>,
) -> Result<WeightVector, LearningError> {
    let first = cases.first().ok_or(LearningError::EmptyTrainingSet)?;
    if cfg.nsamples == 0 {
        return Err(LearningError::Config("nsamples must be at least 1".into()));
    }
    let dim = first.features().cols();
    let mut w = init.map_or_else(|| vec![0.0; dim], <[f64]>::to_vec);
    if w.len() != dim {
        return Err(LearningError::Config(format!(
            "initial weights have {} entries, features {}",
            w.len(),
            dim
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.steps {
        let case = cases.choose(&mut rng).expect("non-empty");
        let theta = predict_theta(&w, case.features())?;
        let z: Vec<Vec<f64>> = (0..cfg.nsamples)
            .map(|_| {
                (0..theta.len())
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect()
            })
            .collect();
        let g_theta = fy_gradient_theta(case, &theta, cfg.epsilon, &z);
        let g_w = case.features().transpose_mul(&g_theta);
        for (wi, gi) in w.iter_mut().zip(&g_w) {
            *wi = (*wi - cfg.rate * gi).clamp(-cfg.box_radius, cfg.box_radius);
        }
    }
    Ok(WeightVector::new(w, cfg.box_radius)?)
}
