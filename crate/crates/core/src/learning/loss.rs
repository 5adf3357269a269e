//! Experience losses: the normalized hard cost reached by the pipeline at a
//! given weight vector, its Gaussian-perturbed sample average, and the
//! empirical risk over a training set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LearningError;
use crate::model::{sample_gaussians, FeatureMatrix, PerturbationConfig};
use crate::scheduling::{self, PostProcessing, SchedInstance};
use crate::two_stage::{self, SubgradientConfig, ThetaVector, TwoStageInstance};

/// A training instance wrapped with everything the pipeline needs to turn a
/// weight vector into a normalized cost.
pub trait ExperienceCase: Send + Sync {
    fn feature_dim(&self) -> usize;

    /// Normalized hard-problem cost of the pipeline output at `w`.
    fn loss(&self, w: &[f64]) -> Result<f64, LearningError>;
}

/// Two-stage spanning tree instance with its features and Lagrangian lower
/// bound. The loss is the relative gap to the bound,
/// `(C(z) - LB) / max(1, |LB|)`.
#[derive(Debug, Clone)]
pub struct TwoStageCase {
    instance: TwoStageInstance,
    features: FeatureMatrix,
    lower_bound: f64,
}

/// Subgradient iterations used for the normalizing bound when none is given.
pub const DEFAULT_BOUND_ITERATIONS: usize = 500;

impl TwoStageCase {
    pub fn new(instance: TwoStageInstance, lower_bound: f64) -> Self {
        let features = two_stage::features(&instance);
        Self {
            instance,
            features,
            lower_bound,
        }
    }

    /// Computes the bound with [`DEFAULT_BOUND_ITERATIONS`] subgradient steps.
    pub fn with_computed_bound(instance: TwoStageInstance) -> Self {
        let lb = two_stage::lagrangian_bound(
            &instance,
            DEFAULT_BOUND_ITERATIONS,
            &SubgradientConfig::default(),
        )
        .lower_bound;
        Self::new(instance, lb)
    }

    pub fn instance(&self) -> &TwoStageInstance {
        &self.instance
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn normalizer(&self) -> f64 {
        self.lower_bound.abs().max(1.0)
    }

    /// Pipeline solution and its hard cost at `w`.
    pub fn solve(&self, w: &[f64]) -> Result<(two_stage::TwoStageSolution, f64), LearningError> {
        let theta = crate::model::predict_theta(w, &self.features)?;
        let theta = ThetaVector::from_flat(&theta, self.instance.num_edges())?;
        Ok(two_stage::run_pipeline(&self.instance, &theta)?)
    }
}

impl ExperienceCase for TwoStageCase {
    fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    fn loss(&self, w: &[f64]) -> Result<f64, LearningError> {
        let (_, cost) = self.solve(w)?;
        Ok((cost - self.lower_bound) / self.normalizer())
    }
}

/// Scheduling instance with its features and post-processing choice. The
/// loss is `ΣC_j / (n(n+1))`.
#[derive(Debug, Clone)]
pub struct SchedCase {
    instance: SchedInstance,
    features: FeatureMatrix,
    post: PostProcessing,
}

impl SchedCase {
    pub fn new(instance: SchedInstance, post: PostProcessing) -> Self {
        let features = scheduling::features(&instance);
        Self {
            instance,
            features,
            post,
        }
    }

    pub fn instance(&self) -> &SchedInstance {
        &self.instance
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn post(&self) -> PostProcessing {
        self.post
    }

    pub fn normalizer(&self) -> f64 {
        let n = self.instance.n() as f64;
        n * (n + 1.0)
    }

    pub fn solve(&self, w: &[f64]) -> Result<(scheduling::Permutation, f64), LearningError> {
        Ok(scheduling::run_pipeline(
            &self.instance,
            &self.features,
            w,
            self.post,
        )?)
    }
}

impl ExperienceCase for SchedCase {
    fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    fn loss(&self, w: &[f64]) -> Result<f64, LearningError> {
        Ok(self.solve(w)?.1 / self.normalizer())
    }
}

/// Whether the loss is perturbed; `None` means the plain loss.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossConfig {
    pub perturbation: Option<PerturbationConfig>,
}

/// Gaussian samples fixed once per learning run (common random numbers), so
/// the sample-average loss is a deterministic function of `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaaSamples {
    pub sigma: f64,
    pub z: Vec<Vec<f64>>,
}

impl SaaSamples {
    pub fn draw(cfg: &PerturbationConfig, dim: usize) -> Result<Self, LearningError> {
        cfg.validate()?;
        Ok(Self {
            sigma: cfg.sigma,
            z: sample_gaussians(cfg, dim),
        })
    }

    pub fn from_loss_config(cfg: &LossConfig, dim: usize) -> Result<Option<Self>, LearningError> {
        cfg.perturbation
            .as_ref()
            .map(|p| Self::draw(p, dim))
            .transpose()
    }
}

/// Plain experience loss.
pub fn loss<C: ExperienceCase + ?Sized>(case: &C, w: &[f64]) -> Result<f64, LearningError> {
    case.loss(w)
}

/// Mean of the loss at `w + σ Z_k` over the fixed samples.
pub fn perturbed_loss_saa<C: ExperienceCase + ?Sized>(
    case: &C,
    w: &[f64],
    samples: &SaaSamples,
) -> Result<f64, LearningError> {
    if samples.sigma == 0.0 {
        return case.loss(w);
    }
    let mut total = 0.0;
    let mut shifted = vec![0.0; w.len()];
    for z in &samples.z {
        for ((s, wi), zi) in shifted.iter_mut().zip(w).zip(z) {
            *s = wi + samples.sigma * zi;
        }
        total += case.loss(&shifted)?;
    }
    Ok(total / samples.z.len() as f64)
}

/// `(1/n) Σ_i ℓ(w, x_i)`, per-instance terms computed concurrently and
/// summed in training-set order.
pub fn empirical_risk<C: ExperienceCase>(
    cases: &[C],
    w: &[f64],
    samples: Option<&SaaSamples>,
) -> Result<f64, LearningError> {
    if cases.is_empty() {
        return Err(LearningError::EmptyTrainingSet);
    }
    let terms: Vec<f64> = cases
        .par_iter()
        .map(|case| match samples {
            Some(s) => perturbed_loss_saa(case, w, s),
            None => case.loss(w),
        })
        .collect::<Result<_, _>>()?;
    Ok(terms.iter().sum::<f64>() / cases.len() as f64)
}
