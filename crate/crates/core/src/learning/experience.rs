//! Learning by experience: DIRECT on the empirical risk, restarted over
//! several seeds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::direct::{direct_minimize, DirectConfig, DEFAULT_EPSILON};
use super::loss::{empirical_risk, ExperienceCase, LossConfig, SaaSamples};
use super::LearningError;
use crate::model::WeightVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Radius `M` of the weight box `[-M, M]^d`.
    pub box_radius: f64,
    /// DIRECT evaluations per seed.
    pub budget: usize,
    pub seeds: Vec<u64>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            box_radius: 10.0,
            budget: 1000,
            seeds: (0..10).collect(),
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), LearningError> {
        if !(self.box_radius.is_finite() && self.box_radius > 0.0) {
            return Err(LearningError::Config(format!(
                "box radius must be positive, got {}",
                self.box_radius
            )));
        }
        if self.budget == 0 {
            return Err(LearningError::Config("budget must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(LearningError::Config(
                "at least one seed is required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub best_value: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub per_seed: Vec<SeedReport>,
    pub best_w: Vec<f64>,
    pub config_hash: String,
}

impl TrainingReport {
    pub fn best_value(&self) -> f64 {
        self.per_seed
            .iter()
            .map(|r| r.best_value)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn average_value(&self) -> f64 {
        self.per_seed.iter().map(|r| r.best_value).sum::<f64>() / self.per_seed.len() as f64
    }
}

/// Hex SHA-256 of the JSON encoding of the learner and loss settings.
pub fn config_hash(learner: &LearnerConfig, loss_cfg: &LossConfig) -> String {
    let encoded = serde_json::to_vec(&(learner, loss_cfg)).expect("configs serialize");
    hex::encode(Sha256::digest(&encoded))
}

/// Runs DIRECT once per seed on the empirical risk and keeps the weights of
/// lowest risk (earliest seed on ties). Seeds run concurrently.
pub fn learn_by_experience<C: ExperienceCase>(
    cases: &[C],
    learner: &LearnerConfig,
    loss_cfg: &LossConfig,
) -> Result<(WeightVector, TrainingReport), LearningError> {
    learner.validate()?;
    let dim = cases
        .first()
        .ok_or(LearningError::EmptyTrainingSet)?
        .feature_dim();
    if let Some(bad) = cases.iter().find(|c| c.feature_dim() != dim) {
        return Err(LearningError::Config(format!(
            "mixed feature dimensions {} and {}",
            dim,
            bad.feature_dim()
        )));
    }
    let samples = SaaSamples::from_loss_config(loss_cfg, dim)?;
    let objective = |w: &[f64]| empirical_risk(cases, w, samples.as_ref()).unwrap_or(f64::INFINITY);

    let runs: Vec<_> = learner
        .seeds
        .par_iter()
        .map(|&seed| {
            let cfg = DirectConfig {
                epsilon: DEFAULT_EPSILON,
                ..DirectConfig::symmetric(dim, learner.box_radius, learner.budget, seed)
            };
            (seed, direct_minimize(&objective, &cfg))
        })
        .collect();

    let (best_idx, _) = runs
        .iter()
        .enumerate()
        .min_by(|a, b| {
            a.1 .1
                .value_best
                .total_cmp(&b.1 .1.value_best)
                .then(a.0.cmp(&b.0))
        })
        .expect("at least one seed");
    let best_w = runs[best_idx].1.x_best.clone();
    let report = TrainingReport {
        per_seed: runs
            .iter()
            .map(|(seed, r)| SeedReport {
                seed: *seed,
                best_value: r.value_best,
                evals: r.evaluations,
            })
            .collect(),
        best_w: best_w.clone(),
        config_hash: config_hash(learner, loss_cfg),
    };
    Ok((WeightVector::new(best_w, learner.box_radius)?, report))
}
