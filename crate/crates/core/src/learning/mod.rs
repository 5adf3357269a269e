//! Learning the weights of the linear model: experience losses, the DIRECT
//! learner, the Fenchel-Young imitation trainer and generalization bounds.

pub mod bounds;
pub mod direct;
pub mod experience;
pub mod fyl;
pub mod loss;

use thiserror::Error;

use crate::model::ModelError;
use crate::scheduling::SchedError;
use crate::two_stage::TwoStageError;

pub use bounds::{constant_c, excess_risk_bound, sigma_n, BoundParams};
pub use direct::{direct_minimize, DirectConfig, DirectResult};
pub use experience::{config_hash, learn_by_experience, LearnerConfig, SeedReport, TrainingReport};
pub use fyl::{
    fy_gradient_theta, fy_loss_theta, fyl_learn, FylConfig, ImitationCase, TwoStageImitation,
};
pub use loss::{
    empirical_risk, loss, perturbed_loss_saa, ExperienceCase, LossConfig, SaaSamples, SchedCase,
    TwoStageCase,
};

#[derive(Debug, Error)]
pub enum LearningError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    TwoStage(#[from] TwoStageError),
    #[error(transparent)]
    Scheduling(#[from] SchedError),
}
