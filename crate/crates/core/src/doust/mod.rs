//! Test-time-training one-class outlier detection.
//!
//! A submodel is a [`Network`](crate::nn::Network) that is first pretrained to
//! map every normal training row to ½, then refined on the union of the
//! training rows (target 0) and the unlabeled test rows (target 1). Because most
//! test rows come from the same distribution as the training rows, the
//! refinement can only separate the rows that look different: the anomalies.
//! An ensemble averages the scores of independently seeded submodels.

mod config;
mod ensemble;
mod loss;
mod optimum;
mod train;

pub use config::{Batching, DoustConfig, GroupNorm};
pub use ensemble::{
    feature_bag_mask, train_ensemble, train_ensemble_in, train_ensemble_with_faults, EnsembleModel,
    Submodel, SubmodelStatus, ENSEMBLE_FORMAT_VERSION,
};
pub use loss::{loss_value, pretrain_loss, Denominators, LossEval, LossSpec, LossVariant};
pub use optimum::{optimal_weight, population_optimum, Optimum};
pub use train::{pretrain, refine, PhaseReport};
