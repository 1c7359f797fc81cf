//! Synthetic studies of how the anomaly fraction limits test-time training,
//! and the downsampling used to control that fraction on real data.

mod downsample;
mod gaussian;
mod thought;

pub use downsample::{
    nu_downsample, outliers_for_nu, read_sweep_csv, write_sweep_csv, DownsampleSpec, Downsampled,
    SweepRow,
};
pub use gaussian::{
    bayes_auc, gaussian_experiment, Averaging, GaussianMethod, GaussianOutcome, GaussianSpec,
};
pub use thought::{
    condition_margin, guessing_bound, thought_experiment, thought_trial, ConditionMargin, Side,
    ThoughtConfig, ThoughtSummary, ThoughtTrial,
};
