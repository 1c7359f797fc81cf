//! Comparison algorithms: k-nearest-neighbour distance, isolation forest, and a
//! cross-validated random forest that sees the labels and serves as a
//! supervised reference.

mod cv;
mod forest;
mod iforest;
mod knn;

pub use cv::{rf_fit_predict_cv, CvFolds};
pub use forest::{CartTree, MaxFeatures, RandomForestConfig, RandomForestModel};
pub use iforest::{
    average_path_length, IsolationForestConfig, IsolationForestModel, IsolationTree,
};
pub use knn::KnnModel;
