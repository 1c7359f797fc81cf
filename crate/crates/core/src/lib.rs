//! Test-time-training one-class outlier detection.
//!
//! The crate contains the DOUST detector ([`doust`]) built on a small bias-free
//! network ([`nn`]), the comparison algorithms it is measured against
//! ([`baselines`]), rank-based evaluation and significance testing
//! ([`metrics`]), synthetic studies of how the anomaly fraction affects
//! test-time training ([`synthetic`]), and the benchmark harness behind the
//! command-line tool ([`harness`]).
//!
//! Independent work items (ensemble members, trees, repetitions) run on rayon
//! when the default `parallel` feature is enabled and sequentially otherwise;
//! see [`par`].

pub mod baselines;
pub mod data;
pub mod doust;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod par;
pub mod synthetic;

pub use data::{Dataset, Standardizer};
pub use error::{Error, Group, Result};
