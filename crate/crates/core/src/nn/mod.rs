//! A small bias-free multilayer perceptron with hand-written backpropagation.
//!
//! Hidden layers use a rectifier; the single output node uses the shifted
//! sigmoid [`shifted_sigmoid`], so every score lies strictly inside (0, 1).
//! Layers never carry an additive bias, which makes the network positively
//! homogeneous in its input: scaling an input by `a > 0` scales every
//! pre-activation by `a`.

mod adam;
mod network;

pub use adam::{AdamConfig, OptimizerState};
pub use network::{DenseLayer, ForwardPass, Gradients, Network, Topology, NETWORK_FORMAT_VERSION};

use ndarray::Array2;

use crate::error::{Error, Group, Result};

/// `1 / (1 + e^(1 - x))`: a logistic sigmoid shifted one unit to the right.
///
/// Evaluated through whichever branch avoids overflow, so large `|x|` saturates
/// smoothly instead of producing `inf / inf`.
#[inline]
pub fn shifted_sigmoid(x: f64) -> f64 {
    let z = x - 1.0;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Derivative of [`shifted_sigmoid`] expressed through its output value.
#[inline]
pub fn shifted_sigmoid_grad_from_output(s: f64) -> f64 {
    s * (1.0 - s)
}

/// A mini-batch for the refinement phase: features plus one group tag per row.
#[derive(Debug, Clone)]
pub struct TrainBatch {
    pub features: Array2<f64>,
    pub groups: Vec<Group>,
}

impl TrainBatch {
    pub fn new(features: Array2<f64>, groups: Vec<Group>) -> Result<Self> {
        if features.nrows() != groups.len() {
            return Err(Error::Dimension {
                expected: features.nrows(),
                found: groups.len(),
            });
        }
        Ok(Self { features, groups })
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}
