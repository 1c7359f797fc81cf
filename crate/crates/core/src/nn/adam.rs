use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::{Gradients, Network};
use crate::error::{Error, Result};

/// Adaptive moment estimation hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates for every weight of one network.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    config: AdamConfig,
    first: Vec<Array2<f64>>,
    second: Vec<Array2<f64>>,
    step: u64,
}

// Moments of parameters whose gradient stays zero (dead ReLU units) decay
// geometrically into subnormal range, where x86 arithmetic is very slow. At
// these magnitudes the update is far below epsilon anyway.
fn flush(x: f64, tiny: f64) -> f64 {
    if x.abs() < tiny {
        0.0
    } else {
        x
    }
}

impl OptimizerState {
    pub fn new(net: &Network, config: AdamConfig) -> Self {
        let zeros: Vec<_> = net
            .layers()
            .iter()
            .map(|l| Array2::zeros(l.weights().dim()))
            .collect();
        Self {
            config,
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `net` in place.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != self.first.len() {
            return Err(Error::Dimension {
                expected: self.first.len(),
                found: grads.layers.len(),
            });
        }
        for (g, m) in grads.layers.iter().zip(&self.first) {
            if g.dim() != m.dim() {
                return Err(Error::Dimension {
                    expected: m.len(),
                    found: g.len(),
                });
            }
        }
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((layer, g), m), v) in net
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            Zip::from(layer.weights_mut())
                .and(g)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = flush(beta1 * *m + (1.0 - beta1) * g, 1e-150);
                    *v = flush(beta2 * *v + (1.0 - beta2) * g * g, 1e-290);
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                });
        }
        Ok(())
    }
}
