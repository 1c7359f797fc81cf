//! Refinement losses.
//!
//! Every loss takes the scores of training rows (labelled 0) and of test rows
//! (labelled 1) and is minimised by pushing training scores down and test scores
//! up. Mean-based terms are normalised per group, so a group's term does not
//! grow with its size; a group that is absent from a batch contributes nothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Group, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    /// `mean(train²) + ω·mean((1 − test)²)`
    #[default]
    BalancedMse,
    /// `sum(train²) + ω·sum((1 − test)²)`
    RawMse,
    /// `mean(train + train²) + ω·mean((1 − test) + (1 − test)²)`
    MsePlusMae,
    /// `mean(|train − ½|) + ω·mean(1 − test)`
    UnmovingNormal,
    /// `max(train) + ω·mean(1 − test)`
    #[serde(rename = "meanmax", alias = "mean_max")]
    MeanMax,
    /// `max(train) − ω·max(test)`, the negated set distance `max(A) − max(B)`.
    MaxIndependent,
}

impl LossVariant {
    pub const ALL: [LossVariant; 6] = [
        LossVariant::BalancedMse,
        LossVariant::RawMse,
        LossVariant::MsePlusMae,
        LossVariant::UnmovingNormal,
        LossVariant::MeanMax,
        LossVariant::MaxIndependent,
    ];

    /// Batch size used when the configuration does not set one.
    pub fn default_batch_size(self) -> usize {
        match self {
            LossVariant::MaxIndependent => 500,
            _ => 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    #[serde(default)]
    pub variant: LossVariant,
    /// Weight ω of the test-set term.
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

impl Default for LossSpec {
    fn default() -> Self {
        Self {
            variant: LossVariant::BalancedMse,
            weight: 1.0,
        }
    }
}

/// Divisors used by the mean-based terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Denominators {
    pub train: f64,
    pub test: f64,
}

/// Loss value together with its derivative with respect to every score.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub train_grad: Vec<f64>,
    pub test_grad: Vec<f64>,
}

impl LossSpec {
    pub fn new(variant: LossVariant, weight: f64) -> Result<Self> {
        let spec = Self { variant, weight };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(Error::Config(format!(
                "loss weight must be positive and finite, got {}",
                self.weight
            )));
        }
        Ok(())
    }

    pub fn value(&self, train: &[f64], test: &[f64]) -> Result<f64> {
        Ok(self.evaluate(train, test, None)?.value)
    }

    /// Evaluates the loss and its gradient. With `denominators = None` the
    /// mean-based terms divide by the group sizes actually present.
    pub fn evaluate(
        &self,
        train: &[f64],
        test: &[f64],
        denominators: Option<Denominators>,
    ) -> Result<LossEval> {
        check_finite(train, Group::Train)?;
        check_finite(test, Group::Test)?;
        let d = denominators.unwrap_or(Denominators {
            train: train.len() as f64,
            test: test.len() as f64,
        });
        let w = self.weight;
        let mut train_grad = vec![0.0; train.len()];
        let mut test_grad = vec![0.0; test.len()];
        let mut value = 0.0;

        match self.variant {
            LossVariant::BalancedMse | LossVariant::RawMse => {
                let (dt, de) = match self.variant {
                    LossVariant::RawMse => (1.0, 1.0),
                    _ => (d.train, d.test),
                };
                if !train.is_empty() {
                    value += train.iter().map(|s| s * s).sum::<f64>() / dt;
                    for (g, s) in train_grad.iter_mut().zip(train) {
                        *g = 2.0 * s / dt;
                    }
                }
                if !test.is_empty() {
                    value += w * test.iter().map(|s| (1.0 - s).powi(2)).sum::<f64>() / de;
                    for (g, s) in test_grad.iter_mut().zip(test) {
                        *g = -2.0 * w * (1.0 - s) / de;
                    }
                }
            }
            LossVariant::MsePlusMae => {
                if !train.is_empty() {
                    value += train.iter().map(|s| s + s * s).sum::<f64>() / d.train;
                    for (g, s) in train_grad.iter_mut().zip(train) {
                        *g = (1.0 + 2.0 * s) / d.train;
                    }
                }
                if !test.is_empty() {
                    value += w * test
                        .iter()
                        .map(|s| (1.0 - s) + (1.0 - s).powi(2))
                        .sum::<f64>()
                        / d.test;
                    for (g, s) in test_grad.iter_mut().zip(test) {
                        *g = -w * (1.0 + 2.0 * (1.0 - s)) / d.test;
                    }
                }
            }
            LossVariant::UnmovingNormal => {
                if !train.is_empty() {
                    value += train.iter().map(|s| (s - 0.5).abs()).sum::<f64>() / d.train;
                    for (g, s) in train_grad.iter_mut().zip(train) {
                        *g = sign(s - 0.5) / d.train;
                    }
                }
                mean_complement_term(test, w, d.test, &mut value, &mut test_grad);
            }
            LossVariant::MeanMax => {
                max_term(train, 1.0, &mut value, &mut train_grad);
                mean_complement_term(test, w, d.test, &mut value, &mut test_grad);
            }
            LossVariant::MaxIndependent => {
                max_term(train, 1.0, &mut value, &mut train_grad);
                max_term(test, -w, &mut value, &mut test_grad);
            }
        }

        Ok(LossEval {
            value,
            train_grad,
            test_grad,
        })
    }
}

/// Free-function form of [`LossSpec::value`].
pub fn loss_value(spec: &LossSpec, train: &[f64], test: &[f64]) -> Result<f64> {
    spec.value(train, test)
}

/// Pretraining objective `mean((s − ½)²)` and its gradient.
pub fn pretrain_loss(scores: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_finite(scores, Group::Train)?;
    if scores.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let n = scores.len() as f64;
    let value = scores.iter().map(|s| (s - 0.5).powi(2)).sum::<f64>() / n;
    let grad = scores.iter().map(|s| 2.0 * (s - 0.5) / n).collect();
    Ok((value, grad))
}

fn check_finite(scores: &[f64], group: Group) -> Result<()> {
    if scores.iter().all(|s| s.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidScore { group })
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn mean_complement_term(scores: &[f64], w: f64, denom: f64, value: &mut f64, grad: &mut [f64]) {
    if scores.is_empty() {
        return;
    }
    *value += w * scores.iter().map(|s| 1.0 - s).sum::<f64>() / denom;
    grad.fill(-w / denom);
}

/// Adds `factor · max(scores)`; the subgradient goes to the first maximiser.
fn max_term(scores: &[f64], factor: f64, value: &mut f64, grad: &mut [f64]) {
    let Some((idx, max)) =
        scores
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (i, s)| match best {
                Some((_, m)) if m >= s => best,
                _ => Some((i, s)),
            })
    else {
        return;
    };
    *value += factor * max;
    grad[idx] = factor;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(variant: LossVariant) -> LossSpec {
        LossSpec::new(variant, 1.0).unwrap()
    }

    #[test]
    fn balanced_mse_reference_values() {
        let s = spec(LossVariant::BalancedMse);
        assert_eq!(s.value(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(s.value(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.5);
    }

    #[test]
    fn max_independent_lower_is_better() {
        let s = spec(LossVariant::MaxIndependent);
        let v = s.value(&[0.4, 0.5], &[0.9, 0.5]).unwrap();
        assert!((v - (-0.4)).abs() < 1e-15);
    }

    #[test]
    fn each_variant_matches_its_formula() {
        let train = [0.2, 0.7, 0.4];
        let test = [0.9, 0.3];
        let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        let w = 0.5;
        let cases = [
            (
                LossVariant::BalancedMse,
                mean(train.iter().map(|s| s * s).collect())
                    + w * mean(test.iter().map(|s| (1.0 - s) * (1.0 - s)).collect()),
            ),
            (
                LossVariant::RawMse,
                train.iter().map(|s| s * s).sum::<f64>()
                    + w * test.iter().map(|s| (1.0 - s) * (1.0 - s)).sum::<f64>(),
            ),
            (
                LossVariant::MsePlusMae,
                mean(train.iter().map(|s| s + s * s).collect())
                    + w * mean(
                        test.iter()
                            .map(|s| (1.0 - s) + (1.0 - s) * (1.0 - s))
                            .collect(),
                    ),
            ),
            (
                LossVariant::UnmovingNormal,
                mean(train.iter().map(|s| (s - 0.5f64).abs()).collect())
                    + w * mean(test.iter().map(|s| 1.0 - s).collect()),
            ),
            (
                LossVariant::MeanMax,
                0.7 + w * mean(test.iter().map(|s| 1.0 - s).collect()),
            ),
            (LossVariant::MaxIndependent, 0.7 - w * 0.9),
        ];
        for (variant, expected) in cases {
            let got = LossSpec::new(variant, w)
                .unwrap()
                .value(&train, &test)
                .unwrap();
            assert!(
                (got - expected).abs() < 1e-14,
                "{variant:?}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let train = [0.21, 0.68, 0.43, 0.12];
        let test = [0.91, 0.33, 0.57];
        let h = 1e-6;
        for variant in LossVariant::ALL {
            let s = LossSpec::new(variant, 0.7).unwrap();
            let eval = s.evaluate(&train, &test, None).unwrap();
            for i in 0..train.len() {
                let (mut up, mut dn) = (train, train);
                up[i] += h;
                dn[i] -= h;
                let fd = (s.value(&up, &test).unwrap() - s.value(&dn, &test).unwrap()) / (2.0 * h);
                assert!(
                    (fd - eval.train_grad[i]).abs() < 1e-6,
                    "{variant:?} train {i}"
                );
            }
            for i in 0..test.len() {
                let (mut up, mut dn) = (test, test);
                up[i] += h;
                dn[i] -= h;
                let fd =
                    (s.value(&train, &up).unwrap() - s.value(&train, &dn).unwrap()) / (2.0 * h);
                assert!(
                    (fd - eval.test_grad[i]).abs() < 1e-6,
                    "{variant:?} test {i}"
                );
            }
        }
    }

    #[test]
    fn empty_group_drops_its_term() {
        let s = spec(LossVariant::BalancedMse);
        assert_eq!(s.value(&[0.5], &[]).unwrap(), 0.25);
        assert_eq!(s.value(&[], &[0.5]).unwrap(), 0.25);
        assert_eq!(s.value(&[], &[]).unwrap(), 0.0);
        for v in LossVariant::ALL {
            assert!(spec(v).value(&[], &[]).unwrap() == 0.0);
        }
    }

    #[test]
    fn non_finite_scores_name_their_group() {
        let s = spec(LossVariant::MeanMax);
        assert!(matches!(
            s.value(&[f64::NAN], &[0.5]),
            Err(Error::InvalidScore {
                group: Group::Train
            })
        ));
        assert!(matches!(
            s.value(&[0.1], &[f64::INFINITY]),
            Err(Error::InvalidScore { group: Group::Test })
        ));
    }

    #[test]
    fn weight_must_be_positive() {
        assert!(LossSpec::new(LossVariant::BalancedMse, 0.0).is_err());
        assert!(LossSpec::new(LossVariant::BalancedMse, -1.0).is_err());
        assert!(LossSpec::new(LossVariant::BalancedMse, f64::NAN).is_err());
    }

    #[test]
    fn max_independent_uses_larger_batches() {
        assert_eq!(LossVariant::MaxIndependent.default_batch_size(), 500);
        assert_eq!(LossVariant::BalancedMse.default_batch_size(), 100);
    }

    #[test]
    fn group_balanced_batches_average_to_full_loss() {
        // 4 batches, each with 3 train and 2 test rows.
        let train: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let test: Vec<f64> = (0..8).map(|i| (i as f64 * 0.91).cos().abs()).collect();
        let s = spec(LossVariant::BalancedMse);
        let full = s.value(&train, &test).unwrap();
        let batches: f64 = (0..4)
            .map(|b| {
                s.value(&train[b * 3..b * 3 + 3], &test[b * 2..b * 2 + 2])
                    .unwrap()
            })
            .sum::<f64>()
            / 4.0;
        assert!((full - batches).abs() < 1e-15);
    }
}
