//! ROC-AUC as a two-sample rank statistic.
//!
//! `roc(A, B)` is the probability that a random element of `B` scores higher
//! than a random element of `A`, with ties counted as one half. Pairs are
//! counted exactly in integer arithmetic, so mixture and duplication identities
//! hold to the last bit rather than approximately.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn sorted_finite(values: &[f64], what: &str) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Empty(format!("{what} has no scores")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain(format!("{what} contains NaN")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Twice the number of pairs `(a, b)` with `b > a`, plus once the tied pairs.
fn doubled_wins(sorted_a: &[f64], b: &[f64]) -> u128 {
    b.iter()
        .map(|&x| {
            let below = sorted_a.partition_point(|&a| a < x) as u128;
            let not_above = sorted_a.partition_point(|&a| a <= x) as u128;
            2 * below + (not_above - below)
        })
        .sum()
}

/// `P(b > a) + ½ P(b = a)` for `a` drawn from `set_a` and `b` from `set_b`.
pub fn roc_auc(set_a: &[f64], set_b: &[f64]) -> Result<f64> {
    let a = sorted_finite(set_a, "first set")?;
    sorted_finite(set_b, "second set")?;
    let wins = doubled_wins(&a, set_b);
    let pairs = 2 * (set_a.len() as u128) * (set_b.len() as u128);
    Ok(wins as f64 / pairs as f64)
}

/// Scores paired with binary labels (1 = anomaly).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSet {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Dimension {
                expected: scores.len(),
                found: labels.len(),
            });
        }
        Ok(Self { scores, labels })
    }

    pub fn split(&self) -> (Vec<f64>, Vec<f64>) {
        let mut normal = Vec::new();
        let mut anomalous = Vec::new();
        for (&s, &l) in self.scores.iter().zip(&self.labels) {
            if l == 1 {
                anomalous.push(s);
            } else {
                normal.push(s);
            }
        }
        (normal, anomalous)
    }

    /// ROC-AUC of anomalies against normals; errors unless both classes occur.
    pub fn roc_auc(&self) -> Result<f64> {
        let (normal, anomalous) = self.split();
        if normal.is_empty() || anomalous.is_empty() {
            return Err(Error::Empty(
                "ROC-AUC needs both normal and anomalous samples".into(),
            ));
        }
        roc_auc(&normal, &anomalous)
    }
}

/// `|roc(A, B ∪ C) − (|B|·roc(A, B) + |C|·roc(A, C)) / (|B| + |C|)|`.
pub fn roc_mixture_residual(a: &[f64], b: &[f64], c: &[f64]) -> Result<f64> {
    let union: Vec<f64> = b.iter().chain(c).copied().collect();
    let lhs = roc_auc(a, &union)?;
    let (nb, nc) = (b.len() as f64, c.len() as f64);
    let rhs = (nb * roc_auc(a, b)? + nc * roc_auc(a, c)?) / (nb + nc);
    Ok((lhs - rhs).abs())
}

/// Residuals of the worst-case-sample scalings
/// `roc(A + w_A, B) = N_A/(N_A + 1)·roc(A, B)` with `w_A > max(B)` and
/// `roc(A, B + w_B) = N_B/(N_B + 1)·roc(A, B)` with `w_B < min(A)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstCaseResiduals {
    pub appended_to_a: f64,
    pub appended_to_b: f64,
}

pub fn worst_case_addition_check(a: &[f64], b: &[f64]) -> Result<WorstCaseResiduals> {
    let base = roc_auc(a, b)?;
    let max_b = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_a = a.iter().copied().fold(f64::INFINITY, f64::min);
    let w_a = max_b + 1.0 + max_b.abs();
    let w_b = min_a - 1.0 - min_a.abs();

    let mut a_plus = a.to_vec();
    a_plus.push(w_a);
    let mut b_plus = b.to_vec();
    b_plus.push(w_b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    Ok(WorstCaseResiduals {
        appended_to_a: (roc_auc(&a_plus, b)? - na / (na + 1.0) * base).abs(),
        appended_to_b: (roc_auc(a, &b_plus)? - nb / (nb + 1.0) * base).abs(),
    })
}

/// Inverts `ROC_tt = (1 − ν)/2 + ν·ROC_na` to estimate the normal-vs-anomaly
/// ROC-AUC from the label-free train-vs-test ROC-AUC. The result is clamped to
/// [0, 1] with a warning when sampling noise pushes it outside.
pub fn traintest_to_normalabnormal(roc_tt: f64, nu: f64) -> Result<f64> {
    recover_normal_abnormal(roc_tt, nu, 0.5)
}

/// Like [`traintest_to_normalabnormal`] but with a measured baseline
/// `roc(train, test normals)` in place of its population value ½.
pub fn recover_normal_abnormal(roc_tt: f64, nu: f64, baseline: f64) -> Result<f64> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::Domain(format!(
            "anomaly fraction must lie in (0, 1], got {nu}"
        )));
    }
    let raw = (roc_tt - (1.0 - nu) * baseline) / nu;
    if !(0.0..=1.0).contains(&raw) {
        log::warn!("recovered ROC-AUC {raw} outside [0, 1]; clamping");
        return Ok(raw.clamp(0.0, 1.0));
    }
    Ok(raw)
}

/// Exact decomposition of the train-vs-test ROC-AUC into its normal and
/// anomalous parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainTestDecomposition {
    /// `roc(train, test)`.
    pub train_test: f64,
    /// `roc(train, test normals)`, ½ in the infinite-sample limit.
    pub baseline: f64,
    /// `roc(train, test anomalies)`.
    pub normal_abnormal: f64,
    pub nu: f64,
    /// `|train_test − ((1 − ν)·baseline + ν·normal_abnormal)|`.
    pub residual: f64,
}

pub fn decompose_train_test(
    train: &[f64],
    test_normal: &[f64],
    test_anomalous: &[f64],
) -> Result<TrainTestDecomposition> {
    let test: Vec<f64> = test_normal.iter().chain(test_anomalous).copied().collect();
    let train_test = roc_auc(train, &test)?;
    let baseline = roc_auc(train, test_normal)?;
    let normal_abnormal = roc_auc(train, test_anomalous)?;
    let nu = test_anomalous.len() as f64 / test.len() as f64;
    let residual = (train_test - ((1.0 - nu) * baseline + nu * normal_abnormal)).abs();
    Ok(TrainTestDecomposition {
        train_test,
        baseline,
        normal_abnormal,
        nu,
        residual,
    })
}

/// Two-sample Kolmogorov–Smirnov distance `sup |F_a − F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted_finite(a, "first set")?;
    let b = sorted_finite(b, "second set")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(best)
}
