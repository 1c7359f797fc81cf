//! The two training phases of a single submodel.
//!
//! Pretraining maps every training row towards ½. Refinement then labels
//! training rows 0 and test rows 1 and minimises the configured loss over
//! mini-batches drawn from their union. Both phases report divergence as
//! [`Error::Diverged`] rather than panicking, so an ensemble can drop the
//! member and carry on.

use ndarray::{concatenate, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use super::config::{Batching, DoustConfig, GroupNorm};
use super::loss::{pretrain_loss, Denominators};
use crate::error::{Error, Result};
use crate::nn::{Network, OptimizerState};

/// Full-set loss before and after a phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseReport {
    pub loss_before: f64,
    pub loss_after: f64,
    pub steps: usize,
}

impl PhaseReport {
    pub fn improved(&self) -> bool {
        self.loss_after < self.loss_before
    }
}

fn full_pretrain_loss(net: &Network, train: ArrayView2<f64>) -> Result<f64> {
    let scores = net.forward(train)?;
    let (value, _) = pretrain_loss(scores.as_slice().expect("contiguous"))
        .map_err(|e| Error::Diverged(format!("pretraining: {e}")))?;
    Ok(value)
}

/// Trains `net` for `config.pretrain_epochs` epochs on `mean((f(x) − ½)²)`.
pub fn pretrain<R: Rng + ?Sized>(
    net: &mut Network,
    train: ArrayView2<f64>,
    config: &DoustConfig,
    rng: &mut R,
) -> Result<PhaseReport> {
    if train.nrows() == 0 {
        return Err(Error::Empty("pretraining needs training rows".into()));
    }
    ensure_finite(net, "before pretraining")?;
    let loss_before = full_pretrain_loss(net, train)?;
    if config.pretrain_epochs == 0 {
        return Ok(PhaseReport {
            loss_before,
            loss_after: loss_before,
            steps: 0,
        });
    }
    let batch = config.effective_batch_size();
    let mut opt = OptimizerState::new(net, config.optimizer);
    let mut order: Vec<usize> = (0..train.nrows()).collect();
    let mut steps = 0;
    for epoch in 0..config.pretrain_epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch) {
            let x = train.select(Axis(0), chunk);
            let pass = net.forward_cached(x.view())?;
            let (value, grad) = pretrain_loss(pass.scores().as_slice().expect("contiguous"))
                .map_err(|e| Error::Diverged(format!("pretraining epoch {epoch}: {e}")))?;
            if !value.is_finite() {
                return Err(Error::Diverged(format!(
                    "pretraining epoch {epoch}: loss {value}"
                )));
            }
            let grads = net.backward(&pass, &grad)?;
            if !grads.is_finite() {
                return Err(Error::Diverged(format!(
                    "pretraining epoch {epoch}: non-finite gradient"
                )));
            }
            opt.step(net, &grads)?;
            steps += 1;
        }
    }
    ensure_finite(net, "after pretraining")?;
    let loss_after = full_pretrain_loss(net, train)?;
    if !loss_after.is_finite() {
        return Err(Error::Diverged(
            "pretraining produced a non-finite loss".into(),
        ));
    }
    Ok(PhaseReport {
        loss_before,
        loss_after,
        steps,
    })
}

fn full_refine_loss(
    net: &Network,
    train: ArrayView2<f64>,
    test: ArrayView2<f64>,
    config: &DoustConfig,
) -> Result<f64> {
    let a = net.forward(train)?;
    let b = net.forward(test)?;
    config
        .loss
        .value(
            a.as_slice().expect("contiguous"),
            b.as_slice().expect("contiguous"),
        )
        .map_err(|e| Error::Diverged(format!("refinement: {e}")))
}

/// Test-time refinement: rows of `train` are pushed towards 0 and rows of
/// `test` towards 1 under `config.loss`.
pub fn refine<R: Rng + ?Sized>(
    net: &mut Network,
    train: ArrayView2<f64>,
    test: ArrayView2<f64>,
    config: &DoustConfig,
    rng: &mut R,
) -> Result<PhaseReport> {
    if train.ncols() != test.ncols() {
        return Err(Error::Dimension {
            expected: train.ncols(),
            found: test.ncols(),
        });
    }
    if train.nrows() + test.nrows() == 0 {
        return Err(Error::Empty("refinement needs at least one row".into()));
    }
    ensure_finite(net, "before refinement")?;
    let loss_before =
        full_refine_loss(net, train, test, config).map_err(diverged("before refinement"))?;
    let n_train = train.nrows();
    let union = concatenate(Axis(0), &[train, test]).map_err(|e| Error::Schema(e.to_string()))?;
    let batch = config.effective_batch_size();
    let mut opt = OptimizerState::new(net, config.optimizer);
    let mut steps = 0;

    let mut order: Vec<usize> = (0..union.nrows()).collect();
    let mut train_order: Vec<usize> = (0..n_train).collect();
    let mut test_order: Vec<usize> = (n_train..union.nrows()).collect();

    for epoch in 0..config.refine_epochs {
        let batches: Vec<Vec<usize>> = match config.batching {
            Batching::Shuffled => {
                order.shuffle(rng);
                order.chunks(batch).map(<[usize]>::to_vec).collect()
            }
            Batching::Stratified => {
                train_order.shuffle(rng);
                test_order.shuffle(rng);
                stratified_batches(&train_order, &test_order, batch)
            }
        };
        for rows in batches {
            refine_step(net, &mut opt, &union, &rows, n_train, config)
                .map_err(|e| Error::Diverged(format!("refinement epoch {epoch}: {e}")))?;
            steps += 1;
        }
    }
    ensure_finite(net, "after refinement")?;
    let loss_after =
        full_refine_loss(net, train, test, config).map_err(diverged("after refinement"))?;
    Ok(PhaseReport {
        loss_before,
        loss_after,
        steps,
    })
}

// The ReLU max swallows NaN activations, so finite scores alone do not
// prove the weights are intact.
fn ensure_finite(net: &Network, when: &str) -> Result<()> {
    if net.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged(format!("non-finite weights {when}")))
    }
}

/// Non-finite scores during a phase mean the weights have blown up.
fn diverged(when: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::InvalidScore { .. } => Error::Diverged(format!("{when}: {e}")),
        other => other,
    }
}

/// Half of every batch from each group, cycling through the smaller group.
fn stratified_batches(train: &[usize], test: &[usize], batch: usize) -> Vec<Vec<usize>> {
    if train.is_empty() || test.is_empty() {
        let only = if train.is_empty() { test } else { train };
        return only.chunks(batch).map(<[usize]>::to_vec).collect();
    }
    let half = (batch / 2).max(1);
    let longest = train.len().max(test.len());
    let n_batches = longest.div_ceil(half);
    (0..n_batches)
        .map(|k| {
            let mut rows = Vec::with_capacity(2 * half);
            rows.extend((0..half).map(|j| train[(k * half + j) % train.len()]));
            rows.extend((0..half).map(|j| test[(k * half + j) % test.len()]));
            rows
        })
        .collect()
}

fn refine_step(
    net: &mut Network,
    opt: &mut OptimizerState,
    union: &ndarray::Array2<f64>,
    rows: &[usize],
    n_train: usize,
    config: &DoustConfig,
) -> Result<()> {
    let x = union.select(Axis(0), rows);
    let pass = net.forward_cached(x.view())?;
    let scores = pass.scores();
    let mut train_pos = Vec::new();
    let mut test_pos = Vec::new();
    for (pos, &row) in rows.iter().enumerate() {
        if row < n_train {
            train_pos.push(pos);
        } else {
            test_pos.push(pos);
        }
    }
    let train_scores: Vec<f64> = train_pos.iter().map(|&p| scores[p]).collect();
    let test_scores: Vec<f64> = test_pos.iter().map(|&p| scores[p]).collect();
    let denominators = match config.group_norm {
        GroupNorm::Batch => None,
        GroupNorm::Dataset => Some(Denominators {
            train: n_train as f64,
            test: (union.nrows() - n_train) as f64,
        }),
    };
    let eval = config
        .loss
        .evaluate(&train_scores, &test_scores, denominators)?;
    if !eval.value.is_finite() {
        return Err(Error::Diverged(format!("loss {}", eval.value)));
    }
    let mut grad = vec![0.0; rows.len()];
    for (&p, g) in train_pos.iter().zip(&eval.train_grad) {
        grad[p] = *g;
    }
    for (&p, g) in test_pos.iter().zip(&eval.test_grad) {
        grad[p] = *g;
    }
    let grads = net.backward(&pass, &grad)?;
    if !grads.is_finite() {
        return Err(Error::Diverged("non-finite gradient".into()));
    }
    opt.step(net, &grads)
}
