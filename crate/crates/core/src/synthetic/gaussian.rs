//! Two axis-aligned Gaussians: how close does test-time training get to the
//! Bayes-optimal detector as the sample count grows?

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use crate::doust::{train_ensemble, DoustConfig};
use crate::error::{Error, Result};
use crate::metrics::roc_auc;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianMethod {
    Doust,
    /// Linear discriminant fitted on the labelled test set plus the training
    /// normals; an upper reference that knows the labels.
    SupervisedOracle,
    /// The optimal discriminant from the true parameters.
    BayesOracle,
}

/// How repetitions are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// One AUC per repetition, then the mean.
    #[default]
    Metric,
    /// Every repetition scores one shared test set; scores are averaged like an
    /// ensemble and a single AUC is reported.
    Predictions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianSpec {
    pub dims: usize,
    pub normal_mean: Vec<f64>,
    pub abnormal_mean: Vec<f64>,
    pub sigma: Vec<f64>,
    pub nu: f64,
    pub n_train: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub averaging: Averaging,
    /// Network settings for [`GaussianMethod::Doust`]; the ensemble size is
    /// forced to one.
    pub doust: DoustConfig,
}

impl Default for GaussianSpec {
    fn default() -> Self {
        Self::new(10, 0.01, 1000)
    }
}

impl GaussianSpec {
    /// Unit variance, means 0 and 1 in every dimension.
    pub fn new(dims: usize, nu: f64, n_train: usize) -> Self {
        Self {
            dims,
            normal_mean: vec![0.0; dims],
            abnormal_mean: vec![1.0; dims],
            sigma: vec![1.0; dims],
            nu,
            n_train,
            repetitions: 30,
            seed: 0,
            averaging: Averaging::Metric,
            doust: DoustConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::Config("dims must be at least 1".into()));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::Config(format!(
                "nu must lie in (0, 1), got {}",
                self.nu
            )));
        }
        for (name, v) in [
            ("normal_mean", &self.normal_mean),
            ("abnormal_mean", &self.abnormal_mean),
            ("sigma", &self.sigma),
        ] {
            if v.len() != self.dims {
                return Err(Error::Dimension {
                    expected: self.dims,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        if self.sigma.iter().any(|&s| s <= 0.0) {
            return Err(Error::Config("sigma must be positive".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("at least one repetition is required".into()));
        }
        let (normals, outliers) = self.test_counts();
        if self.n_train < 2 || normals == 0 || outliers == 0 {
            return Err(Error::Config(format!(
                "n_train={} with nu={} leaves an empty group",
                self.n_train, self.nu
            )));
        }
        Ok(())
    }

    /// `((1 − ν)N, νN)` rounded to whole samples.
    pub fn test_counts(&self) -> (usize, usize) {
        let outliers = (self.nu * self.n_train as f64).round() as usize;
        (self.n_train.saturating_sub(outliers), outliers)
    }

    fn draw(&self, rng: &mut ChaCha8Rng, n: usize, mean: &[f64]) -> Array2<f64> {
        Array2::from_shape_fn((n, self.dims), |(_, j)| {
            mean[j] + self.sigma[j] * rng.sample::<f64, _>(StandardNormal)
        })
    }

    fn draw_test(&self, rng: &mut ChaCha8Rng) -> (Array2<f64>, Vec<u8>) {
        let (n0, n1) = self.test_counts();
        let a = self.draw(rng, n0, &self.normal_mean);
        let b = self.draw(rng, n1, &self.abnormal_mean);
        let x = ndarray::concatenate(Axis(0), &[a.view(), b.view()]).expect("same width");
        let labels = std::iter::repeat_n(0, n0)
            .chain(std::iter::repeat_n(1, n1))
            .collect();
        (x, labels)
    }

    fn bayes_weights(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.dims, |j| {
            (self.abnormal_mean[j] - self.normal_mean[j]) / (self.sigma[j] * self.sigma[j])
        })
    }
}

/// `Φ(δ/√2)` with `δ² = Σ ((μ₁ − μ₀)/σ)²`, the AUC of the optimal linear score.
pub fn bayes_auc(spec: &GaussianSpec) -> f64 {
    let delta: f64 = (0..spec.dims)
        .map(|j| ((spec.abnormal_mean[j] - spec.normal_mean[j]) / spec.sigma[j]).powi(2))
        .sum::<f64>()
        .sqrt();
    StatNormal::standard().cdf(delta / std::f64::consts::SQRT_2)
}

fn linear_scores(x: ArrayView2<f64>, w: &Array1<f64>) -> Vec<f64> {
    x.dot(w).to_vec()
}

/// Diagonal-covariance discriminant estimated from labelled rows.
fn fit_diagonal_discriminant(x: ArrayView2<f64>, labels: &[u8]) -> Array1<f64> {
    let d = x.ncols();
    let mut sums = [Array1::<f64>::zeros(d), Array1::<f64>::zeros(d)];
    let mut counts = [0usize; 2];
    for (row, &l) in x.rows().into_iter().zip(labels) {
        sums[l as usize] += &row;
        counts[l as usize] += 1;
    }
    let means = [&sums[0] / counts[0] as f64, &sums[1] / counts[1] as f64];
    let mut var = Array1::<f64>::zeros(d);
    for (row, &l) in x.rows().into_iter().zip(labels) {
        let diff = &row - &means[l as usize];
        var += &(&diff * &diff);
    }
    var /= (labels.len() - 2).max(1) as f64;
    Array1::from_shape_fn(d, |j| {
        (means[1][j] - means[0][j]) / var[j].max(f64::MIN_POSITIVE)
    })
}

fn method_scores(
    spec: &GaussianSpec,
    method: GaussianMethod,
    train: &Array2<f64>,
    test: &Array2<f64>,
    labels: &[u8],
    rep: usize,
) -> Result<Vec<f64>> {
    match method {
        GaussianMethod::BayesOracle => Ok(linear_scores(test.view(), &spec.bayes_weights())),
        GaussianMethod::SupervisedOracle => {
            let x =
                ndarray::concatenate(Axis(0), &[train.view(), test.view()]).expect("same width");
            let y: Vec<u8> = std::iter::repeat_n(0, train.nrows())
                .chain(labels.iter().copied())
                .collect();
            Ok(linear_scores(
                test.view(),
                &fit_diagonal_discriminant(x.view(), &y),
            ))
        }
        GaussianMethod::Doust => {
            let config = DoustConfig {
                ensemble_size: 1,
                seed: spec
                    .doust
                    .seed
                    .wrapping_add(spec.seed)
                    .wrapping_add(rep as u64),
                ..spec.doust.clone()
            };
            let model = train_ensemble(train.view(), test.view(), &config)?;
            Ok(model.score(test.view())?.to_vec())
        }
    }
}

fn auc_of(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (&s, &l) in scores.iter().zip(labels) {
        if l == 1 {
            b.push(s);
        } else {
            a.push(s);
        }
    }
    roc_auc(&a, &b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianOutcome {
    pub method: GaussianMethod,
    pub n_train: usize,
    pub nu: f64,
    pub averaging: Averaging,
    pub mean_auc: f64,
    /// Standard error of the mean; absent with prediction averaging.
    pub stderr: Option<f64>,
    /// Per-repetition AUCs (metric averaging only).
    pub aucs: Vec<f64>,
    pub failures: usize,
}

pub fn gaussian_experiment(spec: &GaussianSpec, method: GaussianMethod) -> Result<GaussianOutcome> {
    spec.validate()?;
    let data_rng = |stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(stream);
        rng
    };
    match spec.averaging {
        Averaging::Metric => {
            let results = par::map_indexed(spec.repetitions, |rep| -> Result<f64> {
                let mut rng = data_rng(rep as u64);
                let train = spec.draw(&mut rng, spec.n_train, &spec.normal_mean);
                let (test, labels) = spec.draw_test(&mut rng);
                let scores = method_scores(spec, method, &train, &test, &labels, rep)?;
                auc_of(&scores, &labels)
            });
            let mut aucs = Vec::new();
            let mut failures = 0;
            for (rep, r) in results.into_iter().enumerate() {
                match r {
                    Ok(a) => aucs.push(a),
                    Err(e) => {
                        log::warn!("gaussian repetition {rep} failed: {e}");
                        failures += 1;
                    }
                }
            }
            if aucs.is_empty() {
                return Err(Error::Diverged(format!(
                    "all {failures} repetitions failed"
                )));
            }
            let k = aucs.len() as f64;
            let mean = aucs.iter().sum::<f64>() / k;
            let stderr = if aucs.len() > 1 {
                let var = aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (k - 1.0);
                Some((var / k).sqrt())
            } else {
                None
            };
            Ok(GaussianOutcome {
                method,
                n_train: spec.n_train,
                nu: spec.nu,
                averaging: spec.averaging,
                mean_auc: mean,
                stderr,
                aucs,
                failures,
            })
        }
        Averaging::Predictions => {
            // Stream u64::MAX is reserved for the shared test set.
            let (test, labels) = spec.draw_test(&mut data_rng(u64::MAX));
            let results = par::map_indexed(spec.repetitions, |rep| -> Result<Vec<f64>> {
                let mut rng = data_rng(rep as u64);
                let train = spec.draw(&mut rng, spec.n_train, &spec.normal_mean);
                method_scores(spec, method, &train, &test, &labels, rep)
            });
            let mut total = vec![0.0; labels.len()];
            let mut ok = 0usize;
            let mut failures = 0;
            for (rep, r) in results.into_iter().enumerate() {
                match r {
                    Ok(s) => {
                        ok += 1;
                        total.iter_mut().zip(&s).for_each(|(t, v)| *t += v);
                    }
                    Err(e) => {
                        log::warn!("gaussian repetition {rep} failed: {e}");
                        failures += 1;
                    }
                }
            }
            if ok == 0 {
                return Err(Error::Diverged(format!(
                    "all {failures} repetitions failed"
                )));
            }
            total.iter_mut().for_each(|t| *t /= ok as f64);
            Ok(GaussianOutcome {
                method,
                n_train: spec.n_train,
                nu: spec.nu,
                averaging: spec.averaging,
                mean_auc: auc_of(&total, &labels)?,
                stderr: None,
                aucs: Vec::new(),
                failures,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_bayes_auc() {
        let spec = GaussianSpec::default();
        let want = StatNormal::standard().cdf(5f64.sqrt());
        assert!((bayes_auc(&spec) - want).abs() < 1e-15);
        assert!((bayes_auc(&spec) - 0.9873).abs() < 1e-4);
    }

    #[test]
    fn bayes_oracle_monte_carlo_matches_closed_form() {
        let mut spec = GaussianSpec::new(10, 0.5, 20_000);
        spec.repetitions = 4;
        let out = gaussian_experiment(&spec, GaussianMethod::BayesOracle).unwrap();
        assert!(
            (out.mean_auc - bayes_auc(&spec)).abs() < 3e-3,
            "{}",
            out.mean_auc
        );
    }

    #[test]
    fn bayes_oracle_is_translation_invariant() {
        let mut spec = GaussianSpec::new(3, 0.3, 500);
        spec.repetitions = 3;
        let a = gaussian_experiment(&spec, GaussianMethod::BayesOracle).unwrap();
        spec.normal_mean.iter_mut().for_each(|m| *m += 7.5);
        spec.abnormal_mean.iter_mut().for_each(|m| *m += 7.5);
        let b = gaussian_experiment(&spec, GaussianMethod::BayesOracle).unwrap();
        for (x, y) in a.aucs.iter().zip(&b.aucs) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn supervised_oracle_is_close_to_bayes() {
        let mut spec = GaussianSpec::new(10, 0.1, 5000);
        spec.repetitions = 3;
        let out = gaussian_experiment(&spec, GaussianMethod::SupervisedOracle).unwrap();
        assert!(
            (out.mean_auc - bayes_auc(&spec)).abs() < 0.01,
            "{}",
            out.mean_auc
        );
    }

    #[test]
    fn prediction_averaging_reports_one_auc() {
        let mut spec = GaussianSpec::new(2, 0.2, 300);
        spec.repetitions = 3;
        spec.averaging = Averaging::Predictions;
        let out = gaussian_experiment(&spec, GaussianMethod::SupervisedOracle).unwrap();
        assert!(out.stderr.is_none() && out.aucs.is_empty());
        assert!(out.mean_auc > 0.7);
    }

    #[test]
    fn test_counts_and_validation() {
        assert_eq!(GaussianSpec::new(10, 0.01, 1000).test_counts(), (990, 10));
        assert!(GaussianSpec::new(10, 0.01, 10).validate().is_err());
        assert!(GaussianSpec::new(0, 0.1, 100).validate().is_err());
        assert!(GaussianSpec::new(2, 1.0, 100).validate().is_err());
    }
}
