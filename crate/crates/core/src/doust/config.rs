use serde::{Deserialize, Serialize};

use super::loss::LossSpec;
use crate::error::{Error, Result};
use crate::nn::AdamConfig;

/// How refinement batches are drawn from the union of training and test rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Batching {
    /// Shuffle the union every epoch and cut it into consecutive batches.
    #[default]
    Shuffled,
    /// Every batch holds half training rows and half test rows.
    Stratified,
}

/// Divisor of the mean-based loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupNorm {
    /// Divide by the number of rows of each group inside the batch.
    #[default]
    Batch,
    /// Divide by the size of each full set, so batch losses sum to the set loss.
    Dataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DoustConfig {
    pub hidden: Vec<usize>,
    pub pretrain_epochs: usize,
    pub refine_epochs: usize,
    /// `None` picks the loss variant's default.
    pub batch_size: Option<usize>,
    pub ensemble_size: usize,
    /// Fraction of input features given to each submodel; 1.0 disables bagging.
    pub feature_fraction: f64,
    pub seed: u64,
    pub loss: LossSpec,
    pub batching: Batching,
    pub group_norm: GroupNorm,
    pub optimizer: AdamConfig,
}

impl Default for DoustConfig {
    fn default() -> Self {
        Self {
            hidden: vec![100, 100, 100],
            pretrain_epochs: 5,
            refine_epochs: 50,
            batch_size: None,
            ensemble_size: 100,
            feature_fraction: 1.0,
            seed: 0,
            loss: LossSpec::default(),
            batching: Batching::default(),
            group_norm: GroupNorm::default(),
            optimizer: AdamConfig::default(),
        }
    }
}

impl DoustConfig {
    pub fn effective_batch_size(&self) -> usize {
        self.batch_size
            .unwrap_or_else(|| self.loss.variant.default_batch_size())
    }

    /// Pretraining may be switched off with zero epochs; refinement may not.
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if self.refine_epochs == 0 {
            return Err(Error::Config("refine_epochs must be at least 1".into()));
        }
        if self.effective_batch_size() < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        if self.ensemble_size == 0 {
            return Err(Error::Config("ensemble_size must be at least 1".into()));
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "feature_fraction must lie in (0, 1], got {}",
                self.feature_fraction
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0
            && (0.0..1.0).contains(&o.beta1)
            && (0.0..1.0).contains(&o.beta2)
            && o.epsilon > 0.0)
        {
            return Err(Error::Config("invalid optimizer settings".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doust::LossVariant;

    #[test]
    fn defaults() {
        let c = DoustConfig::default();
        assert_eq!(c.hidden, vec![100, 100, 100]);
        assert_eq!((c.pretrain_epochs, c.refine_epochs), (5, 50));
        assert_eq!(c.effective_batch_size(), 100);
        assert_eq!(c.ensemble_size, 100);
        c.validate().unwrap();
        let mut m = c.clone();
        m.loss.variant = LossVariant::MaxIndependent;
        assert_eq!(m.effective_batch_size(), 500);
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let base = DoustConfig::default();
        let mut c = base.clone();
        c.refine_epochs = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.batch_size = Some(1);
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.ensemble_size = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.feature_fraction = 0.0;
        assert!(c.validate().is_err());
        let mut c = base;
        c.pretrain_epochs = 0;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: DoustConfig =
            serde_json::from_str(r#"{"ensemble_size": 3, "loss": {"variant": "meanmax"}}"#)
                .unwrap();
        assert_eq!(c.ensemble_size, 3);
        assert_eq!(c.loss.variant, LossVariant::MeanMax);
        assert_eq!(c.loss.weight, 1.0);
        assert_eq!(c.refine_epochs, 50);
    }
}
