//! One-dimensional misalignment experiment.
//!
//! Normals are standard normal, a small group of outliers sits beyond the right
//! threshold `t = Φ⁻¹(1 − f)`. A one-sided detector has to guess which tail the
//! outliers live in by counting points beyond each threshold; once the
//! binomial noise in those counts swamps `O` it picks the wrong side about half
//! the time. A two-sided detector never guesses but flags both tails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThoughtConfig {
    pub n_normal: usize,
    pub n_outliers: usize,
    /// Probability mass of one tail beyond the threshold.
    pub tail_fraction: f64,
    /// Outlier mean relative to the right threshold.
    pub outlier_offset: f64,
    pub outlier_std: f64,
    /// Split the outliers evenly between both tails (the null case).
    pub symmetric: bool,
    pub seed: u64,
    pub repetitions: usize,
}

impl Default for ThoughtConfig {
    fn default() -> Self {
        Self {
            n_normal: 1000,
            n_outliers: 20,
            tail_fraction: 0.023,
            outlier_offset: 2.0,
            outlier_std: 0.5,
            symmetric: false,
            seed: 0,
            repetitions: 1000,
        }
    }
}

impl ThoughtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_outliers == 0 {
            return Err(Error::Config(
                "the thought experiment needs at least one outlier".into(),
            ));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 0.5) {
            return Err(Error::Config(format!(
                "tail fraction must lie in (0, 0.5), got {}",
                self.tail_fraction
            )));
        }
        // Written to reject NaN as well.
        if self.outlier_std.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
            || !self.outlier_offset.is_finite()
        {
            return Err(Error::Config(
                "outlier location must be finite with positive spread".into(),
            ));
        }
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        StatNormal::standard().inverse_cdf(1.0 - self.tail_fraction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThoughtTrial {
    pub chosen: Side,
    pub beyond_left: usize,
    pub beyond_right: usize,
    pub auc_one_sided: f64,
    pub auc_two_sided: f64,
    /// Normals flagged plus outliers missed by the threshold on the chosen side.
    pub mistakes_one_sided: usize,
    /// Same count when flagging everything beyond either threshold.
    pub mistakes_two_sided: usize,
}

/// `P(outlier > normal) + ½ P(tie)` for many normals and few outliers: sort the
/// outliers once and place every normal by binary search.
fn auc_few_positives(normals: impl Iterator<Item = f64>, outliers: &mut [f64]) -> f64 {
    outliers.sort_by(f64::total_cmp);
    let o = outliers.len();
    let mut doubled_wins: u64 = 0;
    let mut n = 0u64;
    for x in normals {
        let below = outliers.partition_point(|&s| s < x);
        let not_above = outliers.partition_point(|&s| s <= x);
        doubled_wins += 2 * (o - not_above) as u64 + (not_above - below) as u64;
        n += 1;
    }
    doubled_wins as f64 / (2.0 * n as f64 * o as f64)
}

/// One repetition; repetition `rep` draws from stream `rep` of the seed.
pub fn thought_trial(cfg: &ThoughtConfig, rep: usize) -> Result<ThoughtTrial> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(rep as u64);
    let t = cfg.threshold();
    let normals: Vec<f64> = (0..cfg.n_normal)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let bump = Normal::new(t + cfg.outlier_offset, cfg.outlier_std).expect("validated");
    let outliers: Vec<f64> = (0..cfg.n_outliers)
        .map(|i| {
            let x = bump.sample(&mut rng);
            if cfg.symmetric && i % 2 == 1 {
                -x
            } else {
                x
            }
        })
        .collect();

    let all = || normals.iter().chain(&outliers);
    let beyond_right = all().filter(|&&x| x > t).count();
    let beyond_left = all().filter(|&&x| x < -t).count();
    let chosen = match beyond_right.cmp(&beyond_left) {
        std::cmp::Ordering::Greater => Side::Right,
        std::cmp::Ordering::Less => Side::Left,
        std::cmp::Ordering::Equal => {
            if rng.random::<bool>() {
                Side::Right
            } else {
                Side::Left
            }
        }
    };
    let sign = chosen.sign();

    let mut one: Vec<f64> = outliers.iter().map(|x| sign * x).collect();
    let auc_one_sided = auc_few_positives(normals.iter().map(|x| sign * x), &mut one);
    let mut two: Vec<f64> = outliers.iter().map(|x| x.abs()).collect();
    let auc_two_sided = auc_few_positives(normals.iter().map(|x| x.abs()), &mut two);

    let flag_one = |x: f64| sign * x > t;
    let flag_two = |x: f64| x.abs() > t;
    let mistakes = |flag: &dyn Fn(f64) -> bool| {
        normals.iter().filter(|&&x| flag(x)).count()
            + outliers.iter().filter(|&&x| !flag(x)).count()
    };
    Ok(ThoughtTrial {
        chosen,
        beyond_left,
        beyond_right,
        auc_one_sided,
        auc_two_sided,
        mistakes_one_sided: mistakes(&flag_one),
        mistakes_two_sided: mistakes(&flag_two),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThoughtSummary {
    pub config: ThoughtConfig,
    pub p_right: f64,
    pub mean_auc_one_sided: f64,
    pub mean_auc_two_sided: f64,
    pub mean_mistakes_one_sided: f64,
    pub mean_mistakes_two_sided: f64,
    pub trials: Vec<ThoughtTrial>,
}

/// Runs `cfg.repetitions` independent trials, in parallel when enabled.
pub fn thought_experiment(cfg: &ThoughtConfig) -> Result<ThoughtSummary> {
    cfg.validate()?;
    if cfg.repetitions == 0 {
        return Err(Error::Config("at least one repetition is required".into()));
    }
    let trials = par::map_indexed(cfg.repetitions, |rep| {
        thought_trial(cfg, rep).expect("validated")
    });
    let k = trials.len() as f64;
    let mean = |f: &dyn Fn(&ThoughtTrial) -> f64| trials.iter().map(f).sum::<f64>() / k;
    Ok(ThoughtSummary {
        config: *cfg,
        p_right: mean(&|t| f64::from(u8::from(t.chosen == Side::Right))),
        mean_auc_one_sided: mean(&|t| t.auc_one_sided),
        mean_auc_two_sided: mean(&|t| t.auc_two_sided),
        mean_mistakes_one_sided: mean(&|t| t.mistakes_one_sided as f64),
        mean_mistakes_two_sided: mean(&|t| t.mistakes_two_sided as f64),
        trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionMargin {
    /// `O / √(N f (1 − f))`; far above 1 means the outliers outnumber the
    /// binomial noise in the tail counts.
    pub margin: f64,
    pub nu: f64,
    /// The cruder requirement `N ≫ 1/ν²`.
    pub rule_of_thumb_n: f64,
    pub rule_of_thumb_met: bool,
}

pub fn condition_margin(n: usize, o: usize, f: f64) -> Result<ConditionMargin> {
    if n == 0 || !(f > 0.0 && f < 1.0) {
        return Err(Error::Domain(format!(
            "condition margin needs N > 0 and f in (0, 1), got N={n}, f={f}"
        )));
    }
    let nu = o as f64 / (n + o) as f64;
    let rule = 1.0 / (nu * nu);
    Ok(ConditionMargin {
        margin: o as f64 / (n as f64 * f * (1.0 - f)).sqrt(),
        nu,
        rule_of_thumb_n: rule,
        rule_of_thumb_met: (n as f64) > rule,
    })
}

/// Normal count beyond which flagging both tails costs more mistakes than a
/// one-sided detector that merely guesses the side: `fN > A/2`.
pub fn guessing_bound(n_outliers: usize, f: f64) -> f64 {
    n_outliers as f64 / (2.0 * f)
}
