//! Closed-form minimisers of the weighted balanced loss in the infinite-sample
//! limit.
//!
//! With test contamination `ν`, training contamination `γ < ν` and test weight
//! `ω`, a score shared by all normal points and one shared by all abnormal points
//! minimise the expected loss at
//!
//! ```text
//! normal*   = ω(1 − ν) / (1 + ω(1 − ν) − γ)
//! abnormal* = νω / (γ + νω)
//! ```
//!
//! and their gap is `Δ = (ν − γ)ω / ((1 + ω − γ − ων)(ων + γ))`. Without
//! contamination this reduces to `abnormal* = 1`, `Δ = 1 / (1 + ω − νω)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub normal: f64,
    pub abnormal: f64,
    pub separation: f64,
}

fn check_domain(nu: f64, weight: f64, contamination: f64) -> Result<()> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::Domain(format!(
            "anomaly fraction must lie in (0, 1), got {nu}"
        )));
    }
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(Error::Domain(format!(
            "weight must be positive, got {weight}"
        )));
    }
    if !(contamination >= 0.0 && contamination < nu) {
        return Err(Error::Domain(format!(
            "training contamination must satisfy 0 <= gamma < nu, got {contamination}"
        )));
    }
    Ok(())
}

pub fn population_optimum(nu: f64, weight: f64, contamination: f64) -> Result<Optimum> {
    check_domain(nu, weight, contamination)?;
    let (w, g) = (weight, contamination);
    if g == 0.0 {
        return Ok(Optimum {
            normal: (1.0 - nu) / (1.0 + 1.0 / w - nu),
            abnormal: 1.0,
            separation: 1.0 / (1.0 + w - nu * w),
        });
    }
    Ok(Optimum {
        normal: w * (1.0 - nu) / (1.0 + w * (1.0 - nu) - g),
        abnormal: nu * w / (g + nu * w),
        separation: (nu - g) * w / ((1.0 + w - g - w * nu) * (w * nu + g)),
    })
}

/// The weight maximising the separation under contamination `γ > 0`:
/// `ω* = sqrt(γ(1 − γ) / (ν(1 − ν)))`.
///
/// Without contamination the separation decreases monotonically in `ω`, so
/// there is no interior maximum and `γ = 0` is a domain error.
pub fn optimal_weight(nu: f64, contamination: f64) -> Result<f64> {
    check_domain(nu, 1.0, contamination)?;
    if contamination == 0.0 {
        return Err(Error::Domain(
            "without contamination the separation has no interior maximum".into(),
        ));
    }
    let g = contamination;
    Ok((g * (1.0 - g) / (nu * (1.0 - nu))).sqrt())
}
