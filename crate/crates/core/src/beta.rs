//! Beta-distributed cell occupancy.
//!
//! A cell's occupancy probability `r` is tracked as `Beta(alpha, beta)`, where
//! `alpha` and `beta` act as pseudo-detection and pseudo-miss counts. Sensor
//! evidence enters as weighted expected counts, which keeps the posterior in
//! the Beta family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cap on the evidence counts that scale the sensor weights. The weight
/// expressions hold for small counts; past the cap the weight saturates.
pub const WEIGHT_COUNT_CAP: f64 = 1.0;

/// Default per-epoch evidence retention.
pub const DEFAULT_DISCOUNT: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaState {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for BetaState {
    fn default() -> Self {
        Self::IGNORANT
    }
}

impl BetaState {
    /// The uniform prior `Beta(1, 1)`.
    pub const IGNORANT: BetaState = BetaState { alpha: 1.0, beta: 1.0 };

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid("alpha", "must be positive and finite"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid("beta", "must be positive and finite"));
        }
        Ok(BetaState { alpha, beta })
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    /// Conjugate posterior after `delta_alpha` pseudo-detections and
    /// `delta_beta` pseudo-misses.
    pub fn conjugate_update(&self, delta_alpha: f64, delta_beta: f64) -> BetaState {
        assert!(
            delta_alpha >= 0.0 && delta_beta >= 0.0,
            "pseudo-counts must be non-negative (got {delta_alpha}, {delta_beta})"
        );
        BetaState {
            alpha: self.alpha + delta_alpha,
            beta: self.beta + delta_beta,
        }
    }

    /// Pulls the counts toward the ignorant prior: `gamma = 1` keeps the state,
    /// `gamma = 0` resets it to `Beta(1, 1)`.
    pub fn discount(&self, gamma: f64) -> BetaState {
        BetaState {
            alpha: 1.0 + gamma * (self.alpha - 1.0),
            beta: 1.0 + gamma * (self.beta - 1.0),
        }
    }
}

/// Likelihood-ratio description of one sensor's detection and miss evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub id: String,
    /// `g(det | occupied) / g(det | empty)`.
    pub lr_det: f64,
    /// `g(miss | empty) / g(miss | occupied)`.
    pub lr_miss: f64,
}

impl SensorModel {
    pub fn new(id: impl Into<String>, lr_det: f64, lr_miss: f64) -> Result<Self> {
        let model = SensorModel {
            id: id.into(),
            lr_det,
            lr_miss,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr_det > 1.0 && self.lr_det.is_finite()) {
            return Err(Error::invalid("lr_det", "likelihood ratio must be finite and > 1"));
        }
        if !(self.lr_miss > 1.0 && self.lr_miss.is_finite()) {
            return Err(Error::invalid("lr_miss", "likelihood ratio must be finite and > 1"));
        }
        Ok(())
    }

    /// Per-count weights `(w_det, w_miss)` for a cell in `state`.
    pub fn weights(&self, state: &BetaState) -> (f64, f64) {
        let alpha_eff = state.alpha.min(WEIGHT_COUNT_CAP);
        let beta_eff = state.beta.min(WEIGHT_COUNT_CAP);
        ((self.lr_det - 1.0) * alpha_eff, (self.lr_miss - 1.0) * beta_eff)
    }
}

/// Free-function form of [`SensorModel::weights`].
pub fn sensor_weights(model: &SensorModel, state: &BetaState) -> (f64, f64) {
    model.weights(state)
}

/// Fuses expected detection and miss counts from several sensors into
/// `(delta_alpha, delta_beta)`. Weights come from `state`, the prior for the
/// epoch, so the result does not depend on sensor order.
pub fn pseudo_counts<'a, I>(observations: I, state: &BetaState) -> Result<(f64, f64)>
where
    I: IntoIterator<Item = (&'a SensorModel, f64, f64)>,
{
    let mut delta_alpha = 0.0;
    let mut delta_beta = 0.0;
    for (model, n_det, n_miss) in observations {
        if n_det.is_nan() || n_det < 0.0 {
            return Err(Error::invalid(
                "n_det",
                format!("negative count {n_det} from sensor `{}`", model.id),
            ));
        }
        if n_miss.is_nan() || n_miss < 0.0 {
            return Err(Error::invalid(
                "n_miss",
                format!("negative count {n_miss} from sensor `{}`", model.id),
            ));
        }
        let (w_det, w_miss) = model.weights(state);
        delta_alpha += w_det * n_det;
        delta_beta += w_miss * n_miss;
    }
    Ok((delta_alpha, delta_beta))
}
