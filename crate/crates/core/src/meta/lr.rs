use serde::{Deserialize, Serialize};

use super::{FeatureLayout, MetaFeatures, MetaLabels};
use crate::base_model::TrainConfig;
use crate::error::{Error, Result};
use crate::numeric::{dot, sigmoid, Matrix};

/// L2-regularised logistic regression over meta-features: `z = sigmoid(θ·x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrMeta {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub l2: f64,
    pub layout: Option<FeatureLayout>,
    /// Objective after every gradient step (index 0 is the starting point).
    pub train_loss: Vec<f64>,
    pub gradient_norm: f64,
}

impl LrMeta {
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::invalid(format!(
                "LR meta-model expects {} features, got {}",
                self.weights.len(),
                x.len()
            )));
        }
        Ok(sigmoid(dot(&self.weights, x) + self.intercept))
    }

    pub fn score_batch(&self, features: &MetaFeatures) -> Result<Vec<f64>> {
        features.matrix().iter_rows().map(|r| self.score(r)).collect()
    }
}

/// `softplus(s) - y s`, without overflow.
fn log_loss_from_logit(s: f64, y: bool) -> f64 {
    let softplus = if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    };
    if y {
        softplus - s
    } else {
        softplus
    }
}

/// Mean binary cross-entropy plus `l2 / 2 * ||θ||^2` and its gradient
/// `(∂/∂θ, ∂/∂b)`; the intercept is not penalised.
pub fn lr_objective(
    x: &Matrix,
    labels: &[bool],
    weights: &[f64],
    intercept: f64,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = labels.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (row, &y) in x.iter_rows().zip(labels) {
        let s = dot(weights, row) + intercept;
        loss += log_loss_from_logit(s, y);
        let r = sigmoid(s) - if y { 1.0 } else { 0.0 };
        gb += r;
        for (g, &v) in gw.iter_mut().zip(row) {
            *g += r * v;
        }
    }
    let sq: f64 = weights.iter().map(|w| w * w).sum();
    for (g, &w) in gw.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    (loss / n + 0.5 * l2 * sq, gw, gb / n)
}

/// Full-batch gradient descent from `θ = 0` until the gradient norm drops below
/// `1e-6` or `cfg.epochs` steps have run. The step is `cfg.learning_rate`, capped
/// at `1 / L` for the smoothness bound `L = mean ||[x, 1]||^2 / 4 + l2`, so each
/// step decreases the objective.
pub fn train_lr_meta(
    features: &MetaFeatures,
    labels: &MetaLabels,
    l2: f64,
    cfg: &TrainConfig,
) -> Result<LrMeta> {
    cfg.validate()?;
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(Error::invalid("l2 must be non-negative"));
    }
    if features.len() != labels.len() {
        return Err(Error::invalid("feature and label counts differ"));
    }
    labels.require_both_classes()?;
    let mut meta = fit(features.matrix(), labels.as_slice(), l2, cfg)?;
    meta.layout = Some(features.layout());
    Ok(meta)
}

fn fit(x: &Matrix, labels: &[bool], l2: f64, cfg: &TrainConfig) -> Result<LrMeta> {
    let d = x.cols();
    let mean_sq: f64 =
        x.iter_rows().map(|r| 1.0 + dot(r, r)).sum::<f64>() / x.rows() as f64;
    let smooth = 0.25 * mean_sq + l2;
    let step = cfg.learning_rate.min(1.0 / smooth);

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let (mut loss, mut gw, mut gb) = lr_objective(x, labels, &w, b, l2);
    let mut history = vec![loss];
    let norm = |gw: &[f64], gb: f64| (dot(gw, gw) + gb * gb).sqrt();
    let mut gnorm = norm(&gw, gb);
    for epoch in 0..cfg.epochs {
        if gnorm < 1e-6 {
            break;
        }
        for (wv, g) in w.iter_mut().zip(&gw) {
            *wv -= step * g;
        }
        b -= step * gb;
        (loss, gw, gb) = lr_objective(x, labels, &w, b, l2);
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.push(loss);
        gnorm = norm(&gw, gb);
    }
    Ok(LrMeta {
        weights: w,
        intercept: b,
        l2,
        layout: None,
        train_loss: history,
        gradient_norm: gnorm,
    })
}
