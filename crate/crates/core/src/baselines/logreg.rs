use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::SparseFeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Bow,
    Tfidf,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Bow => "bow",
            FeatureKind::Tfidf => "tfidf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub step: f64,
    pub l2: f64,
    pub epochs: usize,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            step: 0.1,
            l2: 1e-4,
            epochs: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_kind: FeatureKind,
}

impl LogRegModel {
    pub fn zeros(dim: usize, feature_kind: FeatureKind) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
            feature_kind,
        }
    }

    pub fn logit(&self, x: &SparseFeatureVector) -> Result<f64> {
        if x.min_dim() > self.weights.len() {
            return Err(Error::shape(format!(
                "feature index {} outside model dimension {}",
                x.min_dim() - 1,
                self.weights.len()
            )));
        }
        Ok(x.dot(&self.weights) + self.bias)
    }

    /// Label 1 iff the logit is ≥ 0.
    pub fn predict(&self, x: &SparseFeatureVector) -> Result<u8> {
        Ok(u8::from(self.logit(x)? >= 0.0))
    }

    /// Mean cross-entropy plus `l2·‖w‖²/2`.
    pub fn objective(&self, features: &[SparseFeatureVector], labels: &[u8], l2: f64) -> Result<f64> {
        let mut total = 0.0;
        for (x, &y) in features.iter().zip(labels) {
            total += log_loss(self.logit(x)?, y);
        }
        let reg: f64 = self.weights.iter().map(|w| w * w).sum();
        Ok(total / features.len() as f64 + 0.5 * l2 * reg)
    }
}

/// `-log σ(z)` for y = 1, `-log(1 − σ(z))` for y = 0, without overflow.
fn log_loss(z: f64, y: u8) -> f64 {
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    softplus - f64::from(y) * z
}

/// Full-batch gradient descent from zero weights. The data term takes an
/// explicit step and the L2 term is applied in closed form
/// (`w ← (w − step·∇) / (1 + step·l2)`), which minimizes the same objective
/// and stays stable for any regularization strength. Returns the model and
/// the objective before each epoch's update followed by the final value.
pub fn logreg_fit(
    features: &[SparseFeatureVector],
    labels: &[u8],
    dim: usize,
    kind: FeatureKind,
    config: &LogRegConfig,
) -> Result<(LogRegModel, Vec<f64>)> {
    if features.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} feature vectors vs {} labels",
            features.len(),
            labels.len()
        )));
    }
    if features.is_empty() {
        return Err(Error::invalid("logistic regression on an empty training set"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::invalid(format!("label must be 0 or 1, got {bad}")));
    }
    if !(config.step > 0.0) || !(config.l2 >= 0.0) {
        return Err(Error::invalid("step must be positive and l2 nonnegative"));
    }
    let mut model = LogRegModel::zeros(dim, kind);
    let n = features.len() as f64;
    let mut trace = Vec::with_capacity(config.epochs + 1);
    let mut grad = vec![0.0; dim];
    for _ in 0..config.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        let mut loss = 0.0;
        for (x, &y) in features.iter().zip(labels) {
            let z = model.logit(x)?;
            loss += log_loss(z, y);
            let r = (crate::tensor::sigmoid(z) - f64::from(y)) / n;
            for (i, v) in x.iter() {
                grad[i] += r * v;
            }
            grad_b += r;
        }
        let reg: f64 = model.weights.iter().map(|w| w * w).sum();
        trace.push(loss / n + 0.5 * config.l2 * reg);
        let shrink = 1.0 + config.step * config.l2;
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w = (*w - config.step * g) / shrink;
        }
        model.bias -= config.step * grad_b;
    }
    trace.push(model.objective(features, labels, config.l2)?);
    Ok((model, trace))
}
