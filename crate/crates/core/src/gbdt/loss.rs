//! Class weights and the weighted logistic loss.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Inverse class-frequency weights: `n_samples / n_samples(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub political: f64,
    pub non_political: f64,
}

impl ClassWeights {
    pub fn weight(&self, label: Label) -> f64 {
        match label {
            Label::Political => self.political,
            Label::NonPolitical => self.non_political,
        }
    }

    pub fn sample_weights(&self, y: &[Label]) -> Vec<f64> {
        y.iter().map(|l| self.weight(*l)).collect()
    }
}

pub fn compute_class_weights(y: &[Label]) -> Result<ClassWeights> {
    let n = y.len();
    let pos = y.iter().filter(|l| l.is_political()).count();
    let neg = n - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassTraining);
    }
    Ok(ClassWeights {
        political: n as f64 / pos as f64,
        non_political: n as f64 / neg as f64,
    })
}

pub fn sigmoid(margin: f64) -> f64 {
    if margin >= 0.0 {
        1.0 / (1.0 + (-margin).exp())
    } else {
        let e = margin.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `w * [ln(1 + e^f) - y f]`, the weighted negative log-likelihood at margin `f`.
pub fn logistic_loss(margin: f64, target: f64, weight: f64) -> f64 {
    weight * (softplus(margin) - target * margin)
}

/// First and second derivative of [`logistic_loss`] with respect to the margin.
pub fn grad_hess(margin: f64, target: f64, weight: f64) -> (f64, f64) {
    let p = sigmoid(margin);
    (weight * (p - target), weight * p * (1.0 - p))
}

pub fn total_loss(margins: &[f64], targets: &[f64], weights: &[f64]) -> f64 {
    margins
        .iter()
        .zip(targets)
        .zip(weights)
        .map(|((f, y), w)| logistic_loss(*f, *y, *w))
        .sum()
}
