//! Binary logistic regression: the objective minimised by every SGD mode.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::datasets::{DenseDataset, MiniBatch};
use crate::error::{Error, Result};

/// Probability clamp used by the cross-entropy loss.
pub const LOSS_EPSILON: f64 = 1e-12;

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Gradient (or any update direction) with the same layout as [`LogisticModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Gradient {
    pub fn zeros(n_dims: usize) -> Self {
        Gradient { weights: vec![0.0; n_dims], bias: 0.0 }
    }

    pub fn add_assign(&mut self, other: &Gradient) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        self.bias += other.bias;
    }

    pub fn scale(&mut self, factor: f64) {
        self.weights.iter_mut().for_each(|w| *w *= factor);
        self.bias *= factor;
    }

    pub fn norm(&self) -> f64 {
        (self.weights.iter().map(|w| w * w).sum::<f64>() + self.bias * self.bias).sqrt()
    }
}

impl LogisticModel {
    pub fn zeros(n_dims: usize) -> Self {
        LogisticModel { weights: vec![0.0; n_dims], bias: 0.0 }
    }

    pub fn n_dims(&self) -> usize {
        self.weights.len()
    }

    fn logit(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
    }

    pub fn predict_prob(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch { expected: self.weights.len(), found: x.len() });
        }
        Ok(sigmoid(self.logit(x)))
    }

    /// `self -= learning_rate * gradient`
    pub fn apply(&mut self, gradient: &Gradient, learning_rate: f64) {
        for (w, g) in self.weights.iter_mut().zip(&gradient.weights) {
            *w -= learning_rate * g;
        }
        self.bias -= learning_rate * gradient.bias;
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Fraction of rows whose thresholded prediction equals the label.
    pub fn accuracy(&self, data: &DenseDataset) -> Result<f64> {
        check_dims(self, data)?;
        if data.is_empty() {
            return Err(Error::Empty("dataset".into()));
        }
        let correct = (0..data.n_rows())
            .filter(|&i| (sigmoid(self.logit(data.row(i))) >= 0.5) == (data.label(i) == 1))
            .count();
        Ok(correct as f64 / data.n_rows() as f64)
    }
}

fn check_dims(model: &LogisticModel, data: &DenseDataset) -> Result<()> {
    if model.n_dims() != data.n_dims() {
        return Err(Error::DimensionMismatch { expected: model.n_dims(), found: data.n_dims() });
    }
    Ok(())
}

fn check_batch(model: &LogisticModel, data: &DenseDataset, batch: &[usize]) -> Result<()> {
    check_dims(model, data)?;
    if batch.is_empty() {
        return Err(Error::Empty("mini-batch".into()));
    }
    if let Some(&bad) = batch.iter().find(|&&i| i >= data.n_rows()) {
        return Err(Error::invalid(format!("row index {bad} out of range for {} rows", data.n_rows())));
    }
    Ok(())
}

fn target(label: u32) -> Result<f64> {
    match label {
        0 => Ok(0.0),
        1 => Ok(1.0),
        other => Err(Error::invalid(format!("logistic regression needs labels in {{0, 1}}, got {other}"))),
    }
}

/// Mean binary cross-entropy over the batch.
pub fn batch_loss(model: &LogisticModel, data: &DenseDataset, batch: &MiniBatch) -> Result<f64> {
    check_batch(model, data, &batch.row_indices)?;
    let mut total = 0.0;
    for &i in &batch.row_indices {
        let y = target(data.label(i))?;
        let p = sigmoid(model.logit(data.row(i))).clamp(LOSS_EPSILON, 1.0 - LOSS_EPSILON);
        total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    Ok(total / batch.len() as f64)
}

/// Unnormalised gradient sum over `batch[range]`, accumulated in index order.
pub(crate) fn gradient_sum(
    model: &LogisticModel,
    data: &DenseDataset,
    batch: &[usize],
    range: Range<usize>,
) -> Result<Gradient> {
    let mut sum = Gradient::zeros(model.n_dims());
    for &i in &batch[range] {
        let x = data.row(i);
        let residual = sigmoid(model.logit(x)) - target(data.label(i))?;
        for (g, xj) in sum.weights.iter_mut().zip(x) {
            *g += residual * xj;
        }
        sum.bias += residual;
    }
    Ok(sum)
}

/// Exact gradient of [`batch_loss`] with respect to weights and bias.
pub fn batch_gradient(model: &LogisticModel, data: &DenseDataset, batch: &MiniBatch) -> Result<Gradient> {
    check_batch(model, data, &batch.row_indices)?;
    let mut g = gradient_sum(model, data, &batch.row_indices, 0..batch.len())?;
    g.scale(1.0 / batch.len() as f64);
    Ok(g)
}

/// Loss over every row of the dataset.
pub fn full_loss(model: &LogisticModel, data: &DenseDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("dataset".into()));
    }
    batch_loss(model, data, &MiniBatch::full(data))
}
