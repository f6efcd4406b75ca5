use serde::{Deserialize, Serialize};

use super::{predict_batch, Model};
use crate::error::{invalid, Result};
use crate::pipeline::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Fraction of predictions within the tolerance.
    pub acc: f64,
    pub mse: f64,
    /// Absent when the labels have zero variance.
    pub r2: Option<f64>,
    pub n: usize,
}

/// ACC within `mu`, MSE and coefficient of determination.
pub fn metrics_from(y: &[f64], y_hat: &[f64], mu: f64) -> Result<Metrics> {
    if y.is_empty() || y.len() != y_hat.len() {
        return Err(invalid(format!("need equal nonempty vectors, got {} and {}", y.len(), y_hat.len())));
    }
    if !(mu > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {mu}")));
    }
    let n = y.len() as f64;
    let hits = y.iter().zip(y_hat).filter(|(a, b)| (*a - *b).abs() <= mu).count();
    let sse: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    let mean = y.iter().sum::<f64>() / n;
    let sst: f64 = y.iter().map(|a| (a - mean).powi(2)).sum();
    Ok(Metrics {
        acc: hits as f64 / n,
        mse: sse / n,
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
        n: y.len(),
    })
}

/// Metrics of `model` over the dataset samples at `idx`.
pub fn evaluate(model: &Model, dataset: &Dataset, idx: &[usize], mu: f64) -> Result<Metrics> {
    let samples: Vec<_> = idx.iter().map(|&i| &dataset.samples[i]).collect();
    let y_hat = predict_batch(model, &samples)?;
    metrics_from(&dataset.labels(idx), &y_hat, mu)
}
