use ndarray::{Array1, Array2, Axis};

use super::{check_width, classes_present, stable_softmax, Classifier};
use crate::error::{Error, Result};
use crate::{EncodedMatrix, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// Unused: weights start at zero, so the fit is deterministic anyway.
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            epochs: 200,
            learning_rate: 0.1,
            l2: 1e-4,
            seed: 0,
        }
    }
}

/// Multinomial softmax regression: one coefficient row per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    /// `NUM_CLASSES × d`.
    pub weights: Array2<f64>,
    pub intercepts: Array1<f64>,
    /// Training objective after each epoch.
    pub loss_history: Vec<f64>,
}

impl LogisticModel {
    pub fn zeros(d: usize) -> Self {
        LogisticModel {
            weights: Array2::zeros((NUM_CLASSES, d)),
            intercepts: Array1::zeros(NUM_CLASSES),
            loss_history: Vec::new(),
        }
    }
}

fn design(train: &EncodedMatrix) -> Array2<f64> {
    let (n, d) = (train.n_rows(), train.n_cols());
    let mut x = Array2::zeros((n, d));
    for (i, row) in train.rows().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[[i, j]] = f64::from(v);
        }
    }
    x
}

/// Mean cross-entropy plus `l2·‖W‖²/2`, with its gradient with respect to
/// the weights and intercepts.
pub fn logistic_loss_and_gradient(
    weights: &Array2<f64>,
    intercepts: &Array1<f64>,
    x: &Array2<f64>,
    labels: &[usize],
    l2: f64,
) -> (f64, Array2<f64>, Array1<f64>) {
    let n = x.nrows() as f64;
    let mut scores = x.dot(&weights.t());
    scores += intercepts;
    let mut loss = 0.0;
    for (mut row, &y) in scores.axis_iter_mut(Axis(0)).zip(labels) {
        let p = stable_softmax(&row.to_vec());
        loss -= p[y].ln();
        for (dst, src) in row.iter_mut().zip(&p) {
            *dst = *src;
        }
        row[y] -= 1.0;
    }
    // scores now holds P - Y
    let mut grad_w = scores.t().dot(x) / n;
    grad_w.scaled_add(l2, weights);
    let grad_b = scores.sum_axis(Axis(0)) / n;
    loss = loss / n + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    (loss, grad_w, grad_b)
}

/// Full-batch gradient descent from zero weights.
pub fn logistic_fit(train: &EncodedMatrix, config: &LogisticConfig) -> Result<LogisticModel> {
    if !(config.learning_rate > 0.0) {
        return Err(Error::InvalidParameter("learning_rate must be positive".into()));
    }
    if classes_present(train) < 2 {
        return Err(Error::SingleClass);
    }
    let x = design(train);
    let labels: Vec<usize> = train.labels().iter().map(|l| l.index()).collect();
    let mut model = LogisticModel::zeros(train.n_cols());
    for epoch in 0..config.epochs {
        let (loss, gw, gb) = logistic_loss_and_gradient(&model.weights, &model.intercepts, &x, &labels, config.l2);
        if !loss.is_finite() || gw.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
        model.loss_history.push(loss);
        model.weights.scaled_add(-config.learning_rate, &gw);
        model.intercepts.scaled_add(-config.learning_rate, &gb);
    }
    Ok(model)
}

pub fn logistic_proba(model: &LogisticModel, row: &[f64]) -> Result<Vec<f64>> {
    check_width(model.weights.ncols(), row)?;
    let scores: Vec<f64> = model
        .weights
        .axis_iter(Axis(0))
        .zip(&model.intercepts)
        .map(|(w, b)| b + w.iter().zip(row).map(|(a, x)| a * x).sum::<f64>())
        .collect();
    Ok(stable_softmax(&scores))
}

impl Classifier for LogisticModel {
    fn n_features(&self) -> usize {
        self.weights.ncols()
    }

    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        logistic_proba(self, row)
    }
}
