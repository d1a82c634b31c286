use super::{check_width, stable_softmax, Classifier};
use crate::error::{Error, Result};
use crate::{EncodedMatrix, NUM_CLASSES};

pub const DEFAULT_ALPHA: f64 = 1.0;

/// Bernoulli naive Bayes with additive smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBayesModel {
    /// `ln P(C)`; `-inf` for classes absent from training.
    pub log_priors: [f64; NUM_CLASSES],
    /// `ln P(x_col = 1 | C)`, class-major.
    pub log_p_one: Vec<Vec<f64>>,
    /// `ln P(x_col = 0 | C)`.
    pub log_p_zero: Vec<Vec<f64>>,
    pub alpha: f64,
}

pub fn nb_fit(train: &EncodedMatrix, alpha: f64) -> Result<NaiveBayesModel> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter("alpha must be positive".into()));
    }
    let n = train.n_rows();
    if n == 0 {
        return Err(Error::EmptyTrain);
    }
    let d = train.n_cols();
    let mut ones = vec![vec![0usize; d]; NUM_CLASSES];
    let mut class_n = [0usize; NUM_CLASSES];
    for (row, label) in train.rows().zip(train.labels()) {
        let c = label.index();
        class_n[c] += 1;
        for (acc, &v) in ones[c].iter_mut().zip(row) {
            *acc += usize::from(v);
        }
    }
    let mut log_p_one = vec![vec![0.0; d]; NUM_CLASSES];
    let mut log_p_zero = vec![vec![0.0; d]; NUM_CLASSES];
    for c in 0..NUM_CLASSES {
        let denom = class_n[c] as f64 + 2.0 * alpha;
        for j in 0..d {
            let p = (ones[c][j] as f64 + alpha) / denom;
            log_p_one[c][j] = p.ln();
            log_p_zero[c][j] = (1.0 - p).ln();
        }
    }
    let log_priors = class_n.map(|k| if k == 0 { f64::NEG_INFINITY } else { (k as f64 / n as f64).ln() });
    Ok(NaiveBayesModel {
        log_priors,
        log_p_one,
        log_p_zero,
        alpha,
    })
}

/// Posterior by log-space accumulation and normalized exponentiation.
pub fn nb_proba(model: &NaiveBayesModel, row: &[f64]) -> Result<Vec<f64>> {
    check_width(model.log_p_one[0].len(), row)?;
    let joint: Vec<f64> = (0..NUM_CLASSES)
        .map(|c| {
            if model.log_priors[c] == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            model.log_priors[c]
                + row
                    .iter()
                    .zip(model.log_p_one[c].iter().zip(&model.log_p_zero[c]))
                    .map(|(&x, (l1, l0))| x * l1 + (1.0 - x) * l0)
                    .sum::<f64>()
        })
        .collect();
    Ok(stable_softmax(&joint))
}

impl Classifier for NaiveBayesModel {
    fn n_features(&self) -> usize {
        self.log_p_one[0].len()
    }

    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        nb_proba(self, row)
    }
}
