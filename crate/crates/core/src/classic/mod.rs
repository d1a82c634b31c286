//! Non-neural classifiers behind one contract: a fitted model maps an
//! encoded row to a probability vector over the four severity levels.

mod knn;
mod logistic;
mod naive_bayes;
mod tree;

pub use knn::{euclidean_distance, knn_fit, knn_predict, KnnModel, DEFAULT_K};
pub use logistic::{
    logistic_fit, logistic_loss_and_gradient, logistic_proba, LogisticConfig, LogisticModel,
};
pub use naive_bayes::{nb_fit, nb_proba, NaiveBayesModel, DEFAULT_ALPHA};
pub use tree::{gini_impurity, tree_fit, tree_predict, DecisionTreeModel, TreeConfig, TreeNode};

use crate::error::{Error, Result};
use crate::{argmax, EncodedMatrix};

pub trait Classifier: Send + Sync {
    /// Expected row width.
    fn n_features(&self) -> usize;

    /// Probability of each severity level; length [`NUM_CLASSES`](crate::NUM_CLASSES).
    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>>;

    /// Most probable level, ties to the lower code.
    fn predict(&self, row: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(row)?))
    }

    fn predict_matrix(&self, matrix: &EncodedMatrix) -> Result<Vec<usize>> {
        (0..matrix.n_rows()).map(|i| self.predict(&matrix.row_f64(i))).collect()
    }
}

pub(crate) fn check_width(expected: usize, row: &[f64]) -> Result<()> {
    if row.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: row.len() });
    }
    Ok(())
}

pub(crate) fn classes_present(matrix: &EncodedMatrix) -> usize {
    matrix.class_counts().iter().filter(|&&c| c > 0).count()
}

/// Numerically stable softmax over arbitrary-length logits. Entries of
/// `-inf` get probability 0.
pub(crate) fn stable_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits
        .iter()
        .map(|&z| if z == f64::NEG_INFINITY { 0.0 } else { (z - m).exp() })
        .collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
