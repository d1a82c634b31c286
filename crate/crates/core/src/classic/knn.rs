use super::{check_width, Classifier};
use crate::error::{Error, Result};
use crate::{EncodedMatrix, NUM_CLASSES};

pub const DEFAULT_K: usize = 5;

/// Exhaustive k-nearest-neighbor classifier over stored rows.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    k: usize,
    d: usize,
    /// Row-major `n × d`.
    rows: Vec<f64>,
    labels: Vec<usize>,
}

impl KnnModel {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, k: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch { left: rows.len(), right: labels.len() });
        }
        if k == 0 || k > rows.len() {
            return Err(Error::InvalidParameter(format!(
                "k = {k} must lie in 1..={}",
                rows.len()
            )));
        }
        if let Some(&code) = labels.iter().find(|&&l| l >= NUM_CLASSES) {
            return Err(Error::CodeOutOfRange { code, n_classes: NUM_CLASSES });
        }
        let d = rows[0].len();
        let mut flat = Vec::with_capacity(rows.len() * d);
        for r in &rows {
            check_width(d, r)?;
            flat.extend_from_slice(r);
        }
        Ok(KnnModel { k, d, rows: flat, labels })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_stored(&self) -> usize {
        self.labels.len()
    }

    pub fn stored_row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Indices of the k nearest stored rows, nearest first; equal distances
    /// resolve to the lower index.
    pub fn neighbors(&self, row: &[f64]) -> Result<Vec<usize>> {
        check_width(self.d, row)?;
        let mut scored: Vec<(f64, usize)> = (0..self.n_stored())
            .map(|i| (squared_distance(self.stored_row(i), row), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < scored.len() {
            scored.select_nth_unstable_by(self.k - 1, cmp);
            scored.truncate(self.k);
        }
        scored.sort_unstable_by(cmp);
        Ok(scored.into_iter().map(|(_, i)| i).collect())
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Euclidean distance between two points of equal dimension.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

pub fn knn_fit(train: &EncodedMatrix, k: usize) -> Result<KnnModel> {
    if train.n_rows() == 0 {
        return Err(Error::EmptyTrain);
    }
    KnnModel::new(
        (0..train.n_rows()).map(|i| train.row_f64(i)).collect(),
        train.labels().iter().map(|l| l.index()).collect(),
        k,
    )
}

/// Class frequencies among the k nearest stored rows.
pub fn knn_predict(model: &KnnModel, row: &[f64]) -> Result<Vec<f64>> {
    let mut p = vec![0.0; NUM_CLASSES];
    for i in model.neighbors(row)? {
        p[model.labels[i]] += 1.0;
    }
    for v in &mut p {
        *v /= model.k as f64;
    }
    Ok(p)
}

impl Classifier for KnnModel {
    fn n_features(&self) -> usize {
        self.d
    }

    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        knn_predict(self, row)
    }
}
