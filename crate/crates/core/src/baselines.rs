//! K-nearest-neighbour baseline classifier.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 5;

/// Lazy learner: keeps the training rows verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub x: Array2<f64>,
    pub y: Vec<usize>,
    pub k: usize,
    pub n_classes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k: DEFAULT_K }
    }
}

pub fn knn_train(x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize, k: usize) -> Result<KnnModel> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if k == 0 || k > x.nrows() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in [1, {}] (training rows)",
            x.nrows()
        )));
    }
    if let Some(&label) = y.iter().find(|&&l| l >= n_classes) {
        return Err(Error::LabelOutOfRange { label, n_classes });
    }
    Ok(KnnModel {
        x: x.to_owned(),
        y: y.to_vec(),
        k,
        n_classes,
    })
}

fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KnnModel {
    /// Majority vote over the k nearest rows. Equal distances favour the
    /// lower training index, equal votes the lower class id.
    pub fn predict_one(&self, query: ArrayView1<'_, f64>) -> usize {
        let mut neighbours: Vec<(f64, usize)> = self
            .x
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| (squared_distance(row, query), i))
            .collect();
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < neighbours.len() {
            neighbours.select_nth_unstable_by(self.k - 1, by_distance);
        }
        let mut votes = vec![0usize; self.n_classes];
        for &(_, i) in &neighbours[..self.k] {
            votes[self.y[i]] += 1;
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        best
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        if x.ncols() != self.x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.x.ncols(),
                found: x.ncols(),
            });
        }
        Ok(x.rows().into_iter().map(|q| self.predict_one(q)).collect())
    }
}

pub fn knn_predict(model: &KnnModel, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    model.predict(x)
}
