//! Classifier interface used by the wrapper search.
//!
//! A classifier fits on a projected feature matrix and returns a model that
//! predicts class ids. Adding a new learner (an SVM, a decision tree, ...)
//! means implementing [`Classifier`] and [`Model`] and, if it should be
//! selectable from a run configuration, a [`ClassifierChoice`] variant.

use std::fmt::Debug;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, KnnModel};
use crate::error::Result;
use crate::rwn::{self, RwnConfig, RwnModel, WeightRange};

/// Everything a learner may need besides the data itself.
#[derive(Debug, Clone, Copy)]
pub struct FitContext<'a> {
    pub n_classes: usize,
    /// Hidden layer size decoded from the candidate. Learners without a
    /// hidden layer ignore it.
    pub n_hidden: usize,
    pub seed: u64,
    /// Provenance tags of the training rows.
    pub row_ids: &'a [usize],
}

pub trait Model: Send + Sync + Debug {
    fn n_features(&self) -> usize;
    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>>;
}

pub trait Classifier: Send + Sync {
    fn name(&self) -> &str;

    /// Whether fitted models depend on `FitContext::n_hidden`.
    fn uses_hidden_size(&self) -> bool;

    fn fit(&self, x: ArrayView2<'_, f64>, y: &[usize], ctx: &FitContext<'_>) -> Result<Box<dyn Model>>;
}

impl Model for RwnModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        RwnModel::predict(self, x)
    }
}

impl Model for KnnModel {
    fn n_features(&self) -> usize {
        self.x.ncols()
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        KnnModel::predict(self, x)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RwnClassifier {
    pub weight_range: WeightRange,
}

impl Classifier for RwnClassifier {
    fn name(&self) -> &str {
        "rwn"
    }

    fn uses_hidden_size(&self) -> bool {
        true
    }

    fn fit(&self, x: ArrayView2<'_, f64>, y: &[usize], ctx: &FitContext<'_>) -> Result<Box<dyn Model>> {
        let config = RwnConfig {
            weight_range: self.weight_range,
            ..RwnConfig::new(ctx.n_hidden, ctx.seed)
        };
        Ok(Box::new(rwn::train(x, y, ctx.n_classes, config)?))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KnnClassifier {
    pub k: usize,
}

impl Default for KnnClassifier {
    fn default() -> Self {
        KnnClassifier { k: baselines::DEFAULT_K }
    }
}

impl Classifier for KnnClassifier {
    fn name(&self) -> &str {
        "knn"
    }

    fn uses_hidden_size(&self) -> bool {
        false
    }

    fn fit(&self, x: ArrayView2<'_, f64>, y: &[usize], ctx: &FitContext<'_>) -> Result<Box<dyn Model>> {
        let k = self.k.min(x.nrows());
        Ok(Box::new(baselines::knn_train(x, y, ctx.n_classes, k)?))
    }
}

/// Configuration key `classifier = "rwn" | "knn"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierChoice {
    #[default]
    Rwn,
    Knn,
}

impl ClassifierChoice {
    pub fn build(self, knn_k: usize) -> Box<dyn Classifier> {
        match self {
            ClassifierChoice::Rwn => Box::new(RwnClassifier::default()),
            ClassifierChoice::Knn => Box::new(KnnClassifier { k: knn_k }),
        }
    }
}
