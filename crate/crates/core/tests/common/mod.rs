#![allow(dead_code)]

use std::sync::Mutex;

use hawkfs::classifier::{Classifier, FitContext, Model, RwnClassifier};
use hawkfs::dataset::Dataset;
use hawkfs::Result;
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INFORMATIVE: usize = 5;
pub const NOISE: usize = 15;
/// Rows whose informative sum lies this close to the threshold are redrawn.
pub const MARGIN: f64 = 0.1;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|j| format!("f{j}")).collect()
}

/// Uniform features; the label is whether the first five sum past 2.5.
/// Informative columns come first.
pub fn feature_recovery_task(n: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let d = INFORMATIVE + NOISE;
    let mut values = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    while labels.len() < n {
        let x: Vec<f64> = (0..d).map(|_| r.random()).collect();
        let s: f64 = x[..INFORMATIVE].iter().sum();
        if (s - 2.5).abs() < MARGIN {
            continue;
        }
        labels.push(usize::from(s > 2.5));
        values.extend(x);
    }
    Dataset::new(
        Array2::from_shape_vec((n, d), values).unwrap(),
        labels,
        names(d),
        vec!["0".into(), "1".into()],
    )
    .unwrap()
}

/// Column 0 alone decides the label with a wide gap; the rest is noise.
pub fn first_feature_task(n: usize, n_features: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let mut values = Vec::with_capacity(n * n_features);
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    for &l in &labels {
        values.push(if l == 1 { r.random_range(0.7..1.0) } else { r.random_range(0.0..0.3) });
        values.extend((1..n_features).map(|_| r.random::<f64>()));
    }
    Dataset::new(
        Array2::from_shape_vec((n, n_features), values).unwrap(),
        labels,
        names(n_features),
        vec!["0".into(), "1".into()],
    )
    .unwrap()
}

/// Two Gaussian blobs in the plane centred at (0.25, 0.25) and (0.75, 0.75).
pub fn blobs(n: usize, spread: f64, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let mut values = Vec::with_capacity(2 * n);
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    for &l in &labels {
        let c = if l == 1 { 0.75 } else { 0.25 };
        for _ in 0..2 {
            let z: f64 = r.sample(rand_distr::StandardNormal);
            values.push(c + spread * z);
        }
    }
    Dataset::new(
        Array2::from_shape_vec((n, 2), values).unwrap(),
        labels,
        names(2),
        vec!["0".into(), "1".into()],
    )
    .unwrap()
}

pub fn gaussian_matrix(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || r.sample(rand_distr::StandardNormal))
}

/// Random matrix of the given rank, built as a product of Gaussian factors.
pub fn matrix_of_rank(rows: usize, cols: usize, rank: usize, r: &mut ChaCha8Rng) -> Array2<f64> {
    if rank == 0 {
        return Array2::zeros((rows, cols));
    }
    gaussian_matrix(rows, rank, r).dot(&gaussian_matrix(rank, cols, r))
}

pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solves the symmetric positive definite system `A X = B` by Cholesky.
pub fn cholesky_solve(a: &Array2<f64>, b: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[[i, k]] * l[[j, k]]).sum();
            if i == j {
                let d = a[[i, i]] - s;
                if d <= 0.0 {
                    return None;
                }
                l[[i, j]] = d.sqrt();
            } else {
                l[[i, j]] = (a[[i, j]] - s) / l[[j, j]];
            }
        }
    }
    let mut x = b.clone();
    for c in 0..b.ncols() {
        for i in 0..n {
            let s: f64 = (0..i).map(|k| l[[i, k]] * x[[k, c]]).sum();
            x[[i, c]] = (x[[i, c]] - s) / l[[i, i]];
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| l[[k, i]] * x[[k, c]]).sum();
            x[[i, c]] = (x[[i, c]] - s) / l[[i, i]];
        }
    }
    Some(x)
}

/// Wraps a classifier and records the row tags of every fit.
pub struct Recording<C> {
    pub inner: C,
    pub fits: Mutex<Vec<Vec<usize>>>,
}

impl<C> Recording<C> {
    pub fn new(inner: C) -> Self {
        Recording {
            inner,
            fits: Mutex::new(Vec::new()),
        }
    }

    pub fn fits(&self) -> Vec<Vec<usize>> {
        self.fits.lock().unwrap().clone()
    }
}

impl Default for Recording<RwnClassifier> {
    fn default() -> Self {
        Recording::new(RwnClassifier::default())
    }
}

impl<C: Classifier> Classifier for Recording<C> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn uses_hidden_size(&self) -> bool {
        self.inner.uses_hidden_size()
    }

    fn fit(&self, x: ArrayView2<'_, f64>, y: &[usize], ctx: &FitContext<'_>) -> Result<Box<dyn Model>> {
        self.fits.lock().unwrap().push(ctx.row_ids.to_vec());
        self.inner.fit(x, y, ctx)
    }
}
