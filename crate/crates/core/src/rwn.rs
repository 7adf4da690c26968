//! Random Weight Network: a single-hidden-layer feedforward network whose
//! input weights and hidden biases are drawn once and frozen. Only the output
//! layer is fitted, in closed form, as the least-squares solution
//! `B = H⁺ T` for hidden activations `H` and one-hot targets `T`.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::seed;

pub const MAX_HIDDEN: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightRange {
    pub low: f64,
    pub high: f64,
}

impl Default for WeightRange {
    fn default() -> Self {
        WeightRange {
            low: -1.0,
            high: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwnConfig {
    pub n_hidden: usize,
    #[serde(default)]
    pub weight_range: WeightRange,
    #[serde(default)]
    pub activation: Activation,
    pub seed: u64,
}

impl RwnConfig {
    pub fn new(n_hidden: usize, seed: u64) -> Self {
        RwnConfig {
            n_hidden,
            weight_range: WeightRange::default(),
            activation: Activation::Sigmoid,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_HIDDEN).contains(&self.n_hidden) {
            return Err(Error::InvalidArgument(format!(
                "n_hidden must be in [1, {MAX_HIDDEN}], got {}",
                self.n_hidden
            )));
        }
        let WeightRange { low, high } = self.weight_range;
        if !(low < high) || !low.is_finite() || !high.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "weight range [{low}, {high}] is empty"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RwnModel {
    /// `[n_hidden × n_features]`
    pub input_weights: Array2<f64>,
    pub hidden_biases: Array1<f64>,
    /// `[n_hidden × n_classes]`
    pub output_weights: Array2<f64>,
    pub config: RwnConfig,
    pub n_features: usize,
    pub n_classes: usize,
    pub class_names: Vec<String>,
}

fn check_columns(x: &ArrayView2<'_, f64>, expected: usize) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: x.ncols(),
        });
    }
    Ok(())
}

/// One-hot rows in {0, 1}.
pub fn one_hot(labels: &[usize], n_classes: usize) -> Array2<f64> {
    let mut t = Array2::zeros((labels.len(), n_classes));
    for (i, &l) in labels.iter().enumerate() {
        t[[i, l]] = 1.0;
    }
    t
}

/// Output weights minimizing `‖H B − T‖_F`.
pub fn solve_output_weights(hidden: &Array2<f64>, targets: &Array2<f64>) -> Result<Array2<f64>> {
    linalg::pinv_solve(hidden, targets)
}

impl RwnModel {
    /// Draws the hidden layer: input weights row by row, then biases, all
    /// uniform on the configured range. Output weights start at zero.
    pub fn init(n_features: usize, n_classes: usize, config: RwnConfig) -> Result<Self> {
        config.validate()?;
        if n_features == 0 || n_classes == 0 {
            return Err(Error::InvalidArgument(
                "network needs at least one feature and one class".into(),
            ));
        }
        let mut rng = seed::rng(config.seed);
        let WeightRange { low, high } = config.weight_range;
        let h = config.n_hidden;
        let input_weights = Array2::from_shape_simple_fn((h, n_features), || rng.random_range(low..high));
        let hidden_biases = Array1::from_shape_simple_fn(h, || rng.random_range(low..high));
        Ok(RwnModel {
            input_weights,
            hidden_biases,
            output_weights: Array2::zeros((h, n_classes)),
            config,
            n_features,
            n_classes,
            class_names: (0..n_classes).map(|c| c.to_string()).collect(),
        })
    }

    pub fn n_hidden(&self) -> usize {
        self.config.n_hidden
    }

    /// `H[i][k] = g(⟨W[k], X[i]⟩ + b[k])`
    pub fn hidden_activations(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_columns(&x, self.n_features)?;
        let mut h = x.dot(&self.input_weights.t());
        let g = self.config.activation;
        for mut row in h.axis_iter_mut(Axis(0)) {
            row.zip_mut_with(&self.hidden_biases, |v, &b| *v = g.apply(*v + b));
        }
        Ok(h)
    }

    /// Solves the output layer for the given training data.
    pub fn fit_output(&mut self, x: ArrayView2<'_, f64>, y: &[usize]) -> Result<()> {
        if x.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if let Some(&label) = y.iter().find(|&&l| l >= self.n_classes) {
            return Err(Error::LabelOutOfRange {
                label,
                n_classes: self.n_classes,
            });
        }
        let h = self.hidden_activations(x)?;
        self.output_weights = solve_output_weights(&h, &one_hot(y, self.n_classes))?;
        Ok(())
    }

    /// Raw network outputs `H B`, one column per class.
    pub fn scores(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.hidden_activations(x)?.dot(&self.output_weights))
    }

    /// Argmax decoding; ties go to the lowest class id.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        Ok(self.scores(x)?.rows().into_iter().map(|r| argmax(r.iter().copied())).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&ModelDocument::from(self)).map_err(|source| Error::Json {
            context: "serializing RWN model".into(),
            source,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "parsing RWN model".into(),
            source,
        })?;
        doc.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }
}

pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Trains a network with a fresh hidden layer. `n_classes` comes from the
/// dataset's label registry, so classes absent from `y` still get an output.
pub fn train(x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize, config: RwnConfig) -> Result<RwnModel> {
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut model = RwnModel::init(x.ncols(), n_classes, config)?;
    model.fit_output(x, y)?;
    Ok(model)
}

/// Serialized form: dimensions, seed and row-major weight arrays.
#[derive(Serialize, Deserialize)]
struct ModelDocument {
    n_features: usize,
    n_hidden: usize,
    n_classes: usize,
    seed: u64,
    activation: Activation,
    weight_range: WeightRange,
    class_names: Vec<String>,
    input_weights: Vec<Vec<f64>>,
    hidden_biases: Vec<f64>,
    output_weights: Vec<Vec<f64>>,
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>, shape: (usize, usize)) -> Result<Array2<f64>> {
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let found = flat.len();
    Array2::from_shape_vec(shape, flat).map_err(|_| Error::DimensionMismatch {
        expected: shape.0 * shape.1,
        found,
    })
}

impl From<&RwnModel> for ModelDocument {
    fn from(m: &RwnModel) -> Self {
        ModelDocument {
            n_features: m.n_features,
            n_hidden: m.n_hidden(),
            n_classes: m.n_classes,
            seed: m.config.seed,
            activation: m.config.activation,
            weight_range: m.config.weight_range,
            class_names: m.class_names.clone(),
            input_weights: rows(&m.input_weights),
            hidden_biases: m.hidden_biases.to_vec(),
            output_weights: rows(&m.output_weights),
        }
    }
}

impl TryFrom<ModelDocument> for RwnModel {
    type Error = Error;

    fn try_from(d: ModelDocument) -> Result<Self> {
        let config = RwnConfig {
            n_hidden: d.n_hidden,
            weight_range: d.weight_range,
            activation: d.activation,
            seed: d.seed,
        };
        config.validate()?;
        if d.hidden_biases.len() != d.n_hidden {
            return Err(Error::DimensionMismatch {
                expected: d.n_hidden,
                found: d.hidden_biases.len(),
            });
        }
        Ok(RwnModel {
            input_weights: from_rows(d.input_weights, (d.n_hidden, d.n_features))?,
            hidden_biases: Array1::from(d.hidden_biases),
            output_weights: from_rows(d.output_weights, (d.n_hidden, d.n_classes))?,
            config,
            n_features: d.n_features,
            n_classes: d.n_classes,
            class_names: d.class_names,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn zero_model(n_features: usize, n_hidden: usize) -> RwnModel {
        let mut m = RwnModel::init(n_features, 2, RwnConfig::new(n_hidden, 0)).unwrap();
        m.input_weights.fill(0.0);
        m.hidden_biases.fill(0.0);
        m
    }

    #[test]
    fn zero_weights_give_half_activations() {
        let m = zero_model(3, 4);
        let h = m.hidden_activations(array![[1.0, -2.0, 3.0], [0.0, 0.0, 9.0]].view()).unwrap();
        assert!(h.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn orthogonal_input_gives_half() {
        let mut m = zero_model(2, 1);
        m.input_weights = array![[1.0, 0.0]];
        let h = m.hidden_activations(array![[0.0, 5.0]].view()).unwrap();
        assert_eq!(h[[0, 0]], 0.5);
    }

    #[test]
    fn activations_match_elementwise_formula() {
        let m = RwnModel::init(2, 2, RwnConfig::new(4, 17)).unwrap();
        let x = array![[0.1, 0.9], [0.5, 0.5], [1.0, 0.0]];
        let h = m.hidden_activations(x.view()).unwrap();
        for i in 0..3 {
            for k in 0..4 {
                let z = m.input_weights[[k, 0]] * x[[i, 0]] + m.input_weights[[k, 1]] * x[[i, 1]] + m.hidden_biases[k];
                let expected = 1.0 / (1.0 + (-z).exp());
                assert!((h[[i, k]] - expected).abs() < 1e-12);
                assert!(h[[i, k]] > 0.0 && h[[i, k]] < 1.0);
            }
        }
    }

    #[test]
    fn weights_stay_in_range() {
        let m = RwnModel::init(5, 2, RwnConfig::new(64, 3)).unwrap();
        assert!(m.input_weights.iter().chain(m.hidden_biases.iter()).all(|w| (-1.0..1.0).contains(w)));
    }

    #[test]
    fn square_invertible_hidden_layer_gives_exact_inverse_solution() {
        // n_hidden == n_samples with distinct inputs: H is square and
        // (generically) invertible, so B = H⁻¹ T and the fit interpolates.
        let x = array![[0.0, 0.1], [0.3, 0.9], [0.7, 0.2], [1.0, 1.0]];
        let y = [0, 1, 1, 0];
        let m = train(x.view(), &y, 2, RwnConfig::new(4, 9)).unwrap();
        let h = m.hidden_activations(x.view()).unwrap();
        let hb = h.dot(&m.output_weights);
        let t = one_hot(&y, 2);
        for (a, b) in hb.iter().zip(&t) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(m.predict(x.view()).unwrap(), y);
    }

    #[test]
    fn argmax_ties_pick_lowest_class() {
        assert_eq!(argmax([0.9, 0.9].into_iter()), 0);
        assert_eq!(argmax([0.1, 0.9, 0.9].into_iter()), 1);
    }

    #[test]
    fn single_class_training_predicts_that_class() {
        let x = array![[0.1, 0.2], [0.5, 0.4], [0.9, 0.3]];
        let m = train(x.view(), &[1, 1, 1], 2, RwnConfig::new(5, 1)).unwrap();
        assert_eq!(m.predict(array![[0.0, 0.0], [1.0, 1.0]].view()).unwrap(), vec![1, 1]);
    }

    #[test]
    fn training_keeps_hidden_layer() {
        let x = array![[0.1, 0.2], [0.5, 0.4], [0.9, 0.3]];
        let before = RwnModel::init(2, 2, RwnConfig::new(6, 4)).unwrap();
        let mut after = before.clone();
        after.fit_output(x.view(), &[0, 1, 0]).unwrap();
        assert_eq!(before.input_weights, after.input_weights);
        assert_eq!(before.hidden_biases, after.hidden_biases);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = array![[0.1, 0.2]];
        assert!(matches!(
            train(Array2::zeros((0, 2)).view(), &[], 2, RwnConfig::new(3, 0)),
            Err(Error::EmptyDataset)
        ));
        assert!(train(x.view(), &[0], 2, RwnConfig::new(0, 0)).is_err());
        assert!(train(x.view(), &[0], 2, RwnConfig::new(1025, 0)).is_err());
        assert!(matches!(train(x.view(), &[3], 2, RwnConfig::new(2, 0)), Err(Error::LabelOutOfRange { .. })));
        let m = train(x.view(), &[0], 2, RwnConfig::new(2, 0)).unwrap();
        assert!(matches!(
            m.predict(array![[0.1, 0.2, 0.3]].view()),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn json_round_trip_is_bit_identical() {
        let x = array![[0.1, 0.2], [0.5, 0.4], [0.9, 0.3], [0.2, 0.8]];
        let m = train(x.view(), &[0, 1, 0, 1], 2, RwnConfig::new(7, 5)).unwrap();
        let back = RwnModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let probe = array![[0.33, 0.77]];
        assert_eq!(back.scores(probe.view()).unwrap(), m.scores(probe.view()).unwrap());
    }
}
