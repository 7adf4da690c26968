//! Confusion-matrix metrics: accuracy, precision, recall and F-measure.
//!
//! Zero denominators yield 0. Two-class tasks report the positive class
//! (id 1); larger tasks report unweighted means over classes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label >= n_classes {
                return Err(Error::LabelOutOfRange { label, n_classes });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Metrics of class 1 only.
    BinaryPositiveClass,
    Macro,
}

impl Averaging {
    pub fn default_for(n_classes: usize) -> Self {
        if n_classes == 2 {
            Averaging::BinaryPositiveClass
        } else {
            Averaging::Macro
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub averaging: Averaging,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn report(cm: &ConfusionMatrix, averaging: Averaging) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    let k = cm.n_classes();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = cm.counts[c][c];
            let predicted: u64 = (0..k).map(|i| cm.counts[i][c]).sum();
            let support: u64 = cm.counts[c].iter().sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            ClassMetrics {
                precision,
                recall,
                f_measure: harmonic(precision, recall),
                support,
            }
        })
        .collect();
    let (precision, recall, f_measure) = match averaging {
        Averaging::BinaryPositiveClass => {
            let pos = per_class.get(1).ok_or_else(|| {
                Error::InvalidArgument("binary averaging needs at least two classes".into())
            })?;
            (pos.precision, pos.recall, pos.f_measure)
        }
        Averaging::Macro => {
            let n = k as f64;
            (
                per_class.iter().map(|c| c.precision).sum::<f64>() / n,
                per_class.iter().map(|c| c.recall).sum::<f64>() / n,
                per_class.iter().map(|c| c.f_measure).sum::<f64>() / n,
            )
        }
    };
    Ok(MetricsReport {
        accuracy: ratio(cm.trace(), total),
        precision,
        recall,
        f_measure,
        averaging,
        per_class,
    })
}

/// Confusion plus report in one step.
pub fn evaluate(y_true: &[usize], y_pred: &[usize], n_classes: usize, averaging: Averaging) -> Result<MetricsReport> {
    report(&confusion(y_true, y_pred, n_classes)?, averaging)
}

/// The four headline numbers, used wherever reports are averaged or compared.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl MetricSummary {
    pub const NAMES: [&'static str; 4] = ["accuracy", "precision", "recall", "f_measure"];

    pub fn values(&self) -> [f64; 4] {
        [self.accuracy, self.precision, self.recall, self.f_measure]
    }

    fn from_values(v: [f64; 4]) -> Self {
        MetricSummary {
            accuracy: v[0],
            precision: v[1],
            recall: v[2],
            f_measure: v[3],
        }
    }

    pub fn mean(items: &[MetricSummary]) -> Self {
        let n = items.len().max(1) as f64;
        let mut acc = [0.0; 4];
        for it in items {
            for (a, v) in acc.iter_mut().zip(it.values()) {
                *a += v;
            }
        }
        Self::from_values(acc.map(|a| a / n))
    }

    /// Sample standard deviation per metric; zero for fewer than two items.
    pub fn std_dev(items: &[MetricSummary]) -> Self {
        if items.len() < 2 {
            return Self::default();
        }
        let mean = Self::mean(items).values();
        let mut acc = [0.0; 4];
        for it in items {
            for ((a, v), m) in acc.iter_mut().zip(it.values()).zip(mean) {
                *a += (v - m) * (v - m);
            }
        }
        let n = (items.len() - 1) as f64;
        Self::from_values(acc.map(|a| (a / n).sqrt()))
    }
}

impl From<&MetricsReport> for MetricSummary {
    fn from(r: &MetricsReport) -> Self {
        MetricSummary {
            accuracy: r.accuracy,
            precision: r.precision,
            recall: r.recall,
            f_measure: r.f_measure,
        }
    }
}
