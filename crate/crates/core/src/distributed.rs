//! Simulated distributed learning. The non-test pool is partitioned across
//! clients without replacement; each client runs the complete wrapper on its
//! own rows and is scored on the shared test split. Nothing is exchanged
//! between clients and no model averaging takes place.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::dataset::{self, Dataset};
use crate::error::{Error, Result};
use crate::hho::{HhoParams, SolutionLayout};
use crate::metrics::MetricSummary;
use crate::seed;
use crate::wrapper::{self, FitnessWeights, SearchResult, Splits, WrapperOptions};

pub const DEFAULT_CLIENTS: usize = 4;
/// Share of each client's rows held out for its local validation.
pub const LOCAL_VALIDATION_FRACTION: f64 = 0.25;

#[derive(Debug)]
pub struct ClientRun {
    pub client_id: usize,
    pub local_train_size: usize,
    pub local_validation_size: usize,
    /// Provenance tags of every row the client owns.
    pub row_ids: Vec<usize>,
    pub result: SearchResult,
}

#[derive(Debug)]
pub struct DistributedReport {
    pub dataset_id: String,
    pub per_client: Vec<ClientRun>,
    pub mean: MetricSummary,
    pub std_dev: MetricSummary,
    pub centralized_reference: Option<MetricSummary>,
}

impl DistributedReport {
    pub fn client_summaries(&self) -> Vec<MetricSummary> {
        self.per_client.iter().map(|c| c.result.test_summary()).collect()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn run_distributed(
    dataset_id: &str,
    splits: &Splits,
    n_clients: usize,
    params: &HhoParams,
    weights: &FitnessWeights,
    layout: &SolutionLayout,
    classifier: &dyn Classifier,
    seed: u64,
    options: WrapperOptions,
) -> Result<DistributedReport> {
    if n_clients < 2 {
        return Err(Error::InvalidArgument(
            "distributed runs need at least two clients; use the centralized scheme".into(),
        ));
    }
    let pool = Dataset::concat(&[&splits.train, &splits.validation])?;
    let partitions = dataset::partition_clients(&pool, n_clients, seed::derive_seed(seed, &[seed::TAG_PARTITION]))?;
    for (id, part) in partitions.iter().enumerate() {
        let present = part.class_counts().iter().filter(|&&c| c > 0).count();
        if present < 2 {
            return Err(Error::InsufficientClassSamples {
                class: format!("client {id} holds a single class"),
                available: part.n_samples(),
            });
        }
    }

    let per_client = partitions
        .into_par_iter()
        .enumerate()
        .map(|(client_id, local)| {
            let client_seed = seed::derive_seed(seed, &[seed::TAG_CLIENT, client_id as u64]);
            let (train, validation) =
                dataset::split_train_validation(&local, LOCAL_VALIDATION_FRACTION, client_seed)?;
            let local_splits = Splits {
                train,
                validation,
                test: splits.test.clone(),
            };
            let result = wrapper::run_wrapper(&local_splits, params, weights, layout, classifier, client_seed, options)
                .map_err(|e| e.context(format!("client {client_id}")))?;
            Ok(ClientRun {
                client_id,
                local_train_size: local_splits.train.n_samples(),
                local_validation_size: local_splits.validation.n_samples(),
                row_ids: local.row_ids,
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summaries: Vec<MetricSummary> = per_client.iter().map(|c| c.result.test_summary()).collect();
    Ok(DistributedReport {
        dataset_id: dataset_id.to_string(),
        mean: MetricSummary::mean(&summaries),
        std_dev: MetricSummary::std_dev(&summaries),
        per_client,
        centralized_reference: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub metric: String,
    pub left: f64,
    pub right: f64,
    pub delta: f64,
}

/// Side-by-side metrics of two schemes with `left − right` deltas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub dataset_id: String,
    pub left_label: String,
    pub right_label: String,
    pub rows: Vec<MetricDelta>,
}

impl Comparison {
    pub fn between(
        dataset_id: &str,
        left_label: &str,
        left: &MetricSummary,
        right_label: &str,
        right: &MetricSummary,
    ) -> Self {
        let rows = MetricSummary::NAMES
            .iter()
            .zip(left.values().into_iter().zip(right.values()))
            .map(|(name, (l, r))| MetricDelta {
                metric: name.to_string(),
                left: l,
                right: r,
                delta: l - r,
            })
            .collect();
        Comparison {
            dataset_id: dataset_id.to_string(),
            left_label: left_label.to_string(),
            right_label: right_label.to_string(),
            rows,
        }
    }

    pub fn delta(&self, metric: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.metric == metric).map(|r| r.delta)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<12} {:>12} {:>12} {:>10}\n",
            "metric", self.left_label, self.right_label, "delta"
        );
        for r in &self.rows {
            out.push_str(&format!("{:<12} {:>12.4} {:>12.4} {:>+10.4}\n", r.metric, r.left, r.right, r.delta));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("metric,{},{},delta\n", self.left_label, self.right_label);
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.metric, r.left, r.right, r.delta));
        }
        out
    }
}

/// Centralized minus distributed-mean, per metric.
pub fn compare(
    centralized_dataset_id: &str,
    centralized: &MetricSummary,
    distributed: &DistributedReport,
) -> Result<Comparison> {
    if centralized_dataset_id != distributed.dataset_id {
        return Err(Error::SchemaMismatch(format!(
            "cannot compare {centralized_dataset_id:?} with {:?}",
            distributed.dataset_id
        )));
    }
    Ok(Comparison::between(
        centralized_dataset_id,
        "centralized",
        centralized,
        "distributed",
        &distributed.mean,
    ))
}
