//! Wrapper feature selection: HHO searches feature masks and hidden layer
//! sizes, scoring each candidate by training the classifier on the selected
//! columns and measuring validation F-measure.
//!
//! Candidate fitness is `α·Err + β·f/F + γ·n/N` with `Err = 1 − F-measure`,
//! `f/F` the selected feature ratio and `n/N` the hidden size ratio.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::classifier::{Classifier, FitContext, Model};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::hho::{self, ConvergenceCurve, DecodedSolution, HhoParams, Objective, SolutionLayout};
use crate::metrics::{self, Averaging, MetricSummary, MetricsReport};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for FitnessWeights {
    fn default() -> Self {
        FitnessWeights {
            alpha: 0.99,
            beta: 0.01,
            gamma: 0.01,
        }
    }
}

impl FitnessWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidArgument(format!("{name} = {w} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

pub fn fitness_value(
    err: f64,
    n_selected: usize,
    total_features: usize,
    n_hidden: usize,
    max_neurons: usize,
    weights: &FitnessWeights,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&err) {
        return Err(Error::InvalidArgument(format!("error rate {err} outside [0, 1]")));
    }
    if n_selected < 1 || n_selected > total_features {
        return Err(Error::InvalidArgument(format!(
            "selected feature count {n_selected} outside [1, {total_features}]"
        )));
    }
    if n_hidden < 1 || n_hidden > max_neurons {
        return Err(Error::InvalidArgument(format!(
            "hidden size {n_hidden} outside [1, {max_neurons}]"
        )));
    }
    Ok(weights.alpha * err
        + weights.beta * n_selected as f64 / total_features as f64
        + weights.gamma * n_hidden as f64 / max_neurons as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateEvaluation {
    pub fitness: f64,
    pub f_measure: f64,
    pub err: f64,
    pub n_selected: usize,
    pub total_features: usize,
    pub n_hidden: usize,
    pub max_neurons: usize,
}

impl CandidateEvaluation {
    /// Fitness re-derived from the stored fields.
    pub fn recompute(&self, weights: &FitnessWeights) -> Result<f64> {
        fitness_value(
            self.err,
            self.n_selected,
            self.total_features,
            self.n_hidden,
            self.max_neurons,
            weights,
        )
    }
}

/// Train / validation / test partitions of one normalized dataset.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

impl Splits {
    pub fn dataset_features(&self) -> usize {
        self.train.n_features()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrapperOptions {
    pub cache: bool,
    /// Defaults to binary for two classes and macro otherwise.
    pub averaging: Option<Averaging>,
}

impl Default for WrapperOptions {
    fn default() -> Self {
        WrapperOptions {
            cache: true,
            averaging: None,
        }
    }
}

/// Fits and scores candidates for one run. Classifier outcomes are memoized
/// by what the classifier actually sees: the feature mask, plus the hidden
/// size when the classifier uses it.
pub struct CandidateEvaluator<'a> {
    layout: SolutionLayout,
    train: &'a Dataset,
    validation: &'a Dataset,
    weights: FitnessWeights,
    classifier: &'a dyn Classifier,
    run_seed: u64,
    averaging: Averaging,
    cache: Option<Mutex<HashMap<String, Arc<Mutex<Option<f64>>>>>>,
    trainings: AtomicUsize,
}

impl<'a> CandidateEvaluator<'a> {
    pub fn new(
        layout: SolutionLayout,
        train: &'a Dataset,
        validation: &'a Dataset,
        weights: FitnessWeights,
        classifier: &'a dyn Classifier,
        run_seed: u64,
        options: WrapperOptions,
    ) -> Result<Self> {
        weights.validate()?;
        for d in [train, validation] {
            if d.n_features() != layout.n_features {
                return Err(Error::DimensionMismatch {
                    expected: layout.n_features,
                    found: d.n_features(),
                });
            }
            if d.is_empty() {
                return Err(Error::EmptyDataset);
            }
        }
        let n_classes = train.n_classes();
        Ok(CandidateEvaluator {
            layout,
            train,
            validation,
            weights,
            classifier,
            run_seed,
            averaging: options.averaging.unwrap_or(Averaging::default_for(n_classes)),
            cache: options.cache.then(|| Mutex::new(HashMap::new())),
            trainings: AtomicUsize::new(0),
        })
    }

    /// Number of classifier fits performed so far.
    pub fn trainings(&self) -> usize {
        self.trainings.load(Ordering::Relaxed)
    }

    pub fn averaging(&self) -> Averaging {
        self.averaging
    }

    fn training_key(&self, decoded: &DecodedSolution) -> String {
        if self.classifier.uses_hidden_size() {
            decoded.key()
        } else {
            DecodedSolution {
                n_hidden: 0,
                ..decoded.clone()
            }
            .key()
        }
    }

    fn validation_f_measure(&self, decoded: &DecodedSolution, key: &str) -> Result<f64> {
        let columns = decoded.selected_indices();
        let train = self.train.select_columns(&columns);
        let validation = self.validation.select_columns(&columns);
        let ctx = FitContext {
            n_classes: self.train.n_classes(),
            n_hidden: decoded.n_hidden,
            seed: seed::derive_seed(self.run_seed, &[seed::TAG_CANDIDATE, seed::fnv1a(key.bytes())]),
            row_ids: &train.row_ids,
        };
        self.trainings.fetch_add(1, Ordering::Relaxed);
        let model = self
            .classifier
            .fit(train.features.view(), &train.labels, &ctx)
            .map_err(|e| e.context(format!("training {} on candidate {key}", self.classifier.name())))?;
        let predicted = model.predict(validation.features.view())?;
        let report = metrics::evaluate(&validation.labels, &predicted, self.train.n_classes(), self.averaging)?;
        Ok(report.f_measure)
    }

    fn cached_f_measure(&self, decoded: &DecodedSolution) -> Result<f64> {
        let key = self.training_key(decoded);
        let Some(cache) = &self.cache else {
            return self.validation_f_measure(decoded, &key);
        };
        let cell = cache
            .lock()
            .expect("cache lock poisoned")
            .entry(key.clone())
            .or_default()
            .clone();
        let mut slot = cell.lock().expect("cache cell poisoned");
        if let Some(f) = *slot {
            return Ok(f);
        }
        let f = self.validation_f_measure(decoded, &key)?;
        *slot = Some(f);
        Ok(f)
    }

    pub fn evaluate_decoded(&self, decoded: &DecodedSolution) -> Result<CandidateEvaluation> {
        let f_measure = self.cached_f_measure(decoded)?;
        let err = 1.0 - f_measure;
        let total_features = self.layout.n_features;
        let max_neurons = self.layout.max_neurons();
        let n_selected = decoded.n_selected();
        Ok(CandidateEvaluation {
            fitness: fitness_value(err, n_selected, total_features, decoded.n_hidden, max_neurons, &self.weights)?,
            f_measure,
            err,
            n_selected,
            total_features,
            n_hidden: decoded.n_hidden,
            max_neurons,
        })
    }

    pub fn evaluate_candidate(&self, position: &[f64]) -> Result<CandidateEvaluation> {
        self.evaluate_decoded(&hho::decode(position, &self.layout))
    }
}

impl Objective for CandidateEvaluator<'_> {
    fn evaluate(&self, position: &[f64]) -> Result<f64> {
        Ok(self.evaluate_candidate(position)?.fitness)
    }
}

/// Outcome of one wrapper run.
#[derive(Debug)]
pub struct SearchResult {
    pub decoded: DecodedSolution,
    pub selected_features: Vec<String>,
    /// Final model, fitted on train + validation restricted to the mask.
    pub model: Box<dyn Model>,
    pub validation_eval: CandidateEvaluation,
    pub test_metrics: MetricsReport,
    pub curve: ConvergenceCurve,
    pub evaluations: usize,
    pub trainings: usize,
    pub wall_time: Duration,
}

/// Serializable digest of a [`SearchResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub selected_features: Vec<String>,
    pub selected_indices: Vec<usize>,
    pub n_hidden: usize,
    pub validation: CandidateEvaluation,
    pub test: MetricsReport,
    pub evaluations: usize,
    pub trainings: usize,
    pub convergence_csv: Option<String>,
    pub wall_time_secs: f64,
}

impl SearchResult {
    pub fn test_summary(&self) -> MetricSummary {
        MetricSummary::from(&self.test_metrics)
    }

    pub fn summary(&self, convergence_csv: Option<String>) -> SearchSummary {
        SearchSummary {
            selected_features: self.selected_features.clone(),
            selected_indices: self.decoded.selected_indices(),
            n_hidden: self.decoded.n_hidden,
            validation: self.validation_eval,
            test: self.test_metrics.clone(),
            evaluations: self.evaluations,
            trainings: self.trainings,
            convergence_csv,
            wall_time_secs: self.wall_time.as_secs_f64(),
        }
    }
}

/// Searches, then refits the winner on train + validation and scores it on
/// the untouched test split.
pub fn run_wrapper(
    splits: &Splits,
    params: &HhoParams,
    weights: &FitnessWeights,
    layout: &SolutionLayout,
    classifier: &dyn Classifier,
    run_seed: u64,
    options: WrapperOptions,
) -> Result<SearchResult> {
    let started = Instant::now();
    if splits.test.n_features() != layout.n_features {
        return Err(Error::DimensionMismatch {
            expected: layout.n_features,
            found: splits.test.n_features(),
        });
    }
    let evaluator = CandidateEvaluator::new(
        *layout,
        &splits.train,
        &splits.validation,
        *weights,
        classifier,
        run_seed,
        options,
    )?;
    let search_params = HhoParams {
        seed: seed::derive_seed(run_seed, &[seed::TAG_HHO]),
        ..*params
    };
    let opt = hho::optimize(&search_params, layout.dim(), &evaluator)?;
    let decoded = hho::decode(&opt.best.position, layout);
    let validation_eval = evaluator.evaluate_decoded(&decoded)?;

    let columns = decoded.selected_indices();
    let pool = Dataset::concat(&[&splits.train, &splits.validation])?.select_columns(&columns);
    let test = splits.test.select_columns(&columns);
    let key = evaluator.training_key(&decoded);
    let ctx = FitContext {
        n_classes: pool.n_classes(),
        n_hidden: decoded.n_hidden,
        seed: seed::derive_seed(run_seed, &[seed::TAG_FINAL, seed::fnv1a(key.bytes())]),
        row_ids: &pool.row_ids,
    };
    let model = classifier
        .fit(pool.features.view(), &pool.labels, &ctx)
        .map_err(|e| e.context(format!("final {} fit", classifier.name())))?;
    assert_eq!(model.n_features(), columns.len(), "final model saw unselected columns");
    let predicted = model.predict(test.features.view())?;
    let test_metrics = metrics::evaluate(&test.labels, &predicted, test.n_classes(), evaluator.averaging())?;

    Ok(SearchResult {
        selected_features: columns.iter().map(|&j| splits.train.feature_names[j].clone()).collect(),
        decoded,
        model,
        validation_eval,
        test_metrics,
        curve: opt.curve,
        evaluations: opt.evaluations,
        trainings: evaluator.trainings(),
        wall_time: started.elapsed(),
    })
}

/// Independent runs with seeds `run_seed + i`.
#[derive(Debug)]
pub struct RepeatReport {
    pub runs: Vec<SearchResult>,
    pub seeds: Vec<u64>,
    pub mean: MetricSummary,
    pub std_dev: MetricSummary,
    pub mean_selected: f64,
    pub mean_n_hidden: f64,
    pub mean_curve: ConvergenceCurve,
}

impl RepeatReport {
    pub fn from_runs(runs: Vec<SearchResult>, seeds: Vec<u64>) -> Self {
        let summaries: Vec<MetricSummary> = runs.iter().map(SearchResult::test_summary).collect();
        let n = runs.len().max(1) as f64;
        let curves: Vec<&ConvergenceCurve> = runs.iter().map(|r| &r.curve).collect();
        RepeatReport {
            mean: MetricSummary::mean(&summaries),
            std_dev: MetricSummary::std_dev(&summaries),
            mean_selected: runs.iter().map(|r| r.decoded.n_selected() as f64).sum::<f64>() / n,
            mean_n_hidden: runs.iter().map(|r| r.decoded.n_hidden as f64).sum::<f64>() / n,
            mean_curve: ConvergenceCurve::mean(&curves),
            seeds,
            runs,
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn repeat_runs(
    n_runs: usize,
    splits: &Splits,
    params: &HhoParams,
    weights: &FitnessWeights,
    layout: &SolutionLayout,
    classifier: &dyn Classifier,
    run_seed: u64,
    options: WrapperOptions,
) -> Result<RepeatReport> {
    if n_runs == 0 {
        return Err(Error::InvalidArgument("n_runs must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..n_runs as u64).map(|i| run_seed.wrapping_add(i)).collect();
    let runs = seeds
        .iter()
        .map(|&s| run_wrapper(splits, params, weights, layout, classifier, s, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(RepeatReport::from_runs(runs, seeds))
}
