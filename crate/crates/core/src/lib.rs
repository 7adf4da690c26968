//! Wrapper feature selection with a binary Harris Hawks search that tunes a
//! random-weight network's hidden layer alongside the feature subset.

pub mod baselines;
pub mod classifier;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod distributed;
pub mod error;
pub mod hho;
pub mod linalg;
pub mod metrics;
pub mod rwn;
pub mod seed;
pub mod wrapper;

pub use classifier::{Classifier, ClassifierChoice, FitContext, Model};
pub use config::{Profile, RunConfig, Scheme};
pub use dataset::{Dataset, LabelColumn};
pub use error::{Error, Result};
pub use hho::{HhoParams, SolutionLayout};
pub use metrics::{MetricSummary, MetricsReport};
pub use wrapper::{FitnessWeights, Splits};
