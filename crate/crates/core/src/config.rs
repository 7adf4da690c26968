//! Run configuration document and presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierChoice;
use crate::dataset::{LabelColumn, SourceFile, SplitSpec};
use crate::distributed::DEFAULT_CLIENTS;
use crate::error::{Error, Result};
use crate::hho::{HhoParams, SolutionLayout, DEFAULT_NEURON_BITS};
use crate::wrapper::FitnessWeights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// One CSV with a label column.
    Csv {
        path: PathBuf,
        label_column: LabelColumn,
        /// Non-feature columns such as row identifiers.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        drop_columns: Vec<String>,
    },
    /// Feature-only captures, one class id per file.
    Integrated {
        sources: Vec<SourceFile>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        class_names: Option<Vec<String>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Centralized,
    Distributed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Population 200, 100 iterations, 30 runs.
    Paper,
    /// Population 30, 30 iterations, 5 runs, at most 20,000 rows.
    Desk,
}

pub const DESK_ROW_CAP: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    pub population_size: usize,
    pub max_iterations: usize,
    pub levy_beta: f64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        let p = HhoParams::default();
        SearchSettings {
            population_size: p.population_size,
            max_iterations: p.max_iterations,
            levy_beta: p.levy_beta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutSettings {
    pub neuron_bits: usize,
    pub max_neurons: usize,
}

impl Default for LayoutSettings {
    fn default() -> Self {
        LayoutSettings {
            neuron_bits: DEFAULT_NEURON_BITS,
            max_neurons: 1 << DEFAULT_NEURON_BITS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_id: String,
    pub dataset: Option<DatasetSource>,
    pub split: SplitSpec,
    /// Stratified cap on the rows kept after loading.
    pub subsample_cap: Option<usize>,
    pub search: SearchSettings,
    pub n_runs: usize,
    pub weights: FitnessWeights,
    pub layout: LayoutSettings,
    pub classifier: ClassifierChoice,
    pub knn_k: usize,
    pub scheme: Scheme,
    pub n_clients: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Centralized => "centralized",
            Scheme::Distributed => "distributed",
        })
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset_id: "dataset".into(),
            dataset: None,
            split: SplitSpec::default(),
            subsample_cap: None,
            search: SearchSettings::default(),
            n_runs: 30,
            weights: FitnessWeights::default(),
            layout: LayoutSettings::default(),
            classifier: ClassifierChoice::Rwn,
            knn_k: crate::baselines::DEFAULT_K,
            scheme: Scheme::Centralized,
            n_clients: DEFAULT_CLIENTS,
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn apply_profile(&mut self, profile: Profile) {
        match profile {
            Profile::Paper => {
                self.search.population_size = 200;
                self.search.max_iterations = 100;
                self.n_runs = 30;
                self.subsample_cap = None;
            }
            Profile::Desk => {
                self.search.population_size = 30;
                self.search.max_iterations = 30;
                self.n_runs = 5;
                self.subsample_cap = Some(DESK_ROW_CAP);
            }
        }
    }

    pub fn with_profile(profile: Profile) -> Self {
        let mut c = RunConfig::default();
        c.apply_profile(profile);
        c
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(vec![format!("{}: {e}", path.display())]))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hho_params(&self) -> HhoParams {
        HhoParams {
            population_size: self.search.population_size,
            max_iterations: self.search.max_iterations,
            seed: self.seed,
            levy_beta: self.search.levy_beta,
        }
    }

    pub fn solution_layout(&self, n_features: usize) -> Result<SolutionLayout> {
        SolutionLayout::new(n_features, self.layout.neuron_bits)
    }

    /// Every problem with the configuration, reported together.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut check = |r: Result<()>| {
            if let Err(e) = r {
                problems.push(e.to_string());
            }
        };
        check(self.split.validate());
        check(self.hho_params().validate());
        check(self.weights.validate());
        check(SolutionLayout::new(1, self.layout.neuron_bits).map(|_| ()));
        if 1usize.checked_shl(self.layout.neuron_bits as u32) != Some(self.layout.max_neurons) {
            problems.push(format!(
                "layout.max_neurons ({}) must equal 2^neuron_bits ({} bits)",
                self.layout.max_neurons, self.layout.neuron_bits
            ));
        }
        if self.n_runs == 0 {
            problems.push("n_runs must be at least 1".into());
        }
        if self.knn_k == 0 {
            problems.push("knn_k must be at least 1".into());
        }
        if self.scheme == Scheme::Distributed && self.n_clients < 2 {
            problems.push("distributed scheme needs n_clients >= 2".into());
        }
        if self.subsample_cap == Some(0) {
            problems.push("subsample_cap must be positive".into());
        }
        if self.dataset_id.is_empty() {
            problems.push("dataset_id must not be empty".into());
        }
        match &self.dataset {
            Some(DatasetSource::Integrated { sources, class_names }) => {
                if sources.is_empty() {
                    problems.push("integrated dataset lists no sources".into());
                }
                if let Some(names) = class_names {
                    let needed = sources.iter().map(|s| s.class_id).max().map_or(0, |m| m + 1);
                    if names.len() < needed {
                        problems.push(format!("{} class names given, class ids need {needed}", names.len()));
                    }
                }
            }
            Some(DatasetSource::Csv { .. }) | None => {}
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}
