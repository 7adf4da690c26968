//! Command-line front end: `prepare`, `run` and `report`.
//!
//! Every file is written under the configured output directory through a
//! temporary sibling that is renamed into place.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{DatasetSource, Profile, RunConfig, Scheme};
use crate::dataset::{self, Dataset, LabelColumn};
use crate::distributed::{self, Comparison};
use crate::error::{Error, Result};
use crate::metrics::MetricSummary;
use crate::seed;
use crate::wrapper::{self, SearchSummary, Splits, WrapperOptions};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "HAWKFS_THREADS";

pub const PREPARED_DIR: &str = "prepared";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const NORMALIZATION_FILE: &str = "normalization.json";
pub const REPORT_FILE: &str = "report.json";
pub const SELECTED_FEATURES_FILE: &str = "selected_features.json";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const CURVES_DIR: &str = "curves";
pub const SPLIT_NAMES: [&str; 3] = ["train", "validation", "test"];

#[derive(Debug, Parser)]
#[command(name = "hawkfs", version, about = "Harris Hawks wrapper feature selection with random-weight networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, split and normalize a dataset into <out>/prepared.
    Prepare(Overrides),
    /// Run the search on prepared data and write report.json.
    Run(Overrides),
    /// Compare the aggregate metrics of two report.json files.
    Report {
        #[arg(num_args = 2, required = true)]
        reports: Vec<PathBuf>,
        /// Directory for comparison.csv; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Flags layered over the JSON configuration, in this order: file,
/// profile, individual flags.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub profile: Option<Profile>,
    #[arg(long, value_enum)]
    pub scheme: Option<Scheme>,
    #[arg(long)]
    pub clients: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Master seed; also seeds the data split.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Single CSV dataset, replacing the configured source.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Label column name or zero-based index for --data [default: label].
    #[arg(long)]
    pub label: Option<LabelColumn>,
    #[arg(long)]
    pub dataset_id: Option<String>,
}

pub fn resolve_config(o: &Overrides) -> Result<RunConfig> {
    let mut c = match &o.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = o.profile {
        c.apply_profile(p);
    }
    if let Some(s) = o.scheme {
        c.scheme = s;
    }
    if let Some(n) = o.clients {
        c.n_clients = n;
    }
    if let Some(n) = o.runs {
        c.n_runs = n;
    }
    if let Some(s) = o.seed {
        c.seed = s;
        c.split.seed = s;
    }
    if let Some(out) = &o.out {
        c.output_dir = out.clone();
    }
    if let Some(path) = &o.data {
        c.dataset = Some(DatasetSource::Csv {
            path: path.clone(),
            label_column: o.label.clone().unwrap_or_else(|| LabelColumn::Name("label".into())),
            drop_columns: Vec::new(),
        });
    }
    if let Some(id) = &o.dataset_id {
        c.dataset_id = id.clone();
    }
    c.validate()?;
    Ok(c)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    with_temp(path, |tmp| std::fs::write(tmp, bytes).map_err(|e| Error::io(tmp, e)))
}

fn with_temp(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut name = OsString::from(".");
    name.push(path.file_name().unwrap_or_default());
    name.push(".tmp");
    let tmp = path.with_file_name(name);
    write(&tmp)?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        context: path.display().to_string(),
        source: e,
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        context: path.display().to_string(),
        source: e,
    })
}

/// Describes the prepared split files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedManifest {
    pub dataset_id: String,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub split_seed: u64,
}

pub fn prepared_dir(config: &RunConfig) -> PathBuf {
    config.output_dir.join(PREPARED_DIR)
}

/// Numeric class names in numeric order, others lexicographically, so a
/// 0/1 label column keeps 1 as the positive class.
fn canonical_class_order(data: Dataset) -> Result<Dataset> {
    let mut order: Vec<usize> = (0..data.n_classes()).collect();
    let numeric: Option<Vec<f64>> = data.class_names.iter().map(|c| c.trim().parse().ok()).collect();
    match numeric {
        Some(v) => order.sort_by(|&a, &b| v[a].total_cmp(&v[b])),
        None => order.sort_by(|&a, &b| data.class_names[a].cmp(&data.class_names[b])),
    }
    let mut remap = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    let names = order.iter().map(|&o| data.class_names[o].clone()).collect();
    let labels = data.labels.iter().map(|&l| remap[l]).collect();
    Ok(Dataset {
        labels,
        ..data
    }
    .with_class_names(names)?)
}

fn drop_named_columns(data: Dataset, names: &[String]) -> Result<Dataset> {
    if names.is_empty() {
        return Ok(data);
    }
    if let Some(missing) = names.iter().find(|n| !data.feature_names.contains(n)) {
        return Err(Error::InvalidConfig(vec![format!("drop_columns: no column named {missing:?}")]));
    }
    let keep: Vec<usize> = (0..data.n_features())
        .filter(|&j| !names.contains(&data.feature_names[j]))
        .collect();
    if keep.is_empty() {
        return Err(Error::InvalidConfig(vec!["drop_columns removes every feature".into()]));
    }
    Ok(data.select_columns(&keep))
}

pub fn load_source(config: &RunConfig) -> Result<Dataset> {
    let source = config.dataset.as_ref().ok_or_else(|| {
        Error::InvalidConfig(vec!["no dataset configured; set `dataset` or pass --data".into()])
    })?;
    let data = match source {
        DatasetSource::Csv {
            path,
            label_column,
            drop_columns,
        } => {
            let data = canonical_class_order(dataset::load_csv(path, label_column)?)?;
            drop_named_columns(data, drop_columns).map_err(|e| e.context(path.display().to_string()))?
        }
        DatasetSource::Integrated { sources, class_names } => {
            let data = dataset::integrate(sources)?;
            match class_names {
                Some(names) => data.with_class_names(names.clone())?,
                None => data,
            }
        }
    };
    Ok(match config.subsample_cap {
        Some(cap) if cap < data.n_samples() => {
            dataset::stratified_subsample(&data, cap, seed::derive_seed(config.seed, &[seed::TAG_SUBSAMPLE]))
        }
        _ => data,
    })
}

/// Splits, fits min-max bounds on the training split only and writes the
/// three normalized splits with their manifest.
pub fn prepare(config: &RunConfig) -> Result<PreparedManifest> {
    config.validate()?;
    let data = load_source(config)?;
    let (train, validation, test) = dataset::split(&data, &config.split)?;
    let params = dataset::fit_normalizer(&train);
    let dir = prepared_dir(config);
    for (name, part) in SPLIT_NAMES.iter().zip([&train, &validation, &test]) {
        let normalized = dataset::apply_normalizer(part, &params)?;
        let path = dir.join(format!("{name}.csv"));
        with_temp(&path, |tmp| normalized.write_csv(tmp))?;
    }
    write_json(&dir.join(NORMALIZATION_FILE), &params)?;
    let manifest = PreparedManifest {
        dataset_id: config.dataset_id.clone(),
        feature_names: data.feature_names.clone(),
        class_names: data.class_names.clone(),
        n_train: train.n_samples(),
        n_validation: validation.n_samples(),
        n_test: test.n_samples(),
        split_seed: config.split.seed,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Reads the prepared splits back. Row tags are renumbered so they stay
/// unique across the three files.
pub fn load_prepared(config: &RunConfig) -> Result<(PreparedManifest, Splits)> {
    let dir = prepared_dir(config);
    let manifest: PreparedManifest = read_json(&dir.join(MANIFEST_FILE)).map_err(|e| {
        e.context(format!("prepared data missing under {}; run `hawkfs prepare` first", dir.display()))
    })?;
    let label = LabelColumn::Index(manifest.feature_names.len());
    let mut parts = Vec::with_capacity(3);
    let mut offset = 0;
    for name in SPLIT_NAMES {
        let mut part = dataset::load_csv_with_classes(dir.join(format!("{name}.csv")), &label, &manifest.class_names)?;
        if part.feature_names != manifest.feature_names {
            return Err(Error::SchemaMismatch(format!("{name}.csv columns differ from the manifest")));
        }
        part.row_ids = (offset..offset + part.n_samples()).collect();
        offset += part.n_samples();
        parts.push(part);
    }
    let test = parts.pop().expect("three splits");
    let validation = parts.pop().expect("three splits");
    let train = parts.pop().expect("three splits");
    Ok((manifest, Splits { train, validation, test }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub run: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub summary: SearchSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientEntry {
    pub client_id: usize,
    pub local_train_size: usize,
    pub local_validation_size: usize,
    #[serde(flatten)]
    pub summary: SearchSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Runs or clients averaged.
    pub n: usize,
    pub mean: MetricSummary,
    pub std_dev: MetricSummary,
    pub mean_selected_features: f64,
    pub mean_n_hidden: f64,
}

impl Aggregate {
    fn from_summaries(items: &[&SearchSummary]) -> Self {
        let metrics: Vec<MetricSummary> = items.iter().map(|s| MetricSummary::from(&s.test)).collect();
        let n = items.len().max(1) as f64;
        Aggregate {
            n: items.len(),
            mean: MetricSummary::mean(&metrics),
            std_dev: MetricSummary::std_dev(&metrics),
            mean_selected_features: items.iter().map(|s| s.selected_indices.len() as f64).sum::<f64>() / n,
            mean_n_hidden: items.iter().map(|s| s.n_hidden as f64).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset_id: String,
    pub scheme: Scheme,
    pub seed: u64,
    pub config: RunConfig,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<RunEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clients: Vec<ClientEntry>,
    pub aggregate: Aggregate,
    pub wall_time_secs: f64,
}

impl RunReport {
    pub fn summaries(&self) -> Vec<&SearchSummary> {
        self.runs
            .iter()
            .map(|r| &r.summary)
            .chain(self.clients.iter().map(|c| &c.summary))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrequency {
    pub index: usize,
    pub name: String,
    pub count: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFrequencies {
    pub n: usize,
    pub features: Vec<FeatureFrequency>,
}

pub fn selection_frequencies(feature_names: &[String], summaries: &[&SearchSummary]) -> SelectionFrequencies {
    let mut counts = vec![0usize; feature_names.len()];
    for s in summaries {
        for &j in &s.selected_indices {
            counts[j] += 1;
        }
    }
    let n = summaries.len();
    SelectionFrequencies {
        n,
        features: feature_names
            .iter()
            .zip(counts)
            .enumerate()
            .map(|(index, (name, count))| FeatureFrequency {
                index,
                name: name.clone(),
                count,
                frequency: if n == 0 { 0.0 } else { count as f64 / n as f64 },
            })
            .collect(),
    }
}

/// Runs the configured scheme on the prepared splits and writes the report,
/// per-run curves and selection frequencies.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let started = Instant::now();
    let (manifest, splits) = load_prepared(config)?;
    let layout = config.solution_layout(manifest.feature_names.len())?;
    let params = config.hho_params();
    let classifier = config.classifier.build(config.knn_k);
    let options = WrapperOptions::default();
    let curves = config.output_dir.join(CURVES_DIR);

    let mut runs = Vec::new();
    let mut clients = Vec::new();
    match config.scheme {
        Scheme::Centralized => {
            let rep = wrapper::repeat_runs(
                config.n_runs,
                &splits,
                &params,
                &config.weights,
                &layout,
                classifier.as_ref(),
                config.seed,
                options,
            )?;
            for (i, (result, &s)) in rep.runs.iter().zip(&rep.seeds).enumerate() {
                let rel = format!("{CURVES_DIR}/run_{i}.csv");
                write_atomic(&curves.join(format!("run_{i}.csv")), result.curve.to_csv().as_bytes())?;
                runs.push(RunEntry {
                    run: i,
                    seed: s,
                    summary: result.summary(Some(rel)),
                });
            }
        }
        Scheme::Distributed => {
            let rep = distributed::run_distributed(
                &manifest.dataset_id,
                &splits,
                config.n_clients,
                &params,
                &config.weights,
                &layout,
                classifier.as_ref(),
                config.seed,
                options,
            )?;
            for c in &rep.per_client {
                let rel = format!("{CURVES_DIR}/client_{}.csv", c.client_id);
                write_atomic(
                    &curves.join(format!("client_{}.csv", c.client_id)),
                    c.result.curve.to_csv().as_bytes(),
                )?;
                clients.push(ClientEntry {
                    client_id: c.client_id,
                    local_train_size: c.local_train_size,
                    local_validation_size: c.local_validation_size,
                    summary: c.result.summary(Some(rel)),
                });
            }
        }
    }

    let mut report = RunReport {
        dataset_id: manifest.dataset_id.clone(),
        scheme: config.scheme,
        seed: config.seed,
        config: config.clone(),
        feature_names: manifest.feature_names.clone(),
        class_names: manifest.class_names.clone(),
        runs,
        clients,
        aggregate: Aggregate::from_summaries(&[]),
        wall_time_secs: 0.0,
    };
    let summaries = report.summaries();
    let aggregate = Aggregate::from_summaries(&summaries);
    let frequencies = selection_frequencies(&manifest.feature_names, &summaries);
    report.aggregate = aggregate;
    report.wall_time_secs = started.elapsed().as_secs_f64();
    write_json(&config.output_dir.join(SELECTED_FEATURES_FILE), &frequencies)?;
    write_json(&config.output_dir.join(REPORT_FILE), &report)?;
    Ok(report)
}

/// The parts of a report needed for a comparison.
#[derive(Debug, Deserialize)]
struct ReportHead {
    dataset_id: String,
    scheme: Scheme,
    aggregate: Aggregate,
}

fn report_label(path: &Path, head: &ReportHead, other: &ReportHead, fallback: &str) -> String {
    if head.scheme != other.scheme {
        return head.scheme.to_string();
    }
    path.parent()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| fallback.to_string())
}

/// Side-by-side aggregate means of two reports with `left − right` deltas.
pub fn compare_reports(left: &Path, right: &Path) -> Result<Comparison> {
    let l: ReportHead = read_json(left)?;
    let r: ReportHead = read_json(right)?;
    if l.dataset_id != r.dataset_id {
        return Err(Error::SchemaMismatch(format!(
            "reports describe different datasets ({:?} and {:?})",
            l.dataset_id, r.dataset_id
        )));
    }
    let mut left_label = report_label(left, &l, &r, "left");
    let mut right_label = report_label(right, &r, &l, "right");
    if left_label == right_label {
        left_label = "left".into();
        right_label = "right".into();
    }
    Ok(Comparison::between(&l.dataset_id, &left_label, &l.aggregate.mean, &right_label, &r.aggregate.mean))
}

/// Drops every `wall_time_secs` key, recursively.
pub fn strip_wall_times(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            map.remove("wall_time_secs");
            map.values_mut().for_each(strip_wall_times);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_wall_times),
        _ => {}
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("{THREADS_ENV}={raw:?} is not a positive integer")))?;
    // a global pool may already exist when embedded; keep it
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Prepare(o) => {
            let config = resolve_config(&o)?;
            let m = prepare(&config)?;
            println!(
                "prepared {}: {} train, {} validation, {} test rows, {} features, {} classes -> {}",
                m.dataset_id,
                m.n_train,
                m.n_validation,
                m.n_test,
                m.feature_names.len(),
                m.class_names.len(),
                prepared_dir(&config).display()
            );
        }
        Command::Run(o) => {
            let config = resolve_config(&o)?;
            let report = run(&config)?;
            let a = &report.aggregate;
            println!(
                "{} {} over {}: accuracy {:.4} precision {:.4} recall {:.4} f_measure {:.4} (sd {:.4}), {:.1} features, {:.1} hidden",
                report.dataset_id,
                report.scheme,
                a.n,
                a.mean.accuracy,
                a.mean.precision,
                a.mean.recall,
                a.mean.f_measure,
                a.std_dev.f_measure,
                a.mean_selected_features,
                a.mean_n_hidden
            );
            println!("wrote {}", config.output_dir.join(REPORT_FILE).display());
        }
        Command::Report { reports, out } => {
            let cmp = compare_reports(&reports[0], &reports[1])?;
            print!("{}", cmp.to_table());
            match out {
                Some(dir) => write_atomic(&dir.join(COMPARISON_FILE), cmp.to_csv().as_bytes())?,
                None => print!("\n{}", cmp.to_csv()),
            }
        }
    }
    Ok(())
}

/// Parses `args` and runs the command: 0 on success, 1 on runtime failure,
/// 2 on usage or configuration errors.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
