//! Tabular classification data: CSV loading, per-device integration, min-max
//! normalization, stratified splitting and client partitioning.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Dense feature matrix with integer class labels.
///
/// `row_ids` tags every row with its index in the dataset it was originally
/// loaded as. Subsetting keeps the tags, so downstream code can tell which
/// source rows a given subset touches.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub row_ids: Vec<usize>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let row_ids = (0..labels.len()).collect();
        let data = Dataset {
            features,
            labels,
            feature_names,
            class_names,
            row_ids,
        };
        data.validate()?;
        Ok(data)
    }

    fn validate(&self) -> Result<()> {
        let (rows, cols) = self.features.dim();
        if rows != self.labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows,
                found: self.labels.len(),
            });
        }
        if rows != self.row_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: rows,
                found: self.row_ids.len(),
            });
        }
        if cols == 0 {
            return Err(Error::SchemaMismatch("dataset has no feature columns".into()));
        }
        if cols != self.feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: cols,
                found: self.feature_names.len(),
            });
        }
        if let Some(&label) = self.labels.iter().find(|&&l| l >= self.class_names.len()) {
            return Err(Error::LabelOutOfRange {
                label,
                n_classes: self.class_names.len(),
            });
        }
        if let Some((i, j)) = self
            .features
            .indexed_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(ix, _)| ix)
        {
            return Err(Error::MissingValue { row: i, column: j });
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// Rows in the given order, keeping their provenance tags.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            row_ids: indices.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    pub fn select_columns(&self, columns: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(1), columns),
            labels: self.labels.clone(),
            feature_names: columns.iter().map(|&j| self.feature_names[j].clone()).collect(),
            class_names: self.class_names.clone(),
            row_ids: self.row_ids.clone(),
        }
    }

    /// Stacks datasets that share a schema.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let first = parts.first().ok_or(Error::EmptyDataset)?;
        for p in &parts[1..] {
            if p.feature_names != first.feature_names {
                return Err(Error::SchemaMismatch("feature names differ".into()));
            }
            if p.class_names != first.class_names {
                return Err(Error::SchemaMismatch("class registries differ".into()));
            }
        }
        let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
        let features = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::SchemaMismatch(e.to_string()))?;
        Ok(Dataset {
            features,
            labels: parts.iter().flat_map(|p| p.labels.iter().copied()).collect(),
            feature_names: first.feature_names.clone(),
            class_names: first.class_names.clone(),
            row_ids: parts.iter().flat_map(|p| p.row_ids.iter().copied()).collect(),
        })
    }

    pub fn with_class_names(mut self, class_names: Vec<String>) -> Result<Self> {
        self.class_names = class_names;
        self.validate()?;
        Ok(self)
    }

    /// Writes the features plus a trailing `label` column holding class names.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        let mut header = self.feature_names.join(",");
        header.push_str(",label\n");
        w.write_all(header.as_bytes()).map_err(io)?;
        let mut line = String::new();
        for (row, &label) in self.features.rows().into_iter().zip(&self.labels) {
            line.clear();
            for v in row {
                line.push_str(&v.to_string());
                line.push(',');
            }
            line.push_str(&self.class_names[label]);
            line.push('\n');
            w.write_all(line.as_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Label column addressed by header name or zero-based index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl LabelColumn {
    fn resolve(&self, headers: &[String]) -> Result<usize> {
        match self {
            LabelColumn::Name(name) => headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::LabelColumnNotFound(name.clone())),
            LabelColumn::Index(i) if *i < headers.len() => Ok(*i),
            LabelColumn::Index(i) => Err(Error::LabelColumnNotFound(i.to_string())),
        }
    }
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Name(n) => f.write_str(n),
        }
    }
}

struct RawTable {
    headers: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Vec<String>,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file)))
}

fn parse_cell(cell: &str, row: usize, column: usize) -> Result<f64> {
    if cell.is_empty() {
        return Err(Error::MissingValue { row, column });
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonNumeric {
            row,
            column,
            value: cell.to_string(),
        }),
    }
}

/// Reads a headed CSV. Rows and columns in errors are zero-based, counting
/// data rows only.
fn read_table(path: &Path, label: Option<&LabelColumn>) -> Result<RawTable> {
    let ctx = |e: Error| e.context(path.display().to_string());
    let mut reader = csv_reader(path)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let label_idx = label.map(|l| l.resolve(&headers)).transpose()?;
    let width = headers.len();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        if record.len() != width {
            return Err(ctx(Error::RowLength {
                row,
                expected: width,
                found: record.len(),
            }));
        }
        let mut values = Vec::with_capacity(width);
        for (column, cell) in record.iter().enumerate() {
            if Some(column) == label_idx {
                if cell.is_empty() {
                    return Err(ctx(Error::MissingValue { row, column }));
                }
                labels.push(cell.to_string());
            } else {
                values.push(parse_cell(cell, row, column).map_err(ctx)?);
            }
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(ctx(Error::EmptyDataset));
    }
    let headers = headers
        .into_iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != label_idx)
        .map(|(_, h)| h)
        .collect();
    Ok(RawTable {
        headers,
        rows,
        labels,
    })
}

fn to_matrix(rows: Vec<Vec<f64>>, width: usize) -> Array2<f64> {
    let n = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, width), flat).expect("rows have equal width")
}

/// Loads a CSV with one label column. String labels become dense ids in
/// first-appearance order.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let table = read_table(path, Some(label))?;
    let mut class_names: Vec<String> = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    let labels = table
        .labels
        .into_iter()
        .map(|name| {
            *ids.entry(name.clone()).or_insert_with(|| {
                class_names.push(name);
                class_names.len() - 1
            })
        })
        .collect();
    let width = table.headers.len();
    Dataset::new(to_matrix(table.rows, width), labels, table.headers, class_names)
}

/// Loads a CSV whose labels must belong to a known class registry, so that
/// separately stored splits keep a common label mapping.
pub fn load_csv_with_classes(
    path: impl AsRef<Path>,
    label: &LabelColumn,
    class_names: &[String],
) -> Result<Dataset> {
    let path = path.as_ref();
    let table = read_table(path, Some(label))?;
    let labels = table
        .labels
        .iter()
        .map(|name| {
            class_names.iter().position(|c| c == name).ok_or_else(|| {
                Error::SchemaMismatch(format!("{}: unknown class {name:?}", path.display()))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let width = table.headers.len();
    Dataset::new(
        to_matrix(table.rows, width),
        labels,
        table.headers,
        class_names.to_vec(),
    )
}

/// One feature-only CSV capture and the class its rows belong to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: PathBuf,
    pub class_id: usize,
}

/// Concatenates feature-only CSVs sharing one schema, labelling each file's
/// rows with its class id. Class names default to the decimal ids.
pub fn integrate(sources: &[SourceFile]) -> Result<Dataset> {
    let first = sources.first().ok_or(Error::EmptyDataset)?;
    let mut headers: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for src in sources {
        let table = read_table(&src.path, None)?;
        match &headers {
            None => headers = Some(table.headers),
            Some(h) if *h != table.headers => {
                return Err(Error::SchemaMismatch(format!(
                    "{} does not match the columns of {}",
                    src.path.display(),
                    first.path.display()
                )))
            }
            Some(_) => {}
        }
        labels.extend(std::iter::repeat_n(src.class_id, table.rows.len()));
        rows.extend(table.rows);
    }
    let headers = headers.expect("at least one source");
    let n_classes = sources.iter().map(|s| s.class_id).max().unwrap_or(0) + 1;
    let width = headers.len();
    Dataset::new(
        to_matrix(rows, width),
        labels,
        headers,
        (0..n_classes).map(|c| c.to_string()).collect(),
    )
}

/// Column-wise min-max statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizationParams {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let params: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })?;
        if params.min.len() != params.max.len() {
            return Err(Error::DimensionMismatch {
                expected: params.min.len(),
                found: params.max.len(),
            });
        }
        Ok(params)
    }
}

pub fn fit_normalizer(train: &Dataset) -> NormalizationParams {
    let fold = |init: f64, pick: fn(f64, f64) -> f64| {
        train
            .features
            .fold_axis(Axis(0), init, |&acc, &v| pick(acc, v))
            .to_vec()
    };
    NormalizationParams {
        min: fold(f64::INFINITY, f64::min),
        max: fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Maps each column to `[0, 1]` with the given statistics. Values outside the
/// fitted range are clamped; constant columns map to 0.
pub fn apply_normalizer(data: &Dataset, params: &NormalizationParams) -> Result<Dataset> {
    if params.min.len() != data.n_features() || params.max.len() != data.n_features() {
        return Err(Error::DimensionMismatch {
            expected: data.n_features(),
            found: params.min.len(),
        });
    }
    let mut out = data.clone();
    for (j, mut col) in out.features.axis_iter_mut(Axis(1)).enumerate() {
        let (lo, hi) = (params.min[j], params.max[j]);
        let range = hi - lo;
        col.mapv_inplace(|x| {
            if range > 0.0 {
                ((x - lo) / range).clamp(0.0, 1.0)
            } else {
                0.0
            }
        });
    }
    Ok(out)
}

/// Two-level holdout: `train_fraction` of the data forms the training
/// portion (the rest is test), and `validation_fraction_of_train` of that
/// portion is held out for validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction_of_train: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.66,
            validation_fraction_of_train: 0.25,
            stratified: true,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let open = |x: f64| x > 0.0 && x < 1.0;
        if !open(self.train_fraction) || !open(self.validation_fraction_of_train) {
            return Err(Error::InvalidArgument(format!(
                "split fractions must lie strictly inside (0, 1), got {} and {}",
                self.train_fraction, self.validation_fraction_of_train
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// `floor(n * fraction)`, tolerant of fractions like 0.66 whose binary
/// expansion lands a hair under the intended product.
fn floor_share(n: usize, fraction: f64) -> usize {
    ((n as f64) * fraction + 1e-9).floor() as usize
}

/// Largest-remainder apportionment of `total` units over `counts`,
/// proportionally to the counts. Ties go to the lower class id.
fn apportion(counts: &[usize], total: usize) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return vec![0; counts.len()];
    }
    let mut shares: Vec<usize> = counts.iter().map(|&c| c * total / n).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by_key(|&c| (std::cmp::Reverse(counts[c] * total % n), c));
    let missing = total - shares.iter().sum::<usize>();
    for &c in order.iter().take(missing) {
        shares[c] += 1;
    }
    shares
}

/// Splits `indices` (with their labels) into a kept block of
/// `floor(len * keep_fraction)` rows and the remainder.
fn holdout(
    indices: &[usize],
    labels: &[usize],
    n_classes: usize,
    keep_fraction: f64,
    stratified: bool,
    rng: &mut seed::Rng,
) -> (Vec<usize>, Vec<usize>) {
    let keep_total = floor_share(indices.len(), keep_fraction);
    let (mut keep, mut rest) = (Vec::new(), Vec::new());
    if stratified {
        let mut by_class = vec![Vec::new(); n_classes];
        for &i in indices {
            by_class[labels[i]].push(i);
        }
        let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
        let quota = apportion(&counts, keep_total);
        for (members, q) in by_class.iter_mut().zip(quota) {
            members.shuffle(rng);
            keep.extend_from_slice(&members[..q]);
            rest.extend_from_slice(&members[q..]);
        }
    } else {
        let mut shuffled = indices.to_vec();
        shuffled.shuffle(rng);
        keep.extend_from_slice(&shuffled[..keep_total]);
        rest.extend_from_slice(&shuffled[keep_total..]);
    }
    keep.sort_unstable();
    rest.sort_unstable();
    (keep, rest)
}

pub fn split_indices(labels: &[usize], class_names: &[String], spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n_classes = class_names.len();
    let mut rng = seed::rng(spec.seed);
    let all: Vec<usize> = (0..labels.len()).collect();
    let (pool, test) = holdout(&all, labels, n_classes, spec.train_fraction, spec.stratified, &mut rng);
    let (train, validation) = holdout(
        &pool,
        labels,
        n_classes,
        1.0 - spec.validation_fraction_of_train,
        spec.stratified,
        &mut rng,
    );
    if spec.stratified {
        let count = |part: &[usize], c: usize| part.iter().filter(|&&i| labels[i] == c).count();
        for (c, name) in class_names.iter().enumerate() {
            let total = count(&all, c);
            if total > 0 && [&train, &validation, &test].iter().any(|p| count(p, c) == 0) {
                return Err(Error::InsufficientClassSamples {
                    class: name.clone(),
                    available: total,
                });
            }
        }
    }
    Ok(SplitIndices {
        train,
        validation,
        test,
    })
}

/// Train / validation / test partitions of `data`.
pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let idx = split_indices(&data.labels, &data.class_names, spec)?;
    Ok((
        data.select_rows(&idx.train),
        data.select_rows(&idx.validation),
        data.select_rows(&idx.test),
    ))
}

/// Single-level stratified train/validation split used for client-local
/// data. Unlike [`split`] it tolerates classes too rare to reach both sides.
pub fn split_train_validation(
    data: &Dataset,
    validation_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction {validation_fraction} outside (0, 1)"
        )));
    }
    let all: Vec<usize> = (0..data.n_samples()).collect();
    let mut rng = seed::rng(seed);
    let (train, validation) = holdout(
        &all,
        &data.labels,
        data.n_classes(),
        1.0 - validation_fraction,
        true,
        &mut rng,
    );
    Ok((data.select_rows(&train), data.select_rows(&validation)))
}

/// Disjoint, exhaustive client partitions drawn without replacement. Each
/// class is shuffled and its rows dealt round-robin, continuing across
/// classes, so partition sizes differ by at most one and every client gets a
/// near-equal share of every class.
pub fn partition_client_indices(
    labels: &[usize],
    n_classes: usize,
    n_clients: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if n_clients == 0 || n_clients > labels.len() {
        return Err(Error::TooManyClients {
            n_samples: labels.len(),
            n_clients,
        });
    }
    let mut rng = seed::rng(seed);
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut parts = vec![Vec::new(); n_clients];
    for (slot, i) in by_class
        .into_iter()
        .flat_map(|mut members| {
            members.shuffle(&mut rng);
            members
        })
        .enumerate()
    {
        parts[slot % n_clients].push(i);
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    Ok(parts)
}

pub fn partition_clients(train: &Dataset, n_clients: usize, seed: u64) -> Result<Vec<Dataset>> {
    Ok(
        partition_client_indices(&train.labels, train.n_classes(), n_clients, seed)?
            .iter()
            .map(|idx| train.select_rows(idx))
            .collect(),
    )
}

/// Stratified random subsample of at most `cap` rows, in original row order.
pub fn stratified_subsample(data: &Dataset, cap: usize, seed: u64) -> Dataset {
    if data.n_samples() <= cap {
        return data.clone();
    }
    let all: Vec<usize> = (0..data.n_samples()).collect();
    let mut rng = seed::rng(seed);
    let (keep, _) = holdout(
        &all,
        &data.labels,
        data.n_classes(),
        cap as f64 / data.n_samples() as f64,
        true,
        &mut rng,
    );
    data.select_rows(&keep)
}
