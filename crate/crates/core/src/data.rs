//! Learning-curve datasets: data model, CSV/JSON ingestion, splitting and
//! normalization.
//!
//! Epochs are 1-indexed and contiguous. Hyperparameter vectors are stored
//! exactly as models consume them (any log transform already applied).

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::rng_from;

/// A hyperparameter configuration vector with its coordinate names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparameterConfig<T> {
    pub values: Vec<T>,
    pub names: Vec<String>,
}

impl<T: Scalar> HyperparameterConfig<T> {
    pub fn new(values: Vec<T>, names: Vec<String>) -> Result<Self> {
        if values.len() != names.len() {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "hyperparameter '{}' is not finite",
                names[i]
            )));
        }
        Ok(Self { values, names })
    }

    /// Config with generated names `h_0..h_{D-1}`.
    pub fn unnamed(values: Vec<T>) -> Result<Self> {
        let names = default_names(values.len());
        Self::new(values, names)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub fn default_names(dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("h_{i}")).collect()
}

/// One training run: a configuration and its per-epoch performance values.
/// `values[0]` is epoch 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve<T> {
    pub id: String,
    pub config: HyperparameterConfig<T>,
    pub values: Vec<T>,
}

impl<T: Scalar> LearningCurve<T> {
    pub fn new(id: impl Into<String>, config: HyperparameterConfig<T>, values: Vec<T>) -> Result<Self> {
        let id = id.into();
        if values.is_empty() {
            return Err(Error::data(format!("curve '{id}' is empty")));
        }
        if let Some(t) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "curve '{id}' has a non-finite value at epoch {}",
                t + 1
            )));
        }
        Ok(Self { id, config, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at a 1-indexed epoch.
    pub fn at_epoch(&self, epoch: usize) -> Option<T> {
        epoch.checked_sub(1).and_then(|i| self.values.get(i).copied())
    }
}

/// A named collection of learning curves sharing one configuration space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveDataset<T> {
    pub name: String,
    pub config_dim: usize,
    pub config_names: Vec<String>,
    pub curves: Vec<LearningCurve<T>>,
}

impl<T: Scalar> CurveDataset<T> {
    pub fn new(
        name: impl Into<String>,
        config_names: Vec<String>,
        curves: Vec<LearningCurve<T>>,
    ) -> Result<Self> {
        let config_dim = config_names.len();
        if config_dim == 0 {
            return Err(Error::data("configuration dimension must be positive"));
        }
        let mut ids = HashSet::with_capacity(curves.len());
        for c in &curves {
            if c.config.dim() != config_dim {
                return Err(Error::data(format!(
                    "curve '{}' has config dimension {}, dataset has {}",
                    c.id,
                    c.config.dim(),
                    config_dim
                )));
            }
            if !ids.insert(c.id.as_str()) {
                return Err(Error::data(format!("duplicate curve id '{}'", c.id)));
            }
        }
        Ok(Self {
            name: name.into(),
            config_dim,
            config_names,
            curves,
        })
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&LearningCurve<T>> {
        self.curves.iter().find(|c| c.id == id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.curves.iter().map(|c| c.id.as_str()).collect()
    }

    pub fn min_len(&self) -> Option<usize> {
        self.curves.iter().map(|c| c.len()).min()
    }

    pub fn max_len(&self) -> Option<usize> {
        self.curves.iter().map(|c| c.len()).max()
    }

    /// Sub-dataset holding the curves whose ids are listed, in dataset order.
    pub fn subset(&self, name: impl Into<String>, ids: &[String]) -> Result<Self> {
        let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
        for id in &wanted {
            if self.get(id).is_none() {
                return Err(Error::data(format!("unknown curve id '{id}'")));
            }
        }
        let curves = self
            .curves
            .iter()
            .filter(|c| wanted.contains(c.id.as_str()))
            .cloned()
            .collect();
        Self::new(name, self.config_names.clone(), curves)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Json,
}

impl DataFormat {
    /// Infers the format from a `.csv` or `.json` extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(DataFormat::Csv),
            "json" => Some(DataFormat::Json),
            _ => None,
        }
    }
}

impl std::str::FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(DataFormat::Csv),
            "json" => Ok(DataFormat::Json),
            other => Err(format!("unknown format '{other}' (expected csv or json)")),
        }
    }
}

/// Reads a dataset. For CSV the dataset name is the file stem.
pub fn load_dataset<T: Scalar>(path: &Path, format: DataFormat) -> Result<CurveDataset<T>> {
    match format {
        DataFormat::Csv => load_csv(path),
        DataFormat::Json => load_json(path),
    }
}

/// Writes a dataset so that [`load_dataset`] reproduces it.
///
/// CSV carries no dataset name; it round-trips when the file stem equals the
/// dataset name.
pub fn save_dataset<T: Scalar>(dataset: &CurveDataset<T>, path: &Path, format: DataFormat) -> Result<()> {
    match format {
        DataFormat::Csv => save_csv(dataset, path),
        DataFormat::Json => save_json(dataset, path),
    }
}

const RESERVED_COLUMNS: [&str; 3] = ["id", "epoch", "value"];

struct CsvRow<T> {
    line: usize,
    epoch: usize,
    value: T,
    config: Vec<T>,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_real<T: Scalar>(path: &Path, line: usize, column: &str, text: &str) -> Result<T> {
    let x: f64 = text
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("column '{column}': cannot parse '{text}' as a number")))?;
    if !x.is_finite() {
        return Err(parse_err(path, line, format!("column '{column}': non-finite value '{text}'")));
    }
    Ok(T::of(x))
}

fn load_csv<T: Scalar>(path: &Path) -> Result<CurveDataset<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    if header.len() < 4 || header.iter().take(3).ne(RESERVED_COLUMNS.iter().copied()) {
        return Err(parse_err(
            path,
            1,
            "header must be 'id,epoch,value' followed by at least one hyperparameter column",
        ));
    }
    let config_names: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
    let dim = config_names.len();

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<CsvRow<T>>> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_err(path, line, e.to_string()))?;
        if record.len() != 3 + dim {
            return Err(parse_err(
                path,
                line,
                format!("expected {} columns, found {}", 3 + dim, record.len()),
            ));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(parse_err(path, line, "empty curve id"));
        }
        let epoch: usize = record[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, line, format!("invalid epoch '{}'", &record[1])))?;
        let value = parse_real(path, line, "value", &record[2])?;
        let config = (0..dim)
            .map(|j| parse_real(path, line, &config_names[j], &record[3 + j]))
            .collect::<Result<Vec<T>>>()?;
        let entry = rows.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            Vec::new()
        });
        entry.push(CsvRow {
            line,
            epoch,
            value,
            config,
        });
    }

    let mut curves = Vec::with_capacity(order.len());
    for id in order {
        let mut curve_rows = rows.remove(&id).expect("id recorded on first sight");
        curve_rows.sort_by_key(|r| r.epoch);
        let config = curve_rows[0].config.clone();
        for (expected, row) in curve_rows.iter().enumerate() {
            if row.epoch != expected + 1 {
                return Err(parse_err(
                    path,
                    row.line,
                    format!(
                        "non-contiguous epochs for curve '{id}': expected epoch {}, found {}",
                        expected + 1,
                        row.epoch
                    ),
                ));
            }
            if row.config != config {
                return Err(parse_err(
                    path,
                    row.line,
                    format!("hyperparameters differ between rows of curve '{id}'"),
                ));
            }
        }
        let values = curve_rows.iter().map(|r| r.value).collect();
        let config = HyperparameterConfig::new(config, config_names.clone())?;
        curves.push(LearningCurve::new(id, config, values)?);
    }

    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    CurveDataset::new(name, config_names, curves).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn save_csv<T: Scalar>(dataset: &CurveDataset<T>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let io_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let header = RESERVED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(dataset.config_names.iter().cloned());
    writer.write_record(header).map_err(io_err)?;
    for curve in &dataset.curves {
        let config: Vec<String> = curve.config.values.iter().map(|v| v.to_string()).collect();
        for (t, v) in curve.values.iter().enumerate() {
            let mut record = vec![curve.id.clone(), (t + 1).to_string(), v.to_string()];
            record.extend(config.iter().cloned());
            writer.write_record(&record).map_err(io_err)?;
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct JsonCurve {
    id: String,
    config: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct JsonDataset {
    name: String,
    config_names: Vec<String>,
    curves: Vec<JsonCurve>,
}

fn load_json<T: Scalar>(path: &Path) -> Result<CurveDataset<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: JsonDataset = serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))?;
    let fmt_err = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut curves = Vec::with_capacity(raw.curves.len());
    for (i, c) in raw.curves.into_iter().enumerate() {
        if c.config.len() != raw.config_names.len() {
            return Err(fmt_err(format!(
                "curves[{i}] ('{}'): config has {} entries, config_names has {}",
                c.id,
                c.config.len(),
                raw.config_names.len()
            )));
        }
        let config = HyperparameterConfig::new(
            c.config.into_iter().map(T::of).collect(),
            raw.config_names.clone(),
        )
        .map_err(|e| fmt_err(format!("curves[{i}]: {e}")))?;
        let curve = LearningCurve::new(c.id, config, c.values.into_iter().map(T::of).collect())
            .map_err(|e| fmt_err(format!("curves[{i}]: {e}")))?;
        curves.push(curve);
    }
    CurveDataset::new(raw.name, raw.config_names, curves).map_err(|e| fmt_err(e.to_string()))
}

fn save_json<T: Scalar>(dataset: &CurveDataset<T>, path: &Path) -> Result<()> {
    let raw = JsonDataset {
        name: dataset.name.clone(),
        config_names: dataset.config_names.clone(),
        curves: dataset
            .curves
            .iter()
            .map(|c| JsonCurve {
                id: c.id.clone(),
                config: c.config.values.iter().map(|v| v.as_f64()).collect(),
                values: c.values.iter().map(|v| v.as_f64()).collect(),
            })
            .collect(),
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &raw).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Curve-level train/test split parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, seed: u64) -> Result<Self> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "test fraction must lie strictly between 0 and 1, got {test_fraction}"
            )));
        }
        Ok(Self { test_fraction, seed })
    }
}

/// Partitions whole curves into `(train, test)`; `|test| = round(fraction * N)`.
pub fn split<T: Scalar>(dataset: &CurveDataset<T>, spec: SplitSpec) -> Result<(CurveDataset<T>, CurveDataset<T>)> {
    let spec = SplitSpec::new(spec.test_fraction, spec.seed)?;
    let n = dataset.len();
    if n < 2 {
        return Err(Error::data(format!("cannot split a dataset of {n} curve(s)")));
    }
    let n_test = (spec.test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::data(format!(
            "test fraction {} of {n} curves leaves one side empty",
            spec.test_fraction
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from(spec.seed));
    let mut is_test = vec![false; n];
    for &i in &idx[..n_test] {
        is_test[i] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (curve, t) in dataset.curves.iter().zip(is_test) {
        if t {
            test.push(curve.clone());
        } else {
            train.push(curve.clone());
        }
    }
    Ok((
        CurveDataset::new(format!("{}-train", dataset.name), dataset.config_names.clone(), train)?,
        CurveDataset::new(format!("{}-test", dataset.name), dataset.config_names.clone(), test)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationScheme {
    None,
    MinmaxPerDataset,
}

/// Affine map applied to curve values: `v' = (v - min) / (max - min)`.
/// The identity scheme stores `min = 0, max = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord<T> {
    pub scheme: NormalizationScheme,
    pub min: T,
    pub max: T,
}

impl<T: Scalar> NormalizationRecord<T> {
    pub fn identity() -> Self {
        Self {
            scheme: NormalizationScheme::None,
            min: T::zero(),
            max: T::one(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.scheme == NormalizationScheme::None
    }

    pub fn apply(&self, v: T) -> T {
        match self.scheme {
            NormalizationScheme::None => v,
            NormalizationScheme::MinmaxPerDataset => (v - self.min) / (self.max - self.min),
        }
    }

    pub fn invert(&self, v: T) -> T {
        match self.scheme {
            NormalizationScheme::None => v,
            NormalizationScheme::MinmaxPerDataset => v * (self.max - self.min) + self.min,
        }
    }

    /// Maps a variance in normalized units back to raw units.
    pub fn invert_variance(&self, var: T) -> T {
        match self.scheme {
            NormalizationScheme::None => var,
            NormalizationScheme::MinmaxPerDataset => {
                let span = self.max - self.min;
                var * span * span
            }
        }
    }

    /// Applies the record to every curve value of `dataset`.
    pub fn apply_dataset(&self, dataset: &CurveDataset<T>) -> CurveDataset<T> {
        self.map_dataset(dataset, |v| self.apply(v))
    }

    pub fn invert_dataset(&self, dataset: &CurveDataset<T>) -> CurveDataset<T> {
        self.map_dataset(dataset, |v| self.invert(v))
    }

    fn map_dataset(&self, dataset: &CurveDataset<T>, f: impl Fn(T) -> T) -> CurveDataset<T> {
        if self.is_identity() {
            return dataset.clone();
        }
        let mut out = dataset.clone();
        for c in &mut out.curves {
            for v in &mut c.values {
                *v = f(*v);
            }
        }
        out
    }
}

/// Normalizes curve values; configs are untouched.
pub fn normalize<T: Scalar>(
    dataset: &CurveDataset<T>,
    scheme: NormalizationScheme,
) -> Result<(CurveDataset<T>, NormalizationRecord<T>)> {
    if dataset.is_empty() {
        return Err(Error::data("cannot normalize an empty dataset"));
    }
    let record = match scheme {
        NormalizationScheme::None => NormalizationRecord::identity(),
        NormalizationScheme::MinmaxPerDataset => {
            let all = dataset.curves.iter().flat_map(|c| c.values.iter().copied());
            let (min, max) = all.fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if max == min {
                return Err(Error::data(format!(
                    "degenerate dataset: every value equals {min}, min-max scaling undefined"
                )));
            }
            NormalizationRecord { scheme, min, max }
        }
    };
    Ok((record.apply_dataset(dataset), record))
}

/// Inverse of [`normalize`].
pub fn denormalize<T: Scalar>(dataset: &CurveDataset<T>, record: &NormalizationRecord<T>) -> CurveDataset<T> {
    record.invert_dataset(dataset)
}
