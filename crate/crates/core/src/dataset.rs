//! Datasets on the unit cube, the synthetic generators used by the
//! experiments, and CSV ingestion.
//!
//! All randomness flows through [`ChaCha8Rng`] seeded with
//! `seed_from_u64`, so generated data is identical on every platform for a
//! given seed.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;

/// Seeded generator used everywhere a dataset or fold split is drawn.
pub type ExperimentRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> ExperimentRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense row-major feature matrix plus response vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n_samples: usize,
    n_features: usize,
    features: Vec<f64>,
    response: Vec<f64>,
    feature_names: Option<Vec<String>>,
    response_name: Option<String>,
}

impl Dataset {
    /// Builds a dataset from a row-major feature buffer of length `n * d`.
    pub fn new(n_features: usize, features: Vec<f64>, response: Vec<f64>) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::validation("dataset needs at least one feature"));
        }
        if response.is_empty() {
            return Err(Error::validation("dataset needs at least one row"));
        }
        if features.len() != n_features * response.len() {
            return Err(Error::validation(format!(
                "feature buffer has {} values, expected {} rows x {} features",
                features.len(),
                response.len(),
                n_features
            )));
        }
        if let Some(pos) = features.iter().chain(&response).position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite value at flat position {pos}")));
        }
        Ok(Self {
            n_samples: response.len(),
            n_features,
            features,
            response,
            feature_names: None,
            response_name: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], response: Vec<f64>) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if rows.len() != response.len() {
            return Err(Error::validation(format!(
                "{} feature rows but {} responses",
                rows.len(),
                response.len()
            )));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::validation(format!("row {i} has {} features, expected {d}", rows[i].len())));
        }
        Self::new(d, rows.concat(), response)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features {
            return Err(Error::validation(format!(
                "{} feature names for {} features",
                names.len(),
                self.n_features
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn with_response_name(mut self, name: impl Into<String>) -> Self {
        self.response_name = Some(name.into());
        self
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn x(&self, row: usize, feature: usize) -> f64 {
        self.features[row * self.n_features + feature]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.features[row * self.n_features..(row + 1) * self.n_features]
    }

    #[inline]
    pub fn y(&self, row: usize) -> f64 {
        self.response[row]
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn column(&self, feature: usize) -> Vec<f64> {
        (0..self.n_samples).map(|i| self.x(i, feature)).collect()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn response_name(&self) -> Option<&str> {
        self.response_name.as_deref()
    }

    pub fn feature_name(&self, feature: usize) -> String {
        match &self.feature_names {
            Some(names) => names[feature].clone(),
            None => format!("x{}", feature + 1),
        }
    }

    pub fn response_mean(&self) -> f64 {
        numeric::mean(&self.response)
    }

    /// Sample variance of the response with divisor `n`.
    pub fn response_variance(&self) -> f64 {
        numeric::variance(&self.response)
    }

    pub fn is_unit_scaled(&self) -> bool {
        self.features.iter().all(|v| (0.0..=1.0).contains(v))
    }

    /// Dataset restricted to the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(rows.len() * self.n_features);
        for &i in rows {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            n_samples: rows.len(),
            n_features: self.n_features,
            features,
            response: rows.iter().map(|&i| self.response[i]).collect(),
            feature_names: self.feature_names.clone(),
            response_name: self.response_name.clone(),
        }
    }

    /// Same features, different response vector.
    pub fn with_response(&self, response: Vec<f64>) -> Result<Dataset> {
        if response.len() != self.n_samples {
            return Err(Error::validation("response length does not match row count"));
        }
        let mut out = self.clone();
        out.response = response;
        Ok(out)
    }

    /// Applies `f` to every value of one feature column.
    pub fn map_feature(&self, feature: usize, f: impl Fn(f64) -> f64) -> Dataset {
        let mut out = self.clone();
        for i in 0..self.n_samples {
            let idx = i * self.n_features + feature;
            out.features[idx] = f(out.features[idx]);
        }
        out
    }
}

/// Piecewise-constant function on `[0, 1]`.
///
/// Piece `k` covers `[breakpoints[k-1], breakpoints[k])`, so a point sitting
/// exactly on a breakpoint belongs to the piece on its right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    levels: Vec<f64>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if levels.len() != breakpoints.len() + 1 {
            return Err(Error::validation(format!(
                "step function with {} breakpoints needs {} levels, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                levels.len()
            )));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("step breakpoints must be strictly increasing"));
        }
        if breakpoints.iter().chain(&levels).any(|v| !v.is_finite()) {
            return Err(Error::validation("step function values must be finite"));
        }
        Ok(Self { breakpoints, levels })
    }

    #[inline]
    pub fn piece_index(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= x)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.levels[self.piece_index(x)]
    }

    pub fn n_pieces(&self) -> usize {
        self.levels.len()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
}

/// Component function for [`GeneratorKind::CustomAdditive`].
pub type ComponentFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum GeneratorKind {
    /// `Y = sum_{j <= d0} (-1)^{j+1} X_j^2`.
    SparseQuadratic,
    /// `Y = sum_{j <= d0} g_j(X_j)` with one step function per signal coordinate.
    StepAdditive { components: Vec<StepFunction> },
    /// `Y = sum_{j <= d0} sin(2 pi w X_j)`.
    Sinusoid { frequency: u32 },
    /// `Y = sum_{j <= d0} g_j(X_j)` for arbitrary components.
    CustomAdditive { components: Vec<ComponentFn> },
}

impl fmt::Debug for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorKind::SparseQuadratic => f.write_str("SparseQuadratic"),
            GeneratorKind::StepAdditive { components } => {
                f.debug_struct("StepAdditive").field("components", components).finish()
            }
            GeneratorKind::Sinusoid { frequency } => {
                f.debug_struct("Sinusoid").field("frequency", frequency).finish()
            }
            GeneratorKind::CustomAdditive { components } => {
                write!(f, "CustomAdditive({} components)", components.len())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub d: usize,
    pub d0: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn sparse_quadratic(n: usize, d: usize, d0: usize, seed: u64) -> Self {
        Self { kind: GeneratorKind::SparseQuadratic, n, d, d0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("generator needs n >= 1"));
        }
        if self.d == 0 {
            return Err(Error::validation("generator needs d >= 1"));
        }
        if self.d0 > self.d {
            return Err(Error::validation(format!("sparsity d0 = {} exceeds d = {}", self.d0, self.d)));
        }
        match &self.kind {
            GeneratorKind::Sinusoid { frequency } if *frequency == 0 => {
                Err(Error::validation("sinusoid frequency must be a positive integer"))
            }
            GeneratorKind::StepAdditive { components } if components.len() != self.d0 => Err(
                Error::validation(format!("{} step components for d0 = {}", components.len(), self.d0)),
            ),
            GeneratorKind::CustomAdditive { components } if components.len() != self.d0 => Err(
                Error::validation(format!("{} custom components for d0 = {}", components.len(), self.d0)),
            ),
            _ => Ok(()),
        }
    }

    /// Regression function evaluated at one point.
    pub fn regression_function(&self, x: &[f64]) -> f64 {
        let signal = &x[..self.d0];
        match &self.kind {
            GeneratorKind::SparseQuadratic => signal
                .iter()
                .enumerate()
                .map(|(j, v)| if j % 2 == 0 { v * v } else { -v * v })
                .sum(),
            GeneratorKind::StepAdditive { components } => {
                components.iter().zip(signal).map(|(g, &v)| g.eval(v)).sum()
            }
            GeneratorKind::Sinusoid { frequency } => {
                let w = f64::from(*frequency);
                signal.iter().map(|v| (2.0 * std::f64::consts::PI * w * v).sin()).sum()
            }
            GeneratorKind::CustomAdditive { components } => {
                components.iter().zip(signal).map(|(g, &v)| g(v)).sum()
            }
        }
    }

    /// Number of constant pieces of the response for step-additive models.
    pub fn step_piece_count(&self) -> Option<usize> {
        match &self.kind {
            GeneratorKind::StepAdditive { components } => {
                Some(components.iter().map(StepFunction::n_pieces).product())
            }
            _ => None,
        }
    }
}

/// Draws `n` points uniformly from `[0, 1]^d` and evaluates the model.
pub fn generate(spec: &GeneratorSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let mut features = Vec::with_capacity(spec.n * spec.d);
    for _ in 0..spec.n * spec.d {
        features.push(rng.gen::<f64>());
    }
    let response = features.chunks_exact(spec.d).map(|x| spec.regression_function(x)).collect();
    Dataset::new(spec.d, features, response)
}

/// Min-max scales every column to `[0, 1]`; constant columns become 0.
pub fn scale_unit_interval(ds: &Dataset) -> Dataset {
    let mut out = ds.clone();
    for j in 0..ds.n_features {
        let (lo, hi) = (0..ds.n_samples)
            .map(|i| ds.x(i, j))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let span = hi - lo;
        for i in 0..ds.n_samples {
            let idx = i * ds.n_features + j;
            out.features[idx] = if span > 0.0 { ((ds.features[idx] - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
        }
    }
    out
}

/// Appends `extra` i.i.d. Uniform[0, 1] columns.
pub fn augment_noise(ds: &Dataset, extra: usize, seed: u64) -> Dataset {
    if extra == 0 {
        return ds.clone();
    }
    let mut rng = rng_from_seed(seed);
    let d = ds.n_features + extra;
    let mut features = Vec::with_capacity(ds.n_samples * d);
    for i in 0..ds.n_samples {
        features.extend_from_slice(ds.row(i));
        for _ in 0..extra {
            features.push(rng.gen::<f64>());
        }
    }
    let feature_names = ds.feature_names.as_ref().map(|names| {
        let mut names = names.clone();
        names.extend((1..=extra).map(|k| format!("noise{k}")));
        names
    });
    Dataset {
        n_samples: ds.n_samples,
        n_features: d,
        features,
        response: ds.response.clone(),
        feature_names,
        response_name: ds.response_name.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseColumn {
    Name(String),
    /// Zero-based column position.
    Index(usize),
}

impl From<&str> for ResponseColumn {
    /// Purely numeric strings select by position, anything else by name.
    fn from(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => ResponseColumn::Index(i),
            Err(_) => ResponseColumn::Name(s.to_string()),
        }
    }
}

/// Reads a numeric CSV file. Lines starting with `#` are ignored; a header
/// row is detected when any cell of the first record is non-numeric.
pub fn load_csv(path: impl AsRef<Path>, response: &ResponseColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut records = Vec::new();
    for rec in reader.records() {
        records.push(rec?);
    }
    if records.is_empty() {
        return Err(Error::validation(format!("{}: no data rows", path.display())));
    }
    let has_header = records[0].iter().any(|cell| cell.parse::<f64>().is_err());
    let (header, data) = if has_header {
        let names: Vec<String> = records[0].iter().map(str::to_string).collect();
        (Some(names), &records[1..])
    } else {
        (None, &records[..])
    };
    let width = header.as_ref().map(Vec::len).unwrap_or_else(|| records[0].len());
    let column_label = |c: usize| match &header {
        Some(names) => format!("'{}'", names[c]),
        None => format!("{}", c + 1),
    };

    let response_idx = match response {
        ResponseColumn::Index(i) if *i < width => *i,
        ResponseColumn::Index(i) => {
            return Err(Error::validation(format!(
                "{}: response column {i} out of range ({width} columns)",
                path.display()
            )))
        }
        ResponseColumn::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::validation(format!("{}: response column '{name}' not found", path.display())))?,
    };
    if width < 2 {
        return Err(Error::validation(format!("{}: need at least two columns", path.display())));
    }
    if data.is_empty() {
        return Err(Error::validation(format!("{}: header but no data rows", path.display())));
    }

    let d = width - 1;
    let mut features = Vec::with_capacity(data.len() * d);
    let mut y = Vec::with_capacity(data.len());
    for (r, rec) in data.iter().enumerate() {
        let row = r + 1;
        if rec.len() != width {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row,
                column: "-".into(),
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row,
                column: column_label(c),
                message: format!("non-numeric value {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    column: column_label(c),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            if c == response_idx {
                y.push(value);
            } else {
                features.push(value);
            }
        }
    }

    let mut ds = Dataset::new(d, features, y)?;
    if let Some(names) = header {
        let response_name = names[response_idx].clone();
        let feature_names = names.into_iter().enumerate().filter(|(c, _)| *c != response_idx).map(|(_, n)| n).collect();
        ds = ds.with_feature_names(feature_names)?.with_response_name(response_name);
    }
    Ok(ds)
}

/// Writes features followed by the response, with a header row.
pub fn write_csv(ds: &Dataset, mut out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(&mut out);
    let mut header: Vec<String> = (0..ds.n_features).map(|j| ds.feature_name(j)).collect();
    header.push(ds.response_name.clone().unwrap_or_else(|| "y".into()));
    writer.write_record(&header)?;
    for i in 0..ds.n_samples {
        let mut rec: Vec<String> = ds.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(ds.response[i].to_string());
        writer.write_record(&rec)?;
    }
    writer.flush().map_err(|source| Error::Io { path: "<csv output>".into(), source })?;
    Ok(())
}

pub fn write_csv_file(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    write_csv(ds, std::io::BufWriter::new(file))
}
