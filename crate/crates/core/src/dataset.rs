//! Labeled datasets, CSV ingestion and seeded train/validation/test splits.

use std::collections::HashSet;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `m × d0`
    pub features: Array2<f64>,
    /// `m × dl`
    pub labels: Array2<f64>,
    pub feature_names: Option<Vec<String>>,
    pub label_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Array2<f64>) -> Result<Self> {
        if features.nrows() != labels.nrows() {
            return Err(Error::shape("label rows", features.nrows(), labels.nrows()));
        }
        if features.nrows() == 0 {
            return Err(Error::Data("dataset has no rows".into()));
        }
        if features.iter().chain(labels.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data("dataset contains non-finite values".into()));
        }
        Ok(Self {
            features,
            labels,
            feature_names: None,
            label_names: None,
        })
    }

    pub fn with_names(mut self, features: Vec<String>, labels: Vec<String>) -> Self {
        self.feature_names = Some(features);
        self.label_names = Some(labels);
        self
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.labels.ncols()
    }

    /// Rows `indices`, in that order. Panics on out-of-range indices.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: self.labels.select(Axis(0), indices),
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
        }
    }
}

/// Which CSV columns hold labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelSpec {
    /// The last `n` columns.
    Trailing(usize),
    Names(Vec<String>),
}

impl FromStr for LabelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(n) = s.parse::<usize>() {
            if n == 0 {
                return Err(Error::Config("label count must be at least 1".into()));
            }
            return Ok(LabelSpec::Trailing(n));
        }
        let names: Vec<String> = s
            .split(',')
            .map(|n| n.trim().to_string())
            .filter(|n| !n.is_empty())
            .collect();
        if names.is_empty() {
            return Err(Error::Config("empty label specification".into()));
        }
        Ok(LabelSpec::Names(names))
    }
}

impl std::fmt::Display for LabelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LabelSpec::Trailing(n) => write!(f, "{n}"),
            LabelSpec::Names(names) => write!(f, "{}", names.join(",")),
        }
    }
}

/// Reads a headed, comma-separated numeric file.
pub fn load_csv(path: impl AsRef<Path>, labels: &LabelSpec) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    read_csv(file, labels)
}

pub fn read_csv<R: std::io::Read>(reader: R, labels: &LabelSpec) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut seen = HashSet::new();
    for name in &header {
        if !seen.insert(name.as_str()) {
            return Err(Error::Data(format!("duplicate header column '{name}'")));
        }
    }
    let ncols = header.len();
    let label_cols: Vec<usize> = match labels {
        LabelSpec::Trailing(n) => {
            if *n == 0 || *n >= ncols {
                return Err(Error::Data(format!(
                    "cannot take {n} label column(s) from {ncols} column(s)"
                )));
            }
            (ncols - n..ncols).collect()
        }
        LabelSpec::Names(names) => names
            .iter()
            .map(|n| {
                header
                    .iter()
                    .position(|h| h == n)
                    .ok_or_else(|| Error::Data(format!("label column '{n}' not found")))
            })
            .collect::<Result<_>>()?,
    };
    let feature_cols: Vec<usize> = (0..ncols).filter(|c| !label_cols.contains(c)).collect();
    if feature_cols.is_empty() {
        return Err(Error::Data("no feature columns".into()));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        // header is line 1
        let line = i + 2;
        let record = record.map_err(|e| Error::Data(format!("line {line}: {e}")))?;
        if record.len() != ncols {
            return Err(Error::Data(format!(
                "line {line}: expected {ncols} fields, found {}",
                record.len()
            )));
        }
        let mut values = Vec::with_capacity(ncols);
        for (c, cell) in record.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::Data(format!(
                    "line {line}, column '{}': missing value",
                    header[c]
                )));
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::Data(format!(
                    "line {line}, column '{}': non-numeric value '{cell}'",
                    header[c]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "line {line}, column '{}': non-finite value '{cell}'",
                    header[c]
                )));
            }
            values.push(v);
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Data("file has no data rows".into()));
    }
    let m = rows.len();
    let features = Array2::from_shape_fn((m, feature_cols.len()), |(i, j)| {
        rows[i][feature_cols[j]]
    });
    let labels_arr = Array2::from_shape_fn((m, label_cols.len()), |(i, j)| rows[i][label_cols[j]]);
    let names = |cols: &[usize]| cols.iter().map(|&c| header[c].clone()).collect();
    Ok(Dataset::new(features, labels_arr)?.with_names(names(&feature_cols), names(&label_cols)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    /// Fraction of the non-test remainder used for validation.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.25,
            val_fraction: 0.20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

fn floor_fraction(fraction: f64, n: usize) -> usize {
    // absorb representation error such as 0.2 * 75 = 15.000000000000002
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Seeded shuffled index order and the `(train, val, test)` sizes.
pub fn split_indices(m: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    for (name, f) in [("test", spec.test_fraction), ("validation", spec.val_fraction)] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!(
                "{name} fraction must lie in (0, 1), got {f}"
            )));
        }
    }
    if m < 5 {
        return Err(Error::Data(format!("need at least 5 rows to split, got {m}")));
    }
    let n_test = floor_fraction(spec.test_fraction, m);
    let rest = m - n_test;
    let n_val = floor_fraction(spec.val_fraction, rest);
    let n_train = rest - n_val;
    if n_test == 0 || n_val == 0 || n_train == 0 {
        return Err(Error::Config(format!(
            "split of {m} rows leaves an empty part (train {n_train}, val {n_val}, test {n_test})"
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let test = order[rest..].to_vec();
    let val = order[n_train..rest].to_vec();
    order.truncate(n_train);
    Ok((order, val, test))
}

/// Shuffle, then slice: the last `⌊test·m⌋` rows are test, the last
/// `⌊val·rest⌋` rows of the remainder are validation.
pub fn split_dataset(dataset: &Dataset, spec: &SplitSpec) -> Result<Split> {
    let (train_idx, val_idx, test_idx) = split_indices(dataset.len(), spec)?;
    Ok(Split {
        train: dataset.select(&train_idx),
        val: dataset.select(&val_idx),
        test: dataset.select(&test_idx),
        train_idx,
        val_idx,
        test_idx,
    })
}
