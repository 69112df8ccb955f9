//! Data matrices, ground-truth labels and outlier bookkeeping.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("line {line}, column {column:?}: non-numeric value {value:?}")]
    NonNumeric {
        line: usize,
        column: String,
        value: String,
    },
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("label column {0:?} not in header")]
    UnknownLabelColumn(String),
    #[error("dataset has no rows")]
    Empty,
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("outlier row {row} has {found} features, dataset has {expected}")]
    DimensionMismatch {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("non-finite value at row {row}, feature {feature}")]
    NonFinite { row: usize, feature: usize },
    #[error("no original (non-outlier) rows")]
    NoOriginalRows,
}

/// Data matrix plus optional ground truth and outlier flags.
///
/// Ground-truth labels are class indices into `class_names`; appended
/// outliers carry `None`, which is distinct from every real class.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    points: Matrix<T>,
    feature_names: Vec<String>,
    ground_truth: Option<Vec<Option<usize>>>,
    class_names: Vec<String>,
    outlier_flags: Vec<bool>,
}

/// Per-feature mean and range.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats<T> {
    pub mean: Vec<T>,
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Scalar> FeatureStats<T> {
    pub fn range(&self, feature: usize) -> T {
        self.max[feature] - self.min[feature]
    }

    pub fn mean_range(&self) -> T {
        let n = T::from_usize(self.mean.len()).unwrap();
        (0..self.mean.len()).map(|f| self.range(f)).sum::<T>() / n
    }
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset with no labels and no outliers.
    pub fn new(points: Matrix<T>, feature_names: Vec<String>) -> Result<Self, DatasetError> {
        if points.rows() == 0 {
            return Err(DatasetError::Empty);
        }
        if points.cols() == 0 {
            return Err(DatasetError::NoFeatures);
        }
        check_finite(&points)?;
        let n = points.rows();
        let names = if feature_names.len() == points.cols() {
            feature_names
        } else {
            (0..points.cols()).map(|f| format!("x{}", f + 1)).collect()
        };
        Ok(Dataset {
            points,
            feature_names: names,
            ground_truth: None,
            class_names: Vec::new(),
            outlier_flags: vec![false; n],
        })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, DatasetError> {
        let points = Matrix::from_rows(rows).map_err(|e| DatasetError::Ragged {
            line: e.row + 1,
            expected: e.expected,
            found: e.found,
        })?;
        Self::new(points, Vec::new())
    }

    /// Attaches integer class labels (one per row).
    pub fn with_labels(mut self, labels: &[usize]) -> Self {
        assert_eq!(labels.len(), self.len(), "one label per row");
        let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        self.class_names = (0..classes).map(|c| c.to_string()).collect();
        self.ground_truth = Some(labels.iter().map(|&l| Some(l)).collect());
        self
    }

    /// Reads a CSV file with a header row. Every column except
    /// `label_column` must be numeric.
    pub fn load_csv(
        path: impl AsRef<Path>,
        label_column: Option<&str>,
    ) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
            path: path.to_owned(),
            source,
        })?;
        let csv_err = |source| DatasetError::Csv {
            path: path.to_owned(),
            source,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let header: Vec<String> = reader
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_owned)
            .collect();
        let label_idx = match label_column {
            Some(name) => Some(
                header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| DatasetError::UnknownLabelColumn(name.to_owned()))?,
            ),
            None => None,
        };
        let feature_names: Vec<String> = header
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != label_idx)
            .map(|(_, h)| h.clone())
            .collect();
        if feature_names.is_empty() {
            return Err(DatasetError::NoFeatures);
        }

        let mut data = Vec::new();
        let mut raw_labels = Vec::new();
        let mut rows = 0;
        for (r, record) in reader.records().enumerate() {
            let record = record.map_err(csv_err)?;
            let line = r + 2;
            if record.len() != header.len() {
                return Err(DatasetError::Ragged {
                    line,
                    expected: header.len(),
                    found: record.len(),
                });
            }
            for (c, field) in record.iter().enumerate() {
                if Some(c) == label_idx {
                    raw_labels.push(field.to_owned());
                } else {
                    data.push(parse_cell::<T>(field, line, &header[c])?);
                }
            }
            rows += 1;
        }
        if rows == 0 {
            return Err(DatasetError::Empty);
        }
        let points = Matrix::from_vec(rows, feature_names.len(), data);
        let mut dataset = Self::new(points, feature_names)?;
        if label_idx.is_some() {
            let mut classes: Vec<String> = Vec::new();
            let mut lookup: HashMap<String, usize> = HashMap::new();
            let labels = raw_labels
                .into_iter()
                .map(|l| {
                    let next = lookup.len();
                    let id = *lookup.entry(l.clone()).or_insert_with(|| {
                        classes.push(l);
                        next
                    });
                    Some(id)
                })
                .collect();
            dataset.ground_truth = Some(labels);
            dataset.class_names = classes;
        }
        Ok(dataset)
    }

    /// Reads a headerless CSV of feature rows (the outlier file format).
    pub fn load_rows_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<T>>, DatasetError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let mut rows = Vec::new();
        for (r, record) in reader.records().enumerate() {
            let record = record.map_err(|source| DatasetError::Csv {
                path: path.to_owned(),
                source,
            })?;
            let row = record
                .iter()
                .enumerate()
                .map(|(c, f)| parse_cell::<T>(f, r + 1, &c.to_string()))
                .collect::<Result<Vec<T>, _>>()?;
            rows.push(row);
        }
        Ok(rows)
    }

    /// Returns a new dataset with `rows` appended and flagged as outliers.
    pub fn append_outliers(&self, rows: &[Vec<T>]) -> Result<Self, DatasetError> {
        let nf = self.n_features();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != nf {
                return Err(DatasetError::DimensionMismatch {
                    row: i,
                    found: r.len(),
                    expected: nf,
                });
            }
            if let Some(f) = r.iter().position(|x| !x.is_finite()) {
                return Err(DatasetError::NonFinite {
                    row: self.len() + i,
                    feature: f,
                });
            }
        }
        let mut data = self.points.as_slice().to_vec();
        for r in rows {
            data.extend_from_slice(r);
        }
        let mut out = self.clone();
        out.points = Matrix::from_vec(self.len() + rows.len(), nf, data);
        out.outlier_flags
            .extend(std::iter::repeat_n(true, rows.len()));
        if let Some(gt) = out.ground_truth.as_mut() {
            gt.extend(std::iter::repeat_n(None, rows.len()));
        }
        Ok(out)
    }

    /// Mean and range of each feature, optionally over original rows only.
    pub fn feature_stats(&self, original_only: bool) -> Result<FeatureStats<T>, DatasetError> {
        let nf = self.n_features();
        let mut mean = vec![T::zero(); nf];
        let mut min = vec![T::infinity(); nf];
        let mut max = vec![T::neg_infinity(); nf];
        let mut count = 0usize;
        for (row, &outlier) in self.points.iter_rows().zip(&self.outlier_flags) {
            if original_only && outlier {
                continue;
            }
            count += 1;
            for f in 0..nf {
                mean[f] += row[f];
                min[f] = min[f].min(row[f]);
                max[f] = max[f].max(row[f]);
            }
        }
        if count == 0 {
            return Err(DatasetError::NoOriginalRows);
        }
        let n = T::from_usize(count).unwrap();
        for (f, m) in mean.iter_mut().enumerate() {
            *m /= n;
            // summation round-off can push a constant column's mean past its bounds
            *m = m.max(min[f]).min(max[f]);
        }
        Ok(FeatureStats { mean, min, max })
    }

    #[inline]
    pub fn points(&self) -> &Matrix<T> {
        &self.points
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.points.cols()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn ground_truth(&self) -> Option<&[Option<usize>]> {
        self.ground_truth.as_deref()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    pub fn outlier_flags(&self) -> &[bool] {
        &self.outlier_flags
    }

    pub fn n_outliers(&self) -> usize {
        self.outlier_flags.iter().filter(|&&o| o).count()
    }

    /// SHA-256 over the shape and the `f64` bit patterns of every value.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.len() as u64).to_le_bytes());
        h.update((self.n_features() as u64).to_le_bytes());
        for x in self.points.as_slice() {
            h.update(x.as_f64().to_le_bytes());
        }
        for &o in &self.outlier_flags {
            h.update([o as u8]);
        }
        hex::encode(h.finalize())
    }
}

fn parse_cell<T: Scalar>(field: &str, line: usize, column: &str) -> Result<T, DatasetError> {
    let non_numeric = || DatasetError::NonNumeric {
        line,
        column: column.to_owned(),
        value: field.to_owned(),
    };
    let v: f64 = field.parse().map_err(|_| non_numeric())?;
    if !v.is_finite() {
        return Err(non_numeric());
    }
    Ok(T::lit(v))
}

fn check_finite<T: Scalar>(points: &Matrix<T>) -> Result<(), DatasetError> {
    for (row, r) in points.iter_rows().enumerate() {
        if let Some(feature) = r.iter().position(|x| !x.is_finite()) {
            return Err(DatasetError::NonFinite { row, feature });
        }
    }
    Ok(())
}
