//! Pair-counting agreement between two labelings.

use std::collections::HashMap;

use crate::dataset::Dataset;
use crate::kmeans::Assignment;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompareError {
    #[error("labelings have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two items, got {0}")]
    TooShort(usize),
    #[error("dataset has no ground truth labels")]
    NoGroundTruth,
    #[error("unknown class {0:?}")]
    UnknownClass(String),
}

struct Contingency {
    n: f64,
    cells: f64,
    rows: f64,
    cols: f64,
}

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

fn contingency(a: &[usize], b: &[usize]) -> Result<Contingency, CompareError> {
    if a.len() != b.len() {
        return Err(CompareError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(CompareError::TooShort(a.len()));
    }
    let mut cells: HashMap<(usize, usize), usize> = HashMap::new();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    // sums of pair counts are integers, so summation order cannot matter
    Ok(Contingency {
        n: choose2(a.len()),
        cells: cells.values().map(|&c| choose2(c)).sum(),
        rows: rows.values().map(|&c| choose2(c)).sum(),
        cols: cols.values().map(|&c| choose2(c)).sum(),
    })
}

/// Fraction of item pairs on which the labelings agree (together in both or
/// apart in both).
pub fn rand_index(a: &[usize], b: &[usize]) -> Result<f64, CompareError> {
    let c = contingency(a, b)?;
    let agree = c.n + 2.0 * c.cells - c.rows - c.cols;
    Ok(agree / c.n)
}

/// Rand index corrected for chance. Returns 1 when both labelings put every
/// item in one cluster (or every item alone), where the formula is 0/0.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64, CompareError> {
    let c = contingency(a, b)?;
    let expected = c.rows * c.cols / c.n;
    let max = 0.5 * (c.rows + c.cols);
    if max == expected {
        return Ok(1.0);
    }
    Ok((c.cells - expected) / (max - expected))
}

/// ARI against the ground truth over original (non-outlier) rows.
pub fn accuracy<T: Scalar>(a: &Assignment, d: &Dataset<T>) -> Result<f64, CompareError> {
    let truth = d.ground_truth().ok_or(CompareError::NoGroundTruth)?;
    let (x, y): (Vec<usize>, Vec<usize>) = truth
        .iter()
        .zip(a.labels())
        .filter_map(|(t, &l)| t.map(|t| (t, l)))
        .unzip();
    adjusted_rand_index(&x, &y)
}

/// Number of distinct clusters holding at least one original row of
/// `class`.
pub fn partition_signature<T: Scalar>(
    a: &Assignment,
    d: &Dataset<T>,
    class: &str,
) -> Result<usize, CompareError> {
    let truth = d.ground_truth().ok_or(CompareError::NoGroundTruth)?;
    let c = d
        .class_index(class)
        .ok_or_else(|| CompareError::UnknownClass(class.to_string()))?;
    let mut seen: Vec<usize> = truth
        .iter()
        .zip(a.labels())
        .filter(|(t, _)| **t == Some(c))
        .map(|(_, &l)| l)
        .collect();
    seen.sort_unstable();
    seen.dedup();
    Ok(seen.len())
}
