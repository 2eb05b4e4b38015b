//! Target-side evaluation: logloss and entropy in bits, and accuracy.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::math::log2;

/// Floor applied to probabilities inside the logloss only.
pub const PROB_FLOOR: f64 = 1e-12;

const ROW_SUM_TOL: f64 = 1e-9;

/// Row-stochastic n×K matrix of conditional label probabilities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictionMatrix {
    probs: Matrix,
}

impl PredictionMatrix {
    pub fn new(probs: Matrix) -> Result<Self> {
        for (i, row) in probs.iter_rows().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return invalid(format!("row {i} has an entry outside [0, 1]"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return invalid(format!("row {i} sums to {s}"));
            }
        }
        Ok(PredictionMatrix { probs })
    }

    pub fn uniform(rows: usize, classes: usize) -> Self {
        let data = alloc::vec![1.0 / classes as f64; rows * classes];
        PredictionMatrix {
            probs: Matrix::from_vec(rows, classes, data).expect("shape"),
        }
    }

    pub fn probs(&self) -> &Matrix {
        &self.probs
    }

    pub fn rows(&self) -> usize {
        self.probs.rows()
    }

    pub fn class_count(&self) -> usize {
        self.probs.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.probs.row(i)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub logloss_bits: f64,
    pub entropy_bits: f64,
    pub accuracy: f64,
}

impl MetricReport {
    pub fn evaluate(preds: &PredictionMatrix, labels: &[usize]) -> Result<Self> {
        Ok(MetricReport {
            logloss_bits: logloss(preds, labels)?,
            entropy_bits: entropy(preds),
            accuracy: accuracy(preds, labels)?,
        })
    }
}

fn check_labels(preds: &PredictionMatrix, labels: &[usize]) -> Result<()> {
    if labels.is_empty() {
        return invalid("empty evaluation set");
    }
    if preds.rows() != labels.len() {
        return invalid(format!(
            "{} prediction rows for {} labels",
            preds.rows(),
            labels.len()
        ));
    }
    if labels.iter().any(|&y| y >= preds.class_count()) {
        return invalid("label outside prediction columns");
    }
    Ok(())
}

/// Per-row `−log₂ p[y]`, with p floored at [`PROB_FLOOR`].
pub fn row_logloss(preds: &PredictionMatrix, labels: &[usize]) -> Result<Vec<f64>> {
    check_labels(preds, labels)?;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -log2(preds.row(i)[y].max(PROB_FLOOR)))
        .collect())
}

pub fn logloss(preds: &PredictionMatrix, labels: &[usize]) -> Result<f64> {
    let rows = row_logloss(preds, labels)?;
    Ok(rows.iter().sum::<f64>() / rows.len() as f64)
}

/// Mean Shannon entropy of the rows, in bits.
pub fn entropy(preds: &PredictionMatrix) -> f64 {
    if preds.rows() == 0 {
        return 0.0;
    }
    let total: f64 = preds
        .probs
        .iter_rows()
        .map(|row| {
            row.iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| -p * log2(p))
                .sum::<f64>()
        })
        .sum();
    total / preds.rows() as f64
}

/// Index of the row maximum; ties go to the lowest class id.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &p) in row.iter().enumerate().skip(1) {
        if p > row[best] {
            best = j;
        }
    }
    best
}

pub fn accuracy(preds: &PredictionMatrix, labels: &[usize]) -> Result<f64> {
    check_labels(preds, labels)?;
    let hits = labels
        .iter()
        .enumerate()
        .filter(|&(i, &y)| argmax(preds.row(i)) == y)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}
