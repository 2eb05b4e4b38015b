//! Labelled samples and the class-indexed joint feature map.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::Matrix;

/// Feature matrix with integer labels in `0..class_count`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    class_count: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if class_count < 2 {
            return invalid(format!("class_count must be at least 2, got {class_count}"));
        }
        if features.rows() == 0 || features.cols() == 0 {
            return invalid("dataset needs at least one row and one column");
        }
        if labels.len() != features.rows() {
            return invalid(format!(
                "{} labels for {} rows",
                labels.len(),
                features.rows()
            ));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= class_count) {
            return invalid(format!("label {bad} outside 0..{class_count}"));
        }
        if let Some(pos) = features.as_slice().iter().position(|v| !v.is_finite()) {
            return invalid(format!(
                "non-finite feature at row {} column {}",
                pos / features.cols(),
                pos % features.cols()
            ));
        }
        Ok(Dataset {
            features,
            labels,
            class_count,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Rows at `idx`, in that order. Indices must be in range.
    pub fn subset(&self, idx: &[usize]) -> Result<Dataset> {
        if idx.is_empty() {
            return invalid("empty subset");
        }
        if let Some(bad) = idx.iter().find(|&&i| i >= self.len()) {
            return invalid(format!("row index {bad} out of range"));
        }
        Ok(Dataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        })
    }

    /// n×K one-hot label indicator.
    pub fn one_hot(&self) -> Matrix {
        let mut m = Matrix::zeros(self.len(), self.class_count);
        for (i, &y) in self.labels.iter().enumerate() {
            m.set(i, y, 1.0);
        }
        m
    }
}

/// Joint feature map Φ(x, y): block `y` holds `[1; x]` (or `x` without bias),
/// every other block is zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub input_dim: usize,
    pub class_count: usize,
    pub include_bias: bool,
}

impl FeatureMap {
    pub fn new(input_dim: usize, class_count: usize, include_bias: bool) -> Result<Self> {
        if input_dim == 0 || class_count < 2 {
            return invalid("feature map needs input_dim >= 1 and class_count >= 2");
        }
        Ok(FeatureMap {
            input_dim,
            class_count,
            include_bias,
        })
    }

    pub fn for_dataset(data: &Dataset, include_bias: bool) -> Self {
        FeatureMap {
            input_dim: data.dim(),
            class_count: data.class_count(),
            include_bias,
        }
    }

    /// Width of a single class block.
    #[inline]
    pub fn block_dim(&self) -> usize {
        self.input_dim + usize::from(self.include_bias)
    }

    /// Output dimension `K·(d + bias)`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.class_count * self.block_dim()
    }

    fn check(&self, x: &[f64], y: usize) -> Result<()> {
        if x.len() != self.input_dim {
            return invalid(format!(
                "input has {} entries, feature map expects {}",
                x.len(),
                self.input_dim
            ));
        }
        if y >= self.class_count {
            return invalid(format!("class {y} outside 0..{}", self.class_count));
        }
        Ok(())
    }

    pub fn map(&self, x: &[f64], y: usize) -> Result<Vec<f64>> {
        self.check(x, y)?;
        let mut out = vec![0.0; self.dim()];
        self.accumulate(&mut out, x, y, 1.0);
        Ok(out)
    }

    /// `θ · Φ(x, y)` without materialising Φ.
    #[inline]
    pub fn score(&self, theta: &[f64], x: &[f64], y: usize) -> f64 {
        let block = &theta[y * self.block_dim()..(y + 1) * self.block_dim()];
        if self.include_bias {
            block[0] + crate::math::dot(&block[1..], x)
        } else {
            crate::math::dot(block, x)
        }
    }

    /// `out += coef · Φ(x, y)`.
    #[inline]
    pub fn accumulate(&self, out: &mut [f64], x: &[f64], y: usize, coef: f64) {
        let b = self.block_dim();
        let block = &mut out[y * b..(y + 1) * b];
        let tail = if self.include_bias {
            block[0] += coef;
            &mut block[1..]
        } else {
            block
        };
        for (o, v) in tail.iter_mut().zip(x) {
            *o += coef * v;
        }
    }

    /// Squared norm of Φ(x, y), identical for every y.
    pub fn sq_norm(&self, x: &[f64]) -> f64 {
        crate::math::dot(x, x) + if self.include_bias { 1.0 } else { 0.0 }
    }
}
