//! Positive-definite kernels on the input space and their label-delta lifting
//! to (input, label) pairs.

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::math::{dot, exp, powi, sq_dist};

/// Declarative kernel description, serialized as `{"kind": ..., ...}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    /// `(x·x' + offset)^degree`
    Polynomial {
        degree: u32,
        #[serde(default = "default_offset")]
        offset: f64,
    },
    /// `exp(−‖x − x'‖² / (2·bandwidth²))`
    Gaussian { bandwidth: f64 },
}

fn default_offset() -> f64 {
    1.0
}

impl KernelSpec {
    pub fn polynomial(degree: u32) -> Self {
        KernelSpec::Polynomial {
            degree,
            offset: 1.0,
        }
    }

    pub fn gaussian(bandwidth: f64) -> Self {
        KernelSpec::Gaussian { bandwidth }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { degree, offset } => {
                if degree < 1 {
                    return invalid("polynomial degree must be >= 1");
                }
                if !(offset >= 0.0 && offset.is_finite()) {
                    return invalid(format!("polynomial offset must be finite and >= 0, got {offset}"));
                }
                Ok(())
            }
            KernelSpec::Gaussian { bandwidth } => {
                if !(bandwidth > 0.0 && bandwidth.is_finite()) {
                    return invalid(format!("gaussian bandwidth must be > 0, got {bandwidth}"));
                }
                Ok(())
            }
        }
    }

    /// Evaluates without dimension checks.
    #[inline]
    pub fn eval_unchecked(&self, x: &[f64], xp: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(x, xp),
            KernelSpec::Polynomial { degree, offset } => powi(dot(x, xp) + offset, degree),
            KernelSpec::Gaussian { bandwidth } => {
                exp(-sq_dist(x, xp) / (2.0 * bandwidth * bandwidth))
            }
        }
    }

    pub fn eval(&self, x: &[f64], xp: &[f64]) -> Result<f64> {
        if x.len() != xp.len() {
            return invalid(format!(
                "kernel inputs differ in length: {} vs {}",
                x.len(),
                xp.len()
            ));
        }
        Ok(self.eval_unchecked(x, xp))
    }
}

/// Gram matrix `G[i, j] = k(a_i, b_j)`.
pub fn gram(spec: &KernelSpec, a: &Matrix, b: &Matrix) -> Result<Matrix> {
    spec.validate()?;
    if a.cols() != b.cols() {
        return invalid(format!(
            "gram inputs differ in width: {} vs {}",
            a.cols(),
            b.cols()
        ));
    }
    let mut out = Matrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        let xi = a.row(i);
        let row = out.row_mut(i);
        for (j, g) in row.iter_mut().enumerate() {
            *g = spec.eval_unchecked(xi, b.row(j));
        }
    }
    Ok(out)
}

/// Symmetric Gram matrix of a single sample; fills the lower triangle by mirroring.
pub fn gram_symmetric(spec: &KernelSpec, a: &Matrix) -> Result<Matrix> {
    spec.validate()?;
    let n = a.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = spec.eval_unchecked(a.row(i), a.row(j));
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    Ok(out)
}

/// Label-delta lifting `δ(y, y') · k(x, x')`.
pub fn joint_kernel(spec: &KernelSpec, x: &[f64], y: usize, xp: &[f64], yp: usize) -> Result<f64> {
    let k = spec.eval(x, xp)?;
    Ok(if y == yp { k } else { 0.0 })
}
