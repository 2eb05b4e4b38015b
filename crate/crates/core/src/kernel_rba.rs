//! Kernel robust bias-aware classifier.
//!
//! The score at a query point is
//!
//! ```text
//! f(x, y) = r(x) · (1/n) Σ_i A[i, y] · k(x_i, x)
//! ```
//!
//! with one coefficient per (source point, class) pair. With the label-delta
//! joint kernel this is the representer form `θ = (1/n) Σ_{i,y} A[i, y]·Φ(x_i, y)`
//! of the linear model, so only source samples are needed to train it.
//!
//! The training potential is
//!
//! ```text
//! F_K(A) = (1/n) Σ_i (1/r_i)·log Z(x_i) − (1/n²) Σ_i (G·A)[i, y_i] + (λ/n²)·Σ_y A_yᵀ G A_y
//! ```
//!
//! with gradient `(1/n²)·G·(P̂ − Y + 2λA)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::kernels::{gram_symmetric, KernelSpec};
use crate::linalg::Matrix;
use crate::optim::{minimize, Objective, TrainConfig};
use crate::potential::{SoftmaxPotential, Weighting};
use crate::predict::{check_ratio, check_ratios, softmax_checked, Predictor, Trained};
use crate::rba::check_lambda;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelRbaModel {
    pub kernel: KernelSpec,
    pub lambda: f64,
    /// n×K coefficients.
    pub alpha: Matrix,
    #[serde(rename = "support_X")]
    pub support_x: Matrix,
    pub support_ratios: Vec<f64>,
}

impl KernelRbaModel {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        check_lambda(self.lambda)?;
        if self.alpha.rows() != self.support_x.rows() {
            return invalid("alpha rows must align with support points");
        }
        if self.alpha.cols() < 2 {
            return invalid("alpha needs at least two class columns");
        }
        if !self.alpha.is_finite() {
            return invalid("alpha must be finite");
        }
        check_ratios(&self.support_ratios, self.support_x.rows())
    }

    pub fn support_len(&self) -> usize {
        self.support_x.rows()
    }

    /// Unscaled per-class scores `(1/n) Σ_i A[i, y]·k(x_i, x)`.
    pub(crate) fn raw_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        kernel_expansion(&self.kernel, &self.alpha, &self.support_x, x)
    }

    pub fn score(&self, x: &[f64], r: f64, y: usize) -> Result<f64> {
        check_ratio(r)?;
        if y >= self.alpha.cols() {
            return invalid(format!("class {y} outside 0..{}", self.alpha.cols()));
        }
        Ok(r * self.raw_scores(x)?[y])
    }

    pub fn predict(&self, x: &[f64], r: f64) -> Result<Vec<f64>> {
        check_ratio(r)?;
        let mut s = self.raw_scores(x)?;
        s.iter_mut().for_each(|v| *v *= r);
        softmax_checked(&mut s)?;
        Ok(s)
    }
}

/// `(1/n) Σ_i A[i, ·]·k(x_i, x)`, shared with the kernel baselines.
pub(crate) fn kernel_expansion(kernel: &KernelSpec, alpha: &Matrix, support: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != support.cols() {
        return invalid(format!("input has {} entries, model expects {}", x.len(), support.cols()));
    }
    let n = support.rows();
    let mut s = vec![0.0; alpha.cols()];
    for i in 0..n {
        let kv = kernel.eval_unchecked(support.row(i), x);
        if kv == 0.0 {
            continue;
        }
        for (acc, a) in s.iter_mut().zip(alpha.row(i)) {
            *acc += a * kv;
        }
    }
    let inv_n = 1.0 / n as f64;
    s.iter_mut().for_each(|v| *v *= inv_n);
    Ok(s)
}

impl Predictor for KernelRbaModel {
    fn class_count(&self) -> usize {
        self.alpha.cols()
    }

    fn input_dim(&self) -> usize {
        self.support_x.cols()
    }

    fn predict_proba(&self, x: &[f64], ratio: f64) -> Result<Vec<f64>> {
        self.predict(x, ratio)
    }
}

pub(crate) fn check_gram(gram: &Matrix, n: usize) -> Result<()> {
    if gram.rows() != n || gram.cols() != n {
        return invalid(format!("gram is {}x{}, expected {n}x{n}", gram.rows(), gram.cols()));
    }
    Ok(())
}

/// The training potential `F_K` over row-major `A`.
pub fn potential<'a>(gram: &'a Matrix, src: &'a Dataset, src_ratios: &'a [f64], lambda: f64) -> Result<SoftmaxPotential<'a>> {
    check_gram(gram, src.len())?;
    check_ratios(src_ratios, src.len())?;
    check_lambda(lambda)?;
    Ok(SoftmaxPotential::kernel(gram, src, Weighting::Robust(src_ratios), lambda))
}

/// Gradient of `F_K` at `model.alpha`, n×K.
pub fn gradient(model: &KernelRbaModel, src: &Dataset, gram_nn: &Matrix) -> Result<Matrix> {
    model.validate()?;
    if src.len() != model.support_len() || src.class_count() != model.alpha.cols() {
        return invalid("source sample does not match the model's support");
    }
    let f = potential(gram_nn, src, &model.support_ratios, model.lambda)?;
    let mut g = vec![0.0; f.dim()];
    let value = f.eval(model.alpha.as_slice(), &mut g);
    if !value.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure {
            iteration: 0,
            message: "non-finite kernel gradient".into(),
        });
    }
    Matrix::from_vec(src.len(), src.class_count(), g)
}

/// True when two support rows coincide, which makes the Gram matrix singular.
pub fn has_duplicate_rows(x: &Matrix) -> bool {
    (0..x.rows()).any(|i| ((i + 1)..x.rows()).any(|j| x.row(i) == x.row(j)))
}

/// Descent on `F_K` from `A = 0`. The Gram matrix is built once.
pub fn fit(
    src: &Dataset,
    src_ratios: &[f64],
    kernel: KernelSpec,
    lambda: f64,
    cfg: &TrainConfig,
) -> Result<Trained<KernelRbaModel>> {
    if src.len() < 2 {
        return invalid("kernel RBA needs at least two source points");
    }
    let gram = gram_symmetric(&kernel, src.features())?;
    let f = potential(&gram, src, src_ratios, lambda)?;
    let (alpha, info) = minimize(&f, vec![0.0; f.dim()], cfg)?;
    Ok(Trained {
        model: KernelRbaModel {
            kernel,
            lambda,
            alpha: Matrix::from_vec(src.len(), src.class_count(), alpha)?,
            support_x: src.features().clone(),
            support_ratios: src_ratios.to_vec(),
        },
        info,
    })
}
