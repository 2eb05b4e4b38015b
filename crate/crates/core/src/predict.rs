//! Common prediction interface over every fitted estimator.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::metrics::PredictionMatrix;
use crate::optim::FitInfo;

/// A fitted conditional label model. `ratio` is the density ratio
/// `P_src(x)/P_trg(x)` at `x`; estimators that do not use it ignore it.
pub trait Predictor {
    fn class_count(&self) -> usize;

    fn input_dim(&self) -> usize;

    fn predict_proba(&self, x: &[f64], ratio: f64) -> Result<Vec<f64>>;

    fn predict_batch(&self, x: &Matrix, ratios: &[f64]) -> Result<PredictionMatrix> {
        if x.rows() != ratios.len() {
            return invalid(format!("{} rows but {} ratios", x.rows(), ratios.len()));
        }
        let k = self.class_count();
        let mut out = Matrix::zeros(x.rows(), k);
        for (i, &r) in ratios.iter().enumerate() {
            let p = self.predict_proba(x.row(i), r)?;
            out.row_mut(i).copy_from_slice(&p);
        }
        PredictionMatrix::new(out)
    }
}

/// A fitted model together with its optimizer diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Trained<M> {
    pub model: M,
    pub info: FitInfo,
}

pub(crate) fn check_ratio(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        invalid(format!("density ratio must be positive and finite, got {r}"))
    }
}

pub(crate) fn check_ratios(ratios: &[f64], n: usize) -> Result<()> {
    if ratios.len() != n {
        return invalid(format!("{} ratios for {n} samples", ratios.len()));
    }
    ratios.iter().try_for_each(|&r| check_ratio(r))
}

/// Softmax of `scores` in place; errors if any score is not finite.
pub(crate) fn softmax_checked(scores: &mut [f64]) -> Result<()> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NumericalFailure {
            iteration: 0,
            message: "non-finite score in prediction".into(),
        });
    }
    crate::math::softmax_in_place(scores);
    Ok(())
}
