//! Comparison estimators: (kernel) logistic regression, which ignores the
//! shift, and (kernel) importance weighting, which reweights each source
//! log-likelihood term by `w_i = clip(1/r_i)`. Neither puts the density ratio
//! in the prediction's exponent.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureMap};
use crate::density_ratio::ClipBounds;
use crate::error::{invalid, Result};
use crate::kernel_rba::{check_gram, kernel_expansion};
use crate::kernels::{gram_symmetric, KernelSpec};
use crate::linalg::Matrix;
use crate::optim::{minimize, Objective, TrainConfig};
use crate::potential::{SoftmaxPotential, Weighting as LossWeighting};
use crate::predict::{check_ratios, softmax_checked, Predictor, Trained};
use crate::rba::check_lambda;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    None,
    Importance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum BaselineParams {
    Linear {
        feature_map: FeatureMap,
        theta: Vec<f64>,
    },
    Kernel {
        kernel: KernelSpec,
        alpha: Matrix,
        #[serde(rename = "support_X")]
        support_x: Matrix,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub params: BaselineParams,
    pub lambda: f64,
    pub weighting: Weighting,
}

impl BaselineModel {
    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        match &self.params {
            BaselineParams::Linear { feature_map, theta } => {
                if theta.len() != feature_map.dim() || theta.iter().any(|t| !t.is_finite()) {
                    return invalid("theta must be finite and match the feature map");
                }
            }
            BaselineParams::Kernel {
                kernel,
                alpha,
                support_x,
            } => {
                kernel.validate()?;
                if alpha.rows() != support_x.rows() || alpha.cols() < 2 || !alpha.is_finite() {
                    return invalid("alpha must be finite, n×K with K >= 2, aligned with support");
                }
            }
        }
        Ok(())
    }

    /// Softmax of the unscaled scores; no density ratio involved.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut s = match &self.params {
            BaselineParams::Linear { feature_map, theta } => {
                if x.len() != feature_map.input_dim {
                    return invalid(format!(
                        "input has {} entries, model expects {}",
                        x.len(),
                        feature_map.input_dim
                    ));
                }
                (0..feature_map.class_count)
                    .map(|y| feature_map.score(theta, x, y))
                    .collect()
            }
            BaselineParams::Kernel {
                kernel,
                alpha,
                support_x,
            } => kernel_expansion(kernel, alpha, support_x, x)?,
        };
        softmax_checked(&mut s)?;
        Ok(s)
    }
}

impl Predictor for BaselineModel {
    fn class_count(&self) -> usize {
        match &self.params {
            BaselineParams::Linear { feature_map, .. } => feature_map.class_count,
            BaselineParams::Kernel { alpha, .. } => alpha.cols(),
        }
    }

    fn input_dim(&self) -> usize {
        match &self.params {
            BaselineParams::Linear { feature_map, .. } => feature_map.input_dim,
            BaselineParams::Kernel { support_x, .. } => support_x.cols(),
        }
    }

    fn predict_proba(&self, x: &[f64], _ratio: f64) -> Result<Vec<f64>> {
        self.predict(x)
    }
}

/// `clip(1/r_i)` for each source ratio.
pub fn importance_weights(src_ratios: &[f64], clip: &ClipBounds) -> Result<Vec<f64>> {
    clip.validate()?;
    check_ratios(src_ratios, src_ratios.len())?;
    Ok(clip.inverse_weights(src_ratios))
}

fn check_weights(weights: Option<&[f64]>, n: usize) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != n {
            return invalid(format!("{} weights for {n} samples", w.len()));
        }
        if w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return invalid("weights must be positive and finite");
        }
    }
    Ok(())
}

/// `(1/n) Σ w_i·(−log P_θ(y_i|x_i)) + λ‖θ‖²` over `θ`.
pub fn linear_potential<'a>(
    fm: FeatureMap,
    src: &'a Dataset,
    weights: Option<&'a [f64]>,
    lambda: f64,
) -> Result<SoftmaxPotential<'a>> {
    if fm.input_dim != src.dim() || fm.class_count != src.class_count() {
        return invalid("feature map does not match the dataset");
    }
    check_weights(weights, src.len())?;
    check_lambda(lambda)?;
    Ok(SoftmaxPotential::linear(fm, src, LossWeighting::Weighted(weights), lambda))
}

/// Kernel form of [`linear_potential`] over row-major `A` (n×K).
pub fn kernel_potential<'a>(
    gram: &'a Matrix,
    src: &'a Dataset,
    weights: Option<&'a [f64]>,
    lambda: f64,
) -> Result<SoftmaxPotential<'a>> {
    check_gram(gram, src.len())?;
    check_weights(weights, src.len())?;
    check_lambda(lambda)?;
    Ok(SoftmaxPotential::kernel(gram, src, LossWeighting::Weighted(weights), lambda))
}

fn fit_linear(src: &Dataset, weights: Option<&[f64]>, lambda: f64, cfg: &TrainConfig) -> Result<Trained<BaselineModel>> {
    let fm = FeatureMap::for_dataset(src, true);
    let f = linear_potential(fm, src, weights, lambda)?;
    let (theta, info) = minimize(&f, vec![0.0; f.dim()], cfg)?;
    Ok(Trained {
        model: BaselineModel {
            params: BaselineParams::Linear {
                feature_map: fm,
                theta,
            },
            lambda,
            weighting: if weights.is_some() {
                Weighting::Importance
            } else {
                Weighting::None
            },
        },
        info,
    })
}

fn fit_kernel(
    src: &Dataset,
    weights: Option<&[f64]>,
    kernel: KernelSpec,
    lambda: f64,
    cfg: &TrainConfig,
) -> Result<Trained<BaselineModel>> {
    if src.len() < 2 {
        return invalid("kernel baselines need at least two source points");
    }
    let gram = gram_symmetric(&kernel, src.features())?;
    let f = kernel_potential(&gram, src, weights, lambda)?;
    let (alpha, info) = minimize(&f, vec![0.0; f.dim()], cfg)?;
    Ok(Trained {
        model: BaselineModel {
            params: BaselineParams::Kernel {
                kernel,
                alpha: Matrix::from_vec(src.len(), src.class_count(), alpha)?,
                support_x: src.features().clone(),
            },
            lambda,
            weighting: if weights.is_some() {
                Weighting::Importance
            } else {
                Weighting::None
            },
        },
        info,
    })
}

/// Logistic regression on the source sample.
pub fn lr_fit(src: &Dataset, lambda: f64, cfg: &TrainConfig) -> Result<Trained<BaselineModel>> {
    fit_linear(src, None, lambda, cfg)
}

/// Importance-weighted logistic regression.
pub fn iw_fit(
    src: &Dataset,
    src_ratios: &[f64],
    clip: &ClipBounds,
    lambda: f64,
    cfg: &TrainConfig,
) -> Result<Trained<BaselineModel>> {
    if src_ratios.len() != src.len() {
        return invalid("ratios must align with source rows");
    }
    let w = importance_weights(src_ratios, clip)?;
    fit_linear(src, Some(&w), lambda, cfg)
}

pub fn klr_fit(src: &Dataset, kernel: KernelSpec, lambda: f64, cfg: &TrainConfig) -> Result<Trained<BaselineModel>> {
    fit_kernel(src, None, kernel, lambda, cfg)
}

pub fn kiw_fit(
    src: &Dataset,
    src_ratios: &[f64],
    clip: &ClipBounds,
    kernel: KernelSpec,
    lambda: f64,
    cfg: &TrainConfig,
) -> Result<Trained<BaselineModel>> {
    if src_ratios.len() != src.len() {
        return invalid("ratios must align with source rows");
    }
    let w = importance_weights(src_ratios, clip)?;
    fit_kernel(src, Some(&w), kernel, lambda, cfg)
}
