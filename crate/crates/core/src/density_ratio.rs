//! Density ratio `r(x) = P_src(x)/P_trg(x)` from a source-vs-target logistic
//! discriminator.
//!
//! By Bayes' rule `P_src(x)/P_trg(x) = [P(src|x)/P(trg|x)]·(n_trg/n_src)`, so
//! the ratio is the discriminator's odds corrected by the sample-size prior.
//! The result is clipped to `[r_min, r_max]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::math::{dot, exp, ln, sigmoid, softplus};
use crate::model_select::fold_partition;
use crate::optim::{minimize, Objective, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for ClipBounds {
    fn default() -> Self {
        ClipBounds { min: 1e-3, max: 1e3 }
    }
}

impl ClipBounds {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        let c = ClipBounds { min, max };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.max.is_finite() && self.min < self.max) {
            return invalid(format!(
                "clip bounds must satisfy 0 < min < max < inf, got ({}, {})",
                self.min, self.max
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        if v.is_nan() {
            return self.max;
        }
        v.clamp(self.min, self.max)
    }

    /// Importance weights `clip(1/r)`.
    pub fn inverse_weights(&self, ratios: &[f64]) -> Vec<f64> {
        ratios.iter().map(|&r| self.apply(1.0 / r)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityRatioModel {
    /// `[bias, w_1..w_d]` of the source-class log-odds.
    pub weights: Vec<f64>,
    /// `n_trg / n_src`.
    pub prior_ratio: f64,
    pub clip: ClipBounds,
}

impl DensityRatioModel {
    pub fn validate(&self) -> Result<()> {
        if self.weights.len() < 2 || self.weights.iter().any(|w| !w.is_finite()) {
            return invalid("discriminator weights must be finite with a bias and at least one input weight");
        }
        if !(self.prior_ratio > 0.0 && self.prior_ratio.is_finite()) {
            return invalid("prior_ratio must be positive");
        }
        self.clip.validate()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.len() - 1
    }

    /// Log-odds that `x` came from the source sample.
    pub fn discriminator_score(&self, x: &[f64]) -> f64 {
        self.weights[0] + dot(&self.weights[1..], x)
    }

    pub fn ratio(&self, x: &[f64]) -> f64 {
        let log_r = self.discriminator_score(x) + ln(self.prior_ratio);
        let lo = ln(self.clip.min);
        let hi = ln(self.clip.max);
        if log_r <= lo {
            self.clip.min
        } else if log_r >= hi {
            self.clip.max
        } else {
            self.clip.apply(exp(log_r))
        }
    }

    pub fn ratios(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.input_dim() {
            return invalid(format!("input has {} columns, ratio model expects {}", x.cols(), self.input_dim()));
        }
        Ok(x.iter_rows().map(|r| self.ratio(r)).collect())
    }
}

/// Mean logistic loss of source (label 1) vs target (label 0) plus `λ‖w‖²`
/// on the non-bias weights.
struct Discriminator<'a> {
    src: &'a Matrix,
    trg: &'a Matrix,
    lambda: f64,
}

impl Objective for Discriminator<'_> {
    fn dim(&self) -> usize {
        self.src.cols() + 1
    }

    fn eval(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let total = (self.src.rows() + self.trg.rows()) as f64;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for (x, is_src) in self
            .src
            .iter_rows()
            .map(|x| (x, true))
            .chain(self.trg.iter_rows().map(|x| (x, false)))
        {
            let s = w[0] + dot(&w[1..], x);
            let (l, resid) = if is_src {
                (softplus(-s), sigmoid(s) - 1.0)
            } else {
                (softplus(s), sigmoid(s))
            };
            loss += l;
            grad[0] += resid;
            for (g, v) in grad[1..].iter_mut().zip(x) {
                *g += resid * v;
            }
        }
        grad.iter_mut().for_each(|g| *g /= total);
        for (g, v) in grad[1..].iter_mut().zip(&w[1..]) {
            *g += 2.0 * self.lambda * v;
        }
        loss / total + self.lambda * dot(&w[1..], &w[1..])
    }
}

fn check_samples(src: &Matrix, trg: &Matrix) -> Result<()> {
    if src.rows() == 0 || trg.rows() == 0 {
        return invalid("source and target samples must be nonempty");
    }
    if src.cols() != trg.cols() || src.cols() == 0 {
        return invalid(format!("source has {} columns, target {}", src.cols(), trg.cols()));
    }
    Ok(())
}

/// Discriminator settings: gradient-norm tolerance 1e−6, at most 5000 iterations.
pub fn discriminator_config() -> TrainConfig {
    TrainConfig::default()
}

pub fn fit_ratio(src: &Matrix, trg: &Matrix, lambda: f64) -> Result<DensityRatioModel> {
    fit_ratio_with(src, trg, lambda, ClipBounds::default(), &discriminator_config())
}

pub fn fit_ratio_with(
    src: &Matrix,
    trg: &Matrix,
    lambda: f64,
    clip: ClipBounds,
    cfg: &TrainConfig,
) -> Result<DensityRatioModel> {
    check_samples(src, trg)?;
    clip.validate()?;
    crate::rba::check_lambda(lambda)?;
    let obj = Discriminator { src, trg, lambda };
    let (weights, _) = minimize(&obj, vec![0.0; obj.dim()], cfg)?;
    Ok(DensityRatioModel {
        weights,
        prior_ratio: trg.rows() as f64 / src.rows() as f64,
        clip,
    })
}

/// Held-out discrimination logloss (nats) of a fitted discriminator.
fn discrimination_loss(model: &DensityRatioModel, src: &Matrix, trg: &Matrix) -> f64 {
    let s: f64 = src.iter_rows().map(|x| softplus(-model.discriminator_score(x))).sum();
    let t: f64 = trg.iter_rows().map(|x| softplus(model.discriminator_score(x))).sum();
    (s + t) / (src.rows() + trg.rows()) as f64
}

/// Result of choosing the discriminator's regularization by cross-validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSelection {
    pub model: DensityRatioModel,
    pub lambda: f64,
    /// `(λ, mean held-out discrimination logloss)` per grid value.
    pub scores: Vec<(f64, f64)>,
}

/// Picks λ from `grid` by `folds`-fold CV on discrimination logloss (ties to
/// the larger λ), then refits on all data. Source and target are partitioned
/// separately so every fold holds both.
pub fn fit_ratio_cv(
    src: &Matrix,
    trg: &Matrix,
    grid: &[f64],
    folds: usize,
    seed: u64,
    clip: ClipBounds,
) -> Result<RatioSelection> {
    check_samples(src, trg)?;
    if grid.is_empty() {
        return invalid("empty lambda grid");
    }
    if folds < 2 || folds > src.rows() || folds > trg.rows() {
        return invalid(format!("cannot form {folds} folds from {} source / {} target rows", src.rows(), trg.rows()));
    }
    let src_folds = fold_partition(src.rows(), folds, seed)?;
    let trg_folds = fold_partition(trg.rows(), folds, seed.wrapping_add(1))?;
    let cfg = discriminator_config();
    let mut scores = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut total = 0.0;
        for f in 0..folds {
            let (s_train, s_val) = split(src, &src_folds, f);
            let (t_train, t_val) = split(trg, &trg_folds, f);
            let m = fit_ratio_with(&s_train, &t_train, lambda, clip, &cfg)?;
            total += discrimination_loss(&m, &s_val, &t_val);
        }
        scores.push((lambda, total / folds as f64));
    }
    let best = best_lambda(&scores).expect("nonempty grid");
    let model = fit_ratio_with(src, trg, best, clip, &cfg)?;
    Ok(RatioSelection {
        model,
        lambda: best,
        scores,
    })
}

pub(crate) fn best_lambda(scores: &[(f64, f64)]) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for &(lambda, s) in scores {
        if !s.is_finite() {
            continue;
        }
        best = match best {
            None => Some((lambda, s)),
            Some((bl, bs)) if s < bs || (s == bs && lambda > bl) => Some((lambda, s)),
            keep => keep,
        };
    }
    best.map(|(l, _)| l)
}

fn split(x: &Matrix, folds: &[Vec<usize>], held: usize) -> (Matrix, Matrix) {
    let train: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|&(f, _)| f != held)
        .flat_map(|(_, idx)| idx.iter().copied())
        .collect();
    (x.select_rows(&train), x.select_rows(&folds[held]))
}
