//! Linear robust bias-aware classifier.
//!
//! Predictions are `P(y|x) ∝ exp(r(x)·θ·Φ(x, y))`, where `r(x)` is the
//! source/target density ratio. Far from the source sample `r(x)` is small and
//! the prediction falls back towards uniform.
//!
//! Training minimizes the source-sample potential
//!
//! ```text
//! F(θ) = (1/n) Σ_i (1/r_i)·log Z(x_i) − θ·c̃ + λ‖θ‖²
//! ```
//!
//! whose gradient `(1/n) Σ_i E_{P̂(y|x_i)}[Φ(x_i, y)] − c̃ + 2λθ` is the
//! feature-expectation mismatch on the source sample.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureMap};
use crate::error::{invalid, Result};
use crate::optim::{minimize, Objective, TrainConfig};
use crate::potential::{SoftmaxPotential, Weighting};
use crate::predict::{check_ratio, check_ratios, softmax_checked, Predictor, Trained};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearRbaModel {
    pub feature_map: FeatureMap,
    pub theta: Vec<f64>,
    pub lambda: f64,
}

impl LinearRbaModel {
    pub fn new(feature_map: FeatureMap, theta: Vec<f64>, lambda: f64) -> Result<Self> {
        let model = LinearRbaModel {
            feature_map,
            theta,
            lambda,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn zeros(feature_map: FeatureMap, lambda: f64) -> Self {
        LinearRbaModel {
            theta: vec![0.0; feature_map.dim()],
            feature_map,
            lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.len() != self.feature_map.dim() {
            return invalid(format!(
                "theta has {} entries, feature map needs {}",
                self.theta.len(),
                self.feature_map.dim()
            ));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return invalid("theta must be finite");
        }
        check_lambda(self.lambda)
    }

    /// `P̂(·|x)` with the exponent scaled by the density ratio `r`.
    pub fn predict(&self, x: &[f64], r: f64) -> Result<Vec<f64>> {
        check_ratio(r)?;
        let fm = &self.feature_map;
        if x.len() != fm.input_dim {
            return invalid(format!("input has {} entries, model expects {}", x.len(), fm.input_dim));
        }
        let mut scores: Vec<f64> = (0..fm.class_count)
            .map(|y| r * fm.score(&self.theta, x, y))
            .collect();
        softmax_checked(&mut scores)?;
        Ok(scores)
    }
}

impl Predictor for LinearRbaModel {
    fn class_count(&self) -> usize {
        self.feature_map.class_count
    }

    fn input_dim(&self) -> usize {
        self.feature_map.input_dim
    }

    fn predict_proba(&self, x: &[f64], ratio: f64) -> Result<Vec<f64>> {
        self.predict(x, ratio)
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        invalid(format!("lambda must be finite and >= 0, got {lambda}"))
    }
}

fn check_map(fm: &FeatureMap, src: &Dataset) -> Result<()> {
    if fm.input_dim != src.dim() || fm.class_count != src.class_count() {
        return invalid("feature map does not match the dataset");
    }
    Ok(())
}

/// The training potential `F` over `θ` on a source sample.
pub fn potential<'a>(
    fm: FeatureMap,
    src: &'a Dataset,
    src_ratios: &'a [f64],
    lambda: f64,
) -> Result<SoftmaxPotential<'a>> {
    check_map(&fm, src)?;
    check_ratios(src_ratios, src.len())?;
    check_lambda(lambda)?;
    Ok(SoftmaxPotential::linear(fm, src, Weighting::Robust(src_ratios), lambda))
}

/// Source-sample gradient of the expected target logloss at `model.theta`.
pub fn gradient(model: &LinearRbaModel, src: &Dataset, src_ratios: &[f64]) -> Result<Vec<f64>> {
    model.validate()?;
    let f = potential(model.feature_map, src, src_ratios, model.lambda)?;
    let mut g = vec![0.0; f.dim()];
    let value = f.eval(&model.theta, &mut g);
    if !value.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(crate::Error::NumericalFailure {
            iteration: 0,
            message: "non-finite gradient".into(),
        });
    }
    Ok(g)
}

/// Fits with a biased feature map.
pub fn fit(src: &Dataset, src_ratios: &[f64], lambda: f64, cfg: &TrainConfig) -> Result<Trained<LinearRbaModel>> {
    fit_with_map(FeatureMap::for_dataset(src, true), src, src_ratios, lambda, cfg)
}

/// Gradient descent on `F` from `θ = 0`.
pub fn fit_with_map(
    fm: FeatureMap,
    src: &Dataset,
    src_ratios: &[f64],
    lambda: f64,
    cfg: &TrainConfig,
) -> Result<Trained<LinearRbaModel>> {
    let f = potential(fm, src, src_ratios, lambda)?;
    let (theta, info) = minimize(&f, vec![0.0; fm.dim()], cfg)?;
    Ok(Trained {
        model: LinearRbaModel {
            feature_map: fm,
            theta,
            lambda,
        },
        info,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::norm2;
    use crate::optim::numerical_gradient;
    use crate::testutil::*;

    fn fm(d: usize, k: usize) -> FeatureMap {
        FeatureMap::new(d, k, true).unwrap()
    }

    #[test]
    fn zero_theta_is_uniform() {
        let m = LinearRbaModel::zeros(fm(2, 3), 0.0);
        let p = m.predict(&[1.0, -4.0], 2.5).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn logistic_identity() {
        // bias-off, d = 1: score difference = θ₁·x − θ₀·x
        let m = LinearRbaModel::new(FeatureMap::new(1, 2, false).unwrap(), vec![0.0, libm::log(3.0)], 0.0).unwrap();
        let p = m.predict(&[1.0], 1.0).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-12 && (p[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn tiny_ratio_is_near_uniform() {
        let theta = random_params(3, fm(2, 3).dim(), 2.0);
        let m = LinearRbaModel::new(fm(2, 3), theta, 0.0).unwrap();
        let p = m.predict(&[1.5, -0.5], 1e-3).unwrap();
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-2));
    }

    #[test]
    fn bad_ratio_rejected() {
        let m = LinearRbaModel::zeros(fm(1, 2), 0.0);
        assert!(m.predict(&[0.0], 0.0).is_err());
        assert!(m.predict(&[0.0], f64::INFINITY).is_err());
        assert!(m.predict(&[0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn gradient_at_zero_is_uniform_expectation_minus_empirical() {
        let src = labelled_blobs(1, 30, 2, 3);
        let ratios = random_ratios(2, 30);
        let map = fm(2, 3);
        let g = gradient(&LinearRbaModel::zeros(map, 0.0), &src, &ratios).unwrap();
        let n = src.len() as f64;
        let mut expected = vec![0.0; map.dim()];
        for i in 0..src.len() {
            for y in 0..3 {
                map.accumulate(&mut expected, src.x(i), y, 1.0 / (3.0 * n));
            }
            map.accumulate(&mut expected, src.x(i), src.labels()[i], -1.0 / n);
        }
        assert!(max_rel_err(&g, &expected, 1e-6) < 1e-10);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let src = labelled_blobs(4, 40, 3, 3);
        let ratios = random_ratios(5, 40);
        let map = fm(3, 3);
        let f = potential(map, &src, &ratios, 0.05).unwrap();
        for s in 0..20 {
            let theta = random_params(100 + s, map.dim(), 1.0);
            let mut g = vec![0.0; map.dim()];
            f.eval(&theta, &mut g);
            let num = numerical_gradient(&f, &theta, 1e-5);
            assert!(max_rel_err(&g, &num, 1e-6) <= 1e-5);
        }
    }

    #[test]
    fn potential_is_convex_along_midpoints() {
        let src = labelled_blobs(6, 25, 2, 2);
        let ratios = random_ratios(7, 25);
        let f = potential(fm(2, 2), &src, &ratios, 0.01).unwrap();
        for s in 0..20 {
            let a = random_params(200 + s, 6, 3.0);
            let b = random_params(300 + s, 6, 3.0);
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            assert!(f.value(&mid) <= 0.5 * (f.value(&a) + f.value(&b)) + 1e-9);
        }
    }

    #[test]
    fn fit_reaches_feature_matching() {
        let src = labelled_blobs(8, 60, 2, 3);
        let ratios = random_ratios(9, 60);
        let lambda = 0.01;
        let cfg = TrainConfig::default();
        let fit = fit(&src, &ratios, lambda, &cfg).unwrap();
        assert!(fit.info.converged, "{:?}", fit.info);
        let g = gradient(&fit.model, &src, &ratios).unwrap();
        assert!(norm2(&g) <= cfg.grad_tol);

        // (1/n) Σ E_P̂[Φ] = c̃ − 2λθ
        let map = fit.model.feature_map;
        let n = src.len() as f64;
        let mut lhs = vec![0.0; map.dim()];
        let mut rhs = vec![0.0; map.dim()];
        for i in 0..src.len() {
            let p = fit.model.predict(src.x(i), ratios[i]).unwrap();
            for (y, pv) in p.iter().enumerate() {
                map.accumulate(&mut lhs, src.x(i), y, pv / n);
            }
            map.accumulate(&mut rhs, src.x(i), src.labels()[i], 1.0 / n);
        }
        for (r, t) in rhs.iter_mut().zip(&fit.model.theta) {
            *r -= 2.0 * lambda * t;
        }
        let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        assert!(norm2(&diff) <= cfg.grad_tol);
    }

    #[test]
    fn huge_lambda_gives_uniform_predictions() {
        let src = labelled_blobs(10, 40, 2, 2);
        let ratios = vec![1.0; 40];
        let fit = fit(&src, &ratios, 1e8, &TrainConfig::default()).unwrap();
        assert!(norm2(&fit.model.theta) < 1e-7);
        let p = fit.model.predict(src.x(0), 1.0).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn uniform_limit_bound_holds() {
        let src = labelled_blobs(11, 50, 2, 3);
        let ratios = random_ratios(12, 50);
        let model = fit(&src, &ratios, 0.01, &TrainConfig::default()).unwrap().model;
        let rmin = 1e-3;
        let map = model.feature_map;
        let tnorm = norm2(&model.theta);
        for i in 0..src.len() {
            let x = src.x(i);
            let bound = 3.0 * rmin * tnorm * libm::sqrt(map.sq_norm(x));
            let p = model.predict(x, rmin).unwrap();
            assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() <= bound));
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let src = labelled_blobs(13, 40, 2, 2);
        let ratios = random_ratios(14, 40);
        let a = fit(&src, &ratios, 0.1, &TrainConfig::default()).unwrap();
        let b = fit(&src, &ratios, 0.1, &TrainConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
