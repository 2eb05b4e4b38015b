//! Gradient descent with Armijo backtracking.
//!
//! Each iteration proposes a Barzilai-Borwein step length (the configured
//! learning rate on the first iteration) and halves it until the Armijo
//! sufficient-decrease condition holds against the largest of the last
//! [`NONMONOTONE_WINDOW`] objective values. The objective may supply a descent
//! direction other than the negative gradient; the Armijo test always uses
//! the true gradient.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::{dot, norm2};

use alloc::boxed::Box;
use alloc::collections::VecDeque;

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
pub const NONMONOTONE_WINDOW: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Initial trial step length.
    pub learning_rate: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1.0,
            max_iters: 5000,
            grad_tol: 1e-6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return invalid("learning_rate must be positive");
        }
        if self.max_iters == 0 {
            return invalid("max_iters must be positive");
        }
        if !(self.grad_tol > 0.0) {
            return invalid("grad_tol must be positive");
        }
        Ok(())
    }
}

/// Outcome of a descent run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    pub objective: f64,
}

pub trait Objective {
    fn dim(&self) -> usize;

    /// Writes the gradient at `params` into `grad` and returns the value.
    fn eval(&self, params: &[f64], grad: &mut [f64]) -> f64;

    fn value(&self, params: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.eval(params, &mut g)
    }

    /// Search direction at `params`. Must satisfy `⟨grad, dir⟩ < 0` unless the
    /// gradient vanishes; otherwise the optimizer falls back to `−grad`.
    fn direction(&self, _params: &[f64], grad: &[f64], dir: &mut [f64]) {
        for (d, g) in dir.iter_mut().zip(grad) {
            *d = -g;
        }
    }

    /// `t ↦ f(params + t·dir)`. Objectives whose value is cheap to update along
    /// a line override this.
    fn line<'s>(&'s self, params: &[f64], dir: &[f64]) -> Box<dyn FnMut(f64) -> f64 + 's> {
        let p = params.to_vec();
        let d = dir.to_vec();
        let mut buf = vec![0.0; p.len()];
        Box::new(move |t| {
            for i in 0..p.len() {
                buf[i] = p[i] + t * d[i];
            }
            self.value(&buf)
        })
    }
}

pub fn minimize<O: Objective + ?Sized>(
    obj: &O,
    start: Vec<f64>,
    cfg: &TrainConfig,
) -> Result<(Vec<f64>, FitInfo)> {
    cfg.validate()?;
    let n = obj.dim();
    if start.len() != n {
        return invalid(format!("start point has {} entries, objective expects {n}", start.len()));
    }
    let mut x = start;
    let mut g = vec![0.0; n];
    let mut f = obj.eval(&x, &mut g);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure {
            iteration: 0,
            message: "non-finite objective at the starting point".into(),
        });
    }

    let mut dir = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut step = cfg.learning_rate;
    let mut info = FitInfo::default();
    let mut history: VecDeque<f64> = VecDeque::with_capacity(NONMONOTONE_WINDOW);

    for it in 0..cfg.max_iters {
        let gnorm = norm2(&g);
        info.iterations = it;
        info.grad_norm = gnorm;
        info.objective = f;
        if gnorm <= cfg.grad_tol {
            info.converged = true;
            return Ok((x, info));
        }
        if history.len() == NONMONOTONE_WINDOW {
            history.pop_front();
        }
        history.push_back(f);
        let f_ref = history.iter().copied().fold(f, f64::max);

        obj.direction(&x, &g, &mut dir);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) || !slope.is_finite() {
            for (d, gi) in dir.iter_mut().zip(&g) {
                *d = -gi;
            }
            slope = -gnorm * gnorm;
        }

        if let Some((px, pd)) = &prev {
            // BB1 step in the geometry of the chosen direction.
            let mut ss = 0.0;
            let mut sy = 0.0;
            for i in 0..n {
                let s = x[i] - px[i];
                let y = pd[i] - dir[i];
                ss += s * s;
                sy += s * y;
            }
            if sy > 0.0 && ss > 0.0 {
                step = (ss / sy).clamp(1e-12, 1e12);
            } else {
                step = (step * 2.0).min(1e12);
            }
        }

        let mut accepted = false;
        let mut f_trial = f64::NAN;
        {
            let mut phi = obj.line(&x, &dir);
            for _ in 0..MAX_HALVINGS {
                f_trial = phi(step);
                if f_trial.is_finite() && f_trial <= f_ref + ARMIJO_C * step * slope {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
        }
        if !accepted {
            if !f_trial.is_finite() {
                return Err(Error::NumericalFailure {
                    iteration: it,
                    message: "objective became non-finite during line search".into(),
                });
            }
            // No representable decrease left along this direction.
            return Ok((x, info));
        }

        for i in 0..n {
            trial[i] = x[i] + step * dir[i];
        }
        let f_new = obj.eval(&trial, &mut g);
        if !f_new.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure {
                iteration: it,
                message: "non-finite objective or gradient".into(),
            });
        }
        prev = Some((x.clone(), dir.clone()));
        core::mem::swap(&mut x, &mut trial);
        f = f_new;
    }

    info.iterations = cfg.max_iters;
    info.grad_norm = norm2(&g);
    info.objective = f;
    info.converged = info.grad_norm <= cfg.grad_tol;
    Ok((x, info))
}

/// Central-difference gradient, used by tests to check analytic gradients.
pub fn numerical_gradient<O: Objective + ?Sized>(obj: &O, params: &[f64], h: f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let fp = obj.value(&p);
            p[i] = orig - h;
            let fm = obj.value(&p);
            p[i] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// f(x) = ½ Σ c_i (x_i − t_i)²
    struct Quadratic {
        c: Vec<f64>,
        t: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            self.c.len()
        }
        fn eval(&self, p: &[f64], g: &mut [f64]) -> f64 {
            let mut f = 0.0;
            for i in 0..p.len() {
                let d = p[i] - self.t[i];
                g[i] = self.c[i] * d;
                f += 0.5 * self.c[i] * d * d;
            }
            f
        }
    }

    struct Blowup;

    impl Objective for Blowup {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, _p: &[f64], g: &mut [f64]) -> f64 {
            g[0] = f64::NAN;
            f64::NAN
        }
    }

    #[test]
    fn converges_on_ill_conditioned_quadratic() {
        let q = Quadratic {
            c: vec![1.0, 100.0, 1e-2],
            t: vec![1.0, -2.0, 3.0],
        };
        let cfg = TrainConfig {
            grad_tol: 1e-10,
            ..TrainConfig::default()
        };
        let (x, info) = minimize(&q, vec![0.0; 3], &cfg).unwrap();
        assert!(info.converged, "{info:?}");
        for (a, b) in x.iter().zip(&q.t) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn non_finite_start_is_numerical_failure() {
        let err = minimize(&Blowup, vec![0.0], &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NumericalFailure { iteration: 0, .. }));
    }

    #[test]
    fn numerical_gradient_matches_quadratic() {
        let q = Quadratic {
            c: vec![2.0, 3.0],
            t: vec![0.5, -1.0],
        };
        let p = [0.3, 0.7];
        let num = numerical_gradient(&q, &p, 1e-5);
        let mut g = [0.0; 2];
        q.eval(&p, &mut g);
        for (a, b) in num.iter().zip(&g) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn bad_config_rejected() {
        let q = Quadratic { c: vec![1.0], t: vec![0.0] };
        let cfg = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        assert!(minimize(&q, vec![1.0], &cfg).is_err());
        assert!(minimize(&q, vec![1.0, 2.0], &TrainConfig::default()).is_err());
    }
}
