//! Convex softmax potentials behind every estimator in the crate.
//!
//! With per-sample raw scores `u[i, y]` (linear: `θ·Φ(x_i, y)`, kernel:
//! `(1/n)·(G·A)[i, y]`), the potential is
//!
//! ```text
//! F = (1/n) Σ_i [ a_i · log Σ_y exp(c_i · u[i, y]) − b_i · u[i, y_i] ] + λ·‖θ‖²
//! ```
//!
//! * robust bias-aware: `a_i = 1/r_i`, `c_i = r_i`, `b_i = 1`
//! * (importance-weighted) logistic: `a_i = b_i = w_i`, `c_i = 1`
//!
//! For the kernel form `‖θ‖² = (1/n²)·Σ_y A_yᵀ G A_y`, so the gradient with
//! respect to `A` is `(1/n²)·G·(H + 2λA)` where `H[i, y] = a_i c_i P[i, y] − b_i δ(y, y_i)`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use crate::dataset::{Dataset, FeatureMap};
use crate::linalg::Matrix;
use crate::math::softmax_in_place;
use crate::optim::Objective;

#[derive(Clone, Debug)]
pub(crate) enum Weighting<'a> {
    /// Ratio-scaled exponent with `1/r` on the log-partition term.
    Robust(&'a [f64]),
    /// Per-sample weights on the whole log-likelihood term.
    Weighted(Option<&'a [f64]>),
}

#[derive(Clone, Debug)]
enum Form<'a> {
    Linear(FeatureMap),
    Kernel(&'a Matrix),
}

/// Potential over a fixed training sample. Parameters are flattened: `θ` for
/// the linear form, row-major `A` (n×K) for the kernel form.
#[derive(Clone, Debug)]
pub struct SoftmaxPotential<'a> {
    form: Form<'a>,
    data: &'a Dataset,
    weighting: Weighting<'a>,
    lambda: f64,
    functional_direction: bool,
    cache: RefCell<Cache>,
}

/// Products with the Gram matrix dominate the kernel form, so results are
/// kept for reuse by the next `direction` and `line` calls. Every entry is
/// keyed by the exact vector it was computed for.
#[derive(Clone, Debug, Default)]
struct Cache {
    /// `(params, raw scores)`.
    scores: Option<(Vec<f64>, Vec<f64>)>,
    /// `(params, H + 2λA)` from the last kernel gradient.
    residual: Option<(Vec<f64>, Vec<f64>)>,
    /// `(dir, raw scores of dir)`.
    dir_scores: Option<(Vec<f64>, Vec<f64>)>,
}

fn lookup(entry: &Option<(Vec<f64>, Vec<f64>)>, key: &[f64]) -> Option<Vec<f64>> {
    match entry {
        Some((k, v)) if k.as_slice() == key => Some(v.clone()),
        _ => None,
    }
}

impl<'a> SoftmaxPotential<'a> {
    /// Use the plain negative gradient as the search direction for the kernel form.
    pub fn with_plain_gradient(mut self) -> Self {
        self.functional_direction = false;
        self
    }

    pub(crate) fn linear(fm: FeatureMap, data: &'a Dataset, weighting: Weighting<'a>, lambda: f64) -> Self {
        SoftmaxPotential {
            form: Form::Linear(fm),
            data,
            weighting,
            lambda,
            functional_direction: false,
            cache: RefCell::default(),
        }
    }

    pub(crate) fn kernel(gram: &'a Matrix, data: &'a Dataset, weighting: Weighting<'a>, lambda: f64) -> Self {
        SoftmaxPotential {
            form: Form::Kernel(gram),
            data,
            weighting,
            lambda,
            functional_direction: true,
            cache: RefCell::default(),
        }
    }

    #[inline]
    fn coefficients(&self, i: usize) -> (f64, f64, f64) {
        match self.weighting {
            Weighting::Robust(r) => (1.0 / r[i], r[i], 1.0),
            Weighting::Weighted(Some(w)) => (w[i], 1.0, w[i]),
            Weighting::Weighted(None) => (1.0, 1.0, 1.0),
        }
    }

    /// Raw (unscaled) scores `u`, n×K.
    fn raw_scores(&self, params: &[f64]) -> Matrix {
        let n = self.data.len();
        let k = self.data.class_count();
        match &self.form {
            Form::Linear(fm) => {
                let mut u = Matrix::zeros(n, k);
                for i in 0..n {
                    let x = self.data.x(i);
                    for (y, v) in u.row_mut(i).iter_mut().enumerate() {
                        *v = fm.score(params, x, y);
                    }
                }
                u
            }
            Form::Kernel(gram) => {
                let a = Matrix::from_vec(n, k, params.to_vec()).expect("alpha shape");
                let mut u = gram.matmul(&a).expect("gram shape");
                let inv_n = 1.0 / n as f64;
                u.as_mut_slice().iter_mut().for_each(|v| *v *= inv_n);
                u
            }
        }
    }

    fn cached_scores(&self, params: &[f64]) -> Matrix {
        let n = self.data.len();
        let k = self.data.class_count();
        if let Some(u) = lookup(&self.cache.borrow().scores, params) {
            return Matrix::from_vec(n, k, u).expect("cached score shape");
        }
        let u = self.raw_scores(params);
        self.cache.borrow_mut().scores = Some((params.to_vec(), u.as_slice().to_vec()));
        u
    }

    /// Value, plus `H` (the score-space gradient before the 1/n factor).
    fn value_and_score_grad(&self, params: &[f64]) -> (f64, Matrix, Matrix) {
        let n = self.data.len();
        let k = self.data.class_count();
        let u = self.cached_scores(params);
        let mut h = Matrix::zeros(n, k);
        let mut buf = vec![0.0; k];
        let mut total = 0.0;
        for i in 0..n {
            let (a, c, b) = self.coefficients(i);
            let urow = u.row(i);
            for (s, &v) in buf.iter_mut().zip(urow) {
                *s = c * v;
            }
            let log_z = softmax_in_place(&mut buf);
            let yi = self.data.labels()[i];
            total += a * log_z - b * urow[yi];
            let hrow = h.row_mut(i);
            for (hv, &p) in hrow.iter_mut().zip(&buf) {
                *hv = a * c * p;
            }
            hrow[yi] -= b;
        }
        let reg = match &self.form {
            Form::Linear(_) => self.lambda * crate::math::dot(params, params),
            Form::Kernel(_) => self.lambda / n as f64 * crate::math::dot(params, u.as_slice()),
        };
        (total / n as f64 + reg, u, h)
    }

    /// Data term of the potential for raw scores `u`.
    fn data_term(&self, u: &[f64], buf: &mut [f64]) -> f64 {
        let k = buf.len();
        let mut total = 0.0;
        for (i, urow) in u.chunks_exact(k).enumerate() {
            let (a, c, b) = self.coefficients(i);
            for (s, &v) in buf.iter_mut().zip(urow) {
                *s = c * v;
            }
            let log_z = softmax_in_place(buf);
            total += a * log_z - b * urow[self.data.labels()[i]];
        }
        total / self.data.len() as f64
    }

    /// Conditional label probabilities on the training points under `params`.
    pub fn training_predictions(&self, params: &[f64]) -> Matrix {
        let u = self.raw_scores(params);
        let mut p = u;
        for i in 0..p.rows() {
            let (_, c, _) = self.coefficients(i);
            let row = p.row_mut(i);
            row.iter_mut().for_each(|v| *v *= c);
            softmax_in_place(row);
        }
        p
    }

    /// `H + 2λA` for the kernel form; the gradient is `(1/n²)·G·(H + 2λA)`.
    fn kernel_residual(&self, params: &[f64], h: &Matrix) -> Vec<f64> {
        h.as_slice()
            .iter()
            .zip(params)
            .map(|(hv, a)| hv + 2.0 * self.lambda * a)
            .collect()
    }
}

impl Objective for SoftmaxPotential<'_> {
    fn dim(&self) -> usize {
        match &self.form {
            Form::Linear(fm) => fm.dim(),
            Form::Kernel(_) => self.data.len() * self.data.class_count(),
        }
    }

    fn eval(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.data.len();
        let k = self.data.class_count();
        let (value, _, h) = self.value_and_score_grad(params);
        match &self.form {
            Form::Linear(fm) => {
                grad.iter_mut()
                    .zip(params)
                    .for_each(|(g, t)| *g = 2.0 * self.lambda * t);
                let inv_n = 1.0 / n as f64;
                for i in 0..n {
                    let x = self.data.x(i);
                    for (y, &hv) in h.row(i).iter().enumerate() {
                        if hv != 0.0 {
                            fm.accumulate(grad, x, y, hv * inv_n);
                        }
                    }
                }
            }
            Form::Kernel(_) => {
                // raw_scores(M) = G·M/n, so the gradient is raw_scores(M)/n and
                // the scores of the direction −M come for free.
                let res = self.kernel_residual(params, &h);
                let sm = self.raw_scores(&res);
                let inv_n = 1.0 / n as f64;
                for (g, v) in grad.iter_mut().zip(sm.as_slice()) {
                    *g = v * inv_n;
                }
                let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<f64>>();
                let mut c = self.cache.borrow_mut();
                c.dir_scores = Some((neg(&res), neg(sm.as_slice())));
                c.residual = Some((params.to_vec(), res));
                debug_assert_eq!(sm.as_slice().len(), n * k);
            }
        }
        value
    }

    /// Kernel form: functional-gradient direction `−(H + 2λA)`, i.e. the
    /// gradient preconditioned by the Gram matrix.
    fn direction(&self, params: &[f64], grad: &[f64], dir: &mut [f64]) {
        match &self.form {
            Form::Kernel(_) if self.functional_direction => {
                let cached = lookup(&self.cache.borrow().residual, params);
                let res = cached.unwrap_or_else(|| {
                    let (_, _, h) = self.value_and_score_grad(params);
                    self.kernel_residual(params, &h)
                });
                for (d, m) in dir.iter_mut().zip(res) {
                    *d = -m;
                }
            }
            _ => {
                for (d, g) in dir.iter_mut().zip(grad) {
                    *d = -g;
                }
            }
        }
    }

    /// Raw scores are linear in the parameters, so the line is evaluated in
    /// score space without further passes over the features or Gram matrix.
    fn line<'s>(&'s self, params: &[f64], dir: &[f64]) -> Box<dyn FnMut(f64) -> f64 + 's> {
        let n = self.data.len() as f64;
        let u0 = self.cached_scores(params);
        let cached = lookup(&self.cache.borrow().dir_scores, dir);
        let du = match cached {
            Some(v) => v,
            None => self.raw_scores(dir).into_vec(),
        };
        let p = params.to_vec();
        let d = dir.to_vec();
        let kernel = matches!(self.form, Form::Kernel(_));
        let mut u = vec![0.0; u0.as_slice().len()];
        let mut buf = vec![0.0; self.data.class_count()];
        Box::new(move |t| {
            for ((v, a), b) in u.iter_mut().zip(u0.as_slice()).zip(&du) {
                *v = a + t * b;
            }
            // same expression as the optimizer's trial point, so the cached
            // scores are found again when the trial is accepted
            let x: Vec<f64> = p.iter().zip(&d).map(|(a, dd)| a + t * dd).collect();
            let reg = if kernel {
                // (λ/n)·⟨A + tD, U + tV⟩
                x.iter().zip(&u).map(|(a, uv)| a * uv).sum::<f64>() * self.lambda / n
            } else {
                x.iter().map(|a| a * a).sum::<f64>() * self.lambda
            };
            let value = self.data_term(&u, &mut buf) + reg;
            self.cache.borrow_mut().scores = Some((x, u.clone()));
            value
        })
    }
}
