//! Covariate-shift samplers that turn one dataset into a source and a target
//! sample, plus the synthetic Gaussian generator.
//!
//! `variable_split` follows the usual three steps: split rows at the mean of
//! one variable, draw the target uniformly from the upper part, and draw the
//! source from the lower part with probability proportional to a Gaussian
//! density centred at `μ/shrink` with covariance `Σ/shrink` (`μ`, `Σ` being the
//! portion's sample moments). Inputs with more than 10 columns are projected
//! on their first 5 principal axes before the density is evaluated.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rba_core::{Dataset, Matrix};
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

pub const PCA_THRESHOLD: usize = 10;
pub const PCA_COMPONENTS: usize = 5;
pub const COV_RIDGE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceWeights {
    #[default]
    Gaussian,
    /// No selection bias inside the source portion.
    Uniform,
}

fn default_shrink() -> f64 {
    5.0
}
fn default_noise_mean() -> f64 {
    0.2
}
fn default_noise_sd() -> f64 {
    0.5
}
fn default_count() -> usize {
    200
}

/// Two Gaussian clouds sharing a linear labelling rule
/// `y = 1[w·x + b > 0]`, with each label flipped with probability `label_noise`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Synthetic2d {
    pub src_mean: Vec<f64>,
    pub src_cov: Vec<Vec<f64>>,
    pub trg_mean: Vec<f64>,
    pub trg_cov: Vec<Vec<f64>>,
    pub boundary_weights: Vec<f64>,
    pub boundary_offset: f64,
    pub label_noise: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BiasKind {
    VariableSplit {
        /// Column to split on; defaults to the highest-variance column.
        #[serde(default)]
        variable: Option<usize>,
        #[serde(default = "default_shrink")]
        shrink: f64,
        #[serde(default)]
        source_weights: SourceWeights,
    },
    /// Target drawn uniformly from all rows, source drawn with Gaussian
    /// weights from the rest.
    GaussianSubsample {
        #[serde(default = "default_shrink")]
        shrink: f64,
        #[serde(default)]
        source_weights: SourceWeights,
    },
    /// Disjoint uniform draws; target features get i.i.d. `N(mean, sd²)` noise.
    AdditiveNoise {
        #[serde(default = "default_noise_mean")]
        noise_mean: f64,
        #[serde(default = "default_noise_sd")]
        noise_sd: f64,
    },
    #[serde(rename = "synthetic_2d")]
    Synthetic2d(Synthetic2d),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasPlan {
    #[serde(flatten)]
    pub kind: BiasKind,
    #[serde(default = "default_count")]
    pub n_src: usize,
    #[serde(default = "default_count")]
    pub n_trg: usize,
    #[serde(default)]
    pub seed: u64,
}

impl BiasPlan {
    pub fn new(kind: BiasKind, n_src: usize, n_trg: usize, seed: u64) -> Self {
        BiasPlan { kind, n_src, n_trg, seed }
    }

    pub fn variable_split(n_src: usize, n_trg: usize, seed: u64) -> Self {
        BiasPlan::new(
            BiasKind::VariableSplit {
                variable: None,
                shrink: default_shrink(),
                source_weights: SourceWeights::Gaussian,
            },
            n_src,
            n_trg,
            seed,
        )
    }

    pub fn validate(&self, dim: Option<usize>) -> Result<()> {
        if self.n_src == 0 || self.n_trg == 0 {
            return config("n_src and n_trg must be at least 1");
        }
        match &self.kind {
            BiasKind::VariableSplit { variable, shrink, .. } => {
                if let (Some(v), Some(d)) = (variable, dim) {
                    if *v >= d {
                        return config(format!("split variable {v} out of range for {d} columns"));
                    }
                }
                check_shrink(*shrink)
            }
            BiasKind::GaussianSubsample { shrink, .. } => check_shrink(*shrink),
            BiasKind::AdditiveNoise { noise_mean, noise_sd } => {
                if !(noise_sd.is_finite() && *noise_sd > 0.0 && noise_mean.is_finite()) {
                    return config("noise sd must be positive and the mean finite");
                }
                Ok(())
            }
            BiasKind::Synthetic2d(s) => s.validate(),
        }
    }
}

fn check_shrink(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        config("shrink factor must be positive")
    }
}

/// Source and target samples with the row indices they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasedSample {
    pub src: Dataset,
    pub trg: Dataset,
    pub src_index: Vec<usize>,
    pub trg_index: Vec<usize>,
    /// Rows eligible for the source draw and their log sampling weights.
    pub source_pool: Vec<usize>,
    pub source_log_weights: Vec<f64>,
}

pub fn bias_sample(data: &Dataset, plan: &BiasPlan) -> Result<BiasedSample> {
    plan.validate(Some(data.dim()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let x = data.features();
    let (trg_index, pool, log_w, trg_features) = match &plan.kind {
        BiasKind::VariableSplit {
            variable,
            shrink,
            source_weights,
        } => {
            let v = variable.unwrap_or_else(|| widest_column(x));
            let col: Vec<f64> = x.iter_rows().map(|r| r[v]).collect();
            let threshold = col.iter().sum::<f64>() / col.len() as f64;
            let (low, high): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| col[i] <= threshold);
            need(high.len(), plan.n_trg, "target portion")?;
            need(low.len(), plan.n_src, "source portion")?;
            let trg: Vec<usize> = sample(&mut rng, high.len(), plan.n_trg).into_iter().map(|i| high[i]).collect();
            let lw = source_log_weights(&x.select_rows(&low), *shrink, *source_weights)?;
            (trg, low, lw, None)
        }
        BiasKind::GaussianSubsample { shrink, source_weights } => {
            need(data.len(), plan.n_src + plan.n_trg, "dataset")?;
            let trg: Vec<usize> = sample(&mut rng, data.len(), plan.n_trg).into_vec();
            let mut taken = vec![false; data.len()];
            trg.iter().for_each(|&i| taken[i] = true);
            let rest: Vec<usize> = (0..data.len()).filter(|&i| !taken[i]).collect();
            let lw = source_log_weights(&x.select_rows(&rest), *shrink, *source_weights)?;
            (trg, rest, lw, None)
        }
        BiasKind::AdditiveNoise { noise_mean, noise_sd } => {
            need(data.len(), plan.n_src + plan.n_trg, "dataset")?;
            let all = sample(&mut rng, data.len(), plan.n_src + plan.n_trg).into_vec();
            let (src, trg) = all.split_at(plan.n_src);
            let noise = Normal::new(*noise_mean, *noise_sd).expect("validated");
            let mut tx = x.select_rows(trg);
            tx.as_mut_slice().iter_mut().for_each(|v| *v += noise.sample(&mut rng));
            let pool = src.to_vec();
            let lw = vec![0.0; pool.len()];
            (trg.to_vec(), pool, lw, Some(tx))
        }
        BiasKind::Synthetic2d(_) => {
            return config("synthetic_2d generates its own data; it cannot resample a dataset");
        }
    };

    let src_index: Vec<usize> = if matches!(plan.kind, BiasKind::AdditiveNoise { .. }) {
        pool.clone()
    } else {
        weighted_draws(&log_w, plan.n_src, &mut rng).into_iter().map(|i| pool[i]).collect()
    };
    let src = data.subset(&src_index)?;
    let trg = match trg_features {
        Some(tx) => Dataset::new(tx, trg_index.iter().map(|&i| data.labels()[i]).collect(), data.class_count())?,
        None => data.subset(&trg_index)?,
    };
    Ok(BiasedSample {
        src,
        trg,
        src_index,
        trg_index,
        source_pool: pool,
        source_log_weights: log_w,
    })
}

fn need(have: usize, want: usize, what: &str) -> Result<()> {
    if have < want {
        return config(format!("{what} has {have} rows, {want} needed"));
    }
    Ok(())
}

/// Highest sample variance, ties to the lowest index.
fn widest_column(x: &Matrix) -> usize {
    let n = x.rows() as f64;
    let mut best = (0, f64::NEG_INFINITY);
    for j in 0..x.cols() {
        let m = x.iter_rows().map(|r| r[j]).sum::<f64>() / n;
        let v = x.iter_rows().map(|r| (r[j] - m).powi(2)).sum::<f64>();
        if v > best.1 {
            best = (j, v);
        }
    }
    best.0
}

/// Sequential draws without replacement, each proportional to the remaining
/// weights `exp(log_w)`.
pub fn weighted_draws<R: Rng>(log_w: &[f64], m: usize, rng: &mut R) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..log_w.len()).collect();
    let mut out = Vec::with_capacity(m);
    let mut w = Vec::with_capacity(log_w.len());
    for _ in 0..m.min(log_w.len()) {
        let top = remaining.iter().map(|&i| log_w[i]).fold(f64::NEG_INFINITY, f64::max);
        w.clear();
        w.extend(remaining.iter().map(|&i| (log_w[i] - top).exp()));
        let total: f64 = w.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = remaining.len() - 1;
        for (k, &wk) in w.iter().enumerate() {
            if u < wk {
                pick = k;
                break;
            }
            u -= wk;
        }
        out.push(remaining.remove(pick));
    }
    out
}

fn to_dmatrix(x: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(x.rows(), x.cols(), x.as_slice())
}

fn covariance(z: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = z.nrows();
    let mean = z.row_mean().transpose();
    let mut c = z.clone();
    for mut row in c.row_iter_mut() {
        row -= mean.transpose();
    }
    let denom = (n.max(2) - 1) as f64;
    let cov = c.transpose() * &c / denom;
    (mean, cov)
}

/// Projection on the `k` leading principal axes. Each axis is signed so its
/// largest-magnitude entry is positive, which keeps the result deterministic.
pub fn pca_project(x: &Matrix, k: usize) -> Matrix {
    let z = to_dmatrix(x);
    let (_, cov) = covariance(&z);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let k = k.min(order.len());
    let mut axes = DMatrix::zeros(x.cols(), k);
    for (c, &i) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let lead = v.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if lead < 0.0 {
            v = -v;
        }
        axes.set_column(c, &v);
    }
    let p = z * axes;
    let mut data = Vec::with_capacity(p.len());
    for row in p.row_iter() {
        data.extend(row.iter());
    }
    Matrix::from_vec(x.rows(), k, data).expect("projection shape")
}

/// Log-density (up to a constant) of `N(μ/shrink, Σ/shrink)` at each row,
/// or zeros for uniform weights.
fn source_log_weights(x: &Matrix, shrink: f64, kind: SourceWeights) -> Result<Vec<f64>> {
    if kind == SourceWeights::Uniform {
        return Ok(vec![0.0; x.rows()]);
    }
    let reduced;
    let x = if x.cols() > PCA_THRESHOLD {
        reduced = pca_project(x, PCA_COMPONENTS);
        &reduced
    } else {
        x
    };
    let z = to_dmatrix(x);
    let (mean, cov) = covariance(&z);
    let mu = mean / shrink;
    let sigma = cov / shrink;
    let d = sigma.nrows();
    let chol = match sigma.clone().cholesky() {
        Some(c) => c,
        None => match (sigma + DMatrix::identity(d, d) * COV_RIDGE).cholesky() {
            Some(c) => c,
            None => {
                return Err(rba_core::Error::NumericalFailure {
                    iteration: 0,
                    message: "sampling covariance is not positive definite even with a ridge".into(),
                }
                .into())
            }
        },
    };
    Ok(z.row_iter()
        .map(|row| {
            let diff = row.transpose() - &mu;
            let sol = chol.l().solve_lower_triangular(&diff).expect("cholesky factor is invertible");
            -0.5 * sol.norm_squared()
        })
        .collect())
}

impl Synthetic2d {
    pub fn dim(&self) -> usize {
        self.src_mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let square = |c: &Vec<Vec<f64>>| c.len() == d && c.iter().all(|r| r.len() == d);
        if d == 0 || self.trg_mean.len() != d || self.boundary_weights.len() != d || !square(&self.src_cov) || !square(&self.trg_cov) {
            return config("synthetic_2d means, covariances and boundary must share one dimension");
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return config("label_noise must lie in [0, 1)");
        }
        for c in [&self.src_cov, &self.trg_cov] {
            if cholesky(c).is_none() {
                return config("synthetic_2d covariances must be symmetric positive definite");
            }
        }
        Ok(())
    }

    /// Noise-free label of `x`.
    pub fn true_label(&self, x: &[f64]) -> usize {
        let s: f64 = self.boundary_weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.boundary_offset;
        usize::from(s > 0.0)
    }

    /// `n` labelled draws from one of the two clouds.
    pub fn draw<R: Rng>(&self, target: bool, n: usize, rng: &mut R) -> Result<Dataset> {
        self.validate()?;
        let (mean, cov) = if target { (&self.trg_mean, &self.trg_cov) } else { (&self.src_mean, &self.src_cov) };
        let l = cholesky(cov).expect("validated");
        let d = self.dim();
        let mut feats = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        let mut e = vec![0.0; d];
        for _ in 0..n {
            e.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
            let x: Vec<f64> = (0..d).map(|i| mean[i] + (0..=i).map(|j| l[i * d + j] * e[j]).sum::<f64>()).collect();
            let y = self.true_label(&x);
            let flip = rng.random::<f64>() < self.label_noise;
            labels.push(if flip { 1 - y } else { y });
            feats.extend(x);
        }
        Ok(Dataset::new(Matrix::from_vec(n, d, feats)?, labels, 2)?)
    }

    /// Source and target samples from one seed.
    pub fn sample(&self, n_src: usize, n_trg: usize, seed: u64) -> Result<(Dataset, Dataset)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = self.draw(false, n_src, &mut rng)?;
        let trg = self.draw(true, n_trg, &mut rng)?;
        Ok((src, trg))
    }
}

/// Row-major lower Cholesky factor of a small dense matrix.
fn cholesky(c: &[Vec<f64>]) -> Option<Vec<f64>> {
    let d = c.len();
    for i in 0..d {
        for j in 0..i {
            if (c[i][j] - c[j][i]).abs() > 1e-12 * (1.0 + c[i][j].abs()) {
                return None;
            }
        }
    }
    let m = DMatrix::from_fn(d, d, |i, j| c[i][j]);
    let l = m.cholesky()?.l();
    Some((0..d * d).map(|k| l[(k / d, k % d)]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_draws_are_distinct_and_prefer_heavy_items() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let log_w: Vec<f64> = (0..50).map(|i| if i < 5 { 10.0 } else { 0.0 }).collect();
        let picks = weighted_draws(&log_w, 5, &mut rng);
        let mut sorted = picks.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
        let all = weighted_draws(&log_w, 80, &mut rng);
        assert_eq!(all.len(), 50);
    }

    #[test]
    fn pca_recovers_dominant_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| {
                let t: f64 = StandardNormal.sample(&mut rng);
                let e: f64 = StandardNormal.sample(&mut rng);
                vec![3.0 * t, 3.0 * t + 0.1 * e, 0.1 * e]
            })
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let p = pca_project(&x, 1);
        let corr = crate::stats::pearson(&p.iter_rows().map(|r| r[0]).collect::<Vec<_>>(), &rows.iter().map(|r| r[0]).collect::<Vec<_>>());
        assert!(corr > 0.99, "{corr}");
    }
}
