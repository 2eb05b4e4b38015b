use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::Dataset;
use crate::linalg::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Isotropic Gaussian cloud of `n` points with unit variance around `mean`.
pub fn gaussian_points(rng: &mut ChaCha8Rng, n: usize, mean: &[f64], sd: f64) -> Matrix {
    let normal = Normal::new(0.0, sd).unwrap();
    let d = mean.len();
    let data: Vec<f64> = (0..n * d).map(|i| mean[i % d] + normal.sample(rng)).collect();
    Matrix::from_vec(n, d, data).unwrap()
}

/// Labels from a noisy linear rule (binary) or nearest random centre (K > 2).
pub fn labelled_blobs(seed: u64, n: usize, d: usize, k: usize) -> Dataset {
    let mut r = rng(seed);
    let centres: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| r.random_range(-2.0..2.0)).collect())
        .collect();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut feats = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % k;
        for j in 0..d {
            feats.push(centres[y][j] + normal.sample(&mut r));
        }
        labels.push(y);
    }
    Dataset::new(Matrix::from_vec(n, d, feats).unwrap(), labels, k).unwrap()
}

pub fn random_ratios(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(0.3..3.0)).collect()
}

pub fn random_params(seed: u64, len: usize, scale: f64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..len).map(|_| r.random_range(-scale..scale)).collect()
}

/// Largest entrywise relative error, with an absolute floor on the denominator.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
