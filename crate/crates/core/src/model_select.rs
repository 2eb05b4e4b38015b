//! Choosing the regularization weight by k-fold cross-validation, optionally
//! importance weighted (IWCV).
//!
//! IWCV scores a held-out source point by `clip(1/r_i) · logloss_i`, so the
//! fold score estimates the target-distribution logloss. Training inside a
//! fold is unchanged.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::density_ratio::{best_lambda, ClipBounds};
use crate::error::{invalid, Result};
use crate::metrics::row_logloss;
use crate::predict::{check_ratios, Predictor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Cv,
    Iwcv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionPlan {
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    pub scheme: Scheme,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub clip: ClipBounds,
}

fn default_folds() -> usize {
    5
}

/// `[2⁻¹⁶, 2⁻¹², 2⁻⁸, 2⁻⁴, 1]`
pub fn default_grid() -> Vec<f64> {
    [-16, -12, -8, -4, 0].iter().map(|&e| libm::exp2(f64::from(e))).collect()
}

impl SelectionPlan {
    pub fn new(scheme: Scheme, seed: u64) -> Self {
        SelectionPlan {
            folds: default_folds(),
            grid: default_grid(),
            scheme,
            seed,
            clip: ClipBounds::default(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.grid.is_empty() {
            return invalid("lambda grid is empty");
        }
        if self.grid.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return invalid("lambda grid values must be positive");
        }
        if self.folds < 2 {
            return invalid("need at least two folds");
        }
        if self.folds > n {
            return invalid(format!("{} folds for {n} samples", self.folds));
        }
        self.clip.validate()
    }
}

/// Seeded shuffle of `0..n` split into `folds` contiguous held-out blocks.
pub fn fold_partition(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds == 0 || folds > n {
        return invalid(format!("cannot split {n} samples into {folds} folds"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub lambda: f64,
    pub fold: usize,
    /// `None` when the fit for this fold failed.
    pub score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSummary {
    pub lambda: f64,
    /// Mean fold score, `None` if any fold failed.
    pub mean_score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub best_lambda: f64,
    pub table: Vec<ScoreRow>,
    pub summary: Vec<LambdaSummary>,
}

/// Held-out score of one fitted model on a validation block (bits).
pub fn validation_score<P: Predictor + ?Sized>(
    model: &P,
    val: &Dataset,
    val_ratios: &[f64],
    scheme: Scheme,
    clip: &ClipBounds,
) -> Result<f64> {
    let preds = model.predict_batch(val.features(), val_ratios)?;
    let losses = row_logloss(&preds, val.labels())?;
    let total: f64 = match scheme {
        Scheme::Cv => losses.iter().sum(),
        Scheme::Iwcv => losses
            .iter()
            .zip(val_ratios)
            .map(|(l, &r)| clip.apply(1.0 / r) * l)
            .sum(),
    };
    Ok(total / losses.len() as f64)
}

/// Runs the plan with an arbitrary `fit(λ, train, train_ratios)`.
pub fn select<P, F>(plan: &SelectionPlan, mut fit: F, src: &Dataset, src_ratios: &[f64]) -> Result<Selection>
where
    P: Predictor,
    F: FnMut(f64, &Dataset, &[f64]) -> Result<P>,
{
    plan.validate(src.len())?;
    check_ratios(src_ratios, src.len())?;
    let folds = fold_partition(src.len(), plan.folds, plan.seed)?;

    let mut splits = Vec::with_capacity(folds.len());
    for held in 0..folds.len() {
        let train_idx: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != held)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        let train = src.subset(&train_idx)?;
        let train_r: Vec<f64> = train_idx.iter().map(|&i| src_ratios[i]).collect();
        let val = src.subset(&folds[held])?;
        let val_r: Vec<f64> = folds[held].iter().map(|&i| src_ratios[i]).collect();
        splits.push((train, train_r, val, val_r));
    }

    let mut table = Vec::with_capacity(plan.grid.len() * folds.len());
    let mut summary = Vec::with_capacity(plan.grid.len());
    for &lambda in &plan.grid {
        let mut sum = 0.0;
        let mut failed = false;
        for (f, (train, train_r, val, val_r)) in splits.iter().enumerate() {
            let score = fit(lambda, train, train_r)
                .and_then(|m| validation_score(&m, val, val_r, plan.scheme, &plan.clip))
                .ok()
                .filter(|s| s.is_finite());
            match score {
                Some(s) => sum += s,
                None => failed = true,
            }
            table.push(ScoreRow {
                lambda,
                fold: f,
                score,
            });
        }
        summary.push(LambdaSummary {
            lambda,
            mean_score: (!failed).then(|| sum / folds.len() as f64),
        });
    }

    let scored: Vec<(f64, f64)> = summary
        .iter()
        .filter_map(|s| s.mean_score.map(|m| (s.lambda, m)))
        .collect();
    let best_lambda = match best_lambda(&scored) {
        Some(l) => l,
        None => return invalid("every lambda in the grid failed to fit"),
    };
    Ok(Selection {
        best_lambda,
        table,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines;
    use crate::error::Error;
    use crate::optim::TrainConfig;
    use crate::rba;
    use crate::testutil::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn default_grid_values() {
        assert_eq!(default_grid(), vec![1.0 / 65536.0, 1.0 / 4096.0, 1.0 / 256.0, 1.0 / 16.0, 1.0]);
    }

    proptest! {
        #[test]
        fn folds_form_a_permutation(n in 2usize..200, folds in 2usize..10, seed in any::<u64>()) {
            prop_assume!(folds <= n);
            let parts = fold_partition(n, folds, seed).unwrap();
            prop_assert_eq!(parts.len(), folds);
            let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }

    fn quick_cfg() -> TrainConfig {
        TrainConfig {
            max_iters: 500,
            grad_tol: 1e-6,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn unit_ratios_make_iwcv_equal_cv() {
        let src = labelled_blobs(1, 60, 2, 2);
        let ratios = vec![1.0; 60];
        let fit = |l: f64, d: &Dataset, r: &[f64]| rba::fit(d, r, l, &quick_cfg()).map(|t| t.model);
        let cv = select(&SelectionPlan::new(Scheme::Cv, 3), fit, &src, &ratios).unwrap();
        let iw = select(&SelectionPlan::new(Scheme::Iwcv, 3), fit, &src, &ratios).unwrap();
        assert_eq!(cv.table, iw.table);
        assert_eq!(cv.best_lambda, iw.best_lambda);
    }

    #[test]
    fn single_value_grid_selects_it() {
        let src = labelled_blobs(2, 30, 2, 2);
        let mut plan = SelectionPlan::new(Scheme::Cv, 0);
        plan.grid = vec![0.37];
        let fit = |l: f64, d: &Dataset, _r: &[f64]| baselines::lr_fit(d, l, &quick_cfg()).map(|t| t.model);
        let sel = select(&plan, fit, &src, &vec![1.0; 30]).unwrap();
        assert_eq!(sel.best_lambda, 0.37);
        assert_eq!(sel.table.len(), 5);
    }

    #[test]
    fn seeded_selection_is_reproducible_and_grid_order_invariant() {
        let src = labelled_blobs(3, 50, 2, 3);
        let ratios = random_ratios(4, 50);
        let fit = |l: f64, d: &Dataset, r: &[f64]| rba::fit(d, r, l, &quick_cfg()).map(|t| t.model);
        let plan = SelectionPlan::new(Scheme::Iwcv, 11);
        let a = select(&plan, fit, &src, &ratios).unwrap();
        let b = select(&plan, fit, &src, &ratios).unwrap();
        assert_eq!(a, b);
        let mut rev = plan.clone();
        rev.grid.reverse();
        let c = select(&rev, fit, &src, &ratios).unwrap();
        assert_eq!(a.best_lambda, c.best_lambda);
    }

    #[test]
    fn failed_lambdas_are_excluded() {
        let src = labelled_blobs(5, 20, 2, 2);
        let mut plan = SelectionPlan::new(Scheme::Cv, 0);
        plan.grid = vec![0.1, 1.0];
        let fit = |l: f64, d: &Dataset, _r: &[f64]| {
            if l > 0.5 {
                Err(Error::NumericalFailure { iteration: 3, message: "boom".into() })
            } else {
                baselines::lr_fit(d, l, &quick_cfg()).map(|t| t.model)
            }
        };
        let sel = select(&plan, fit, &src, &vec![1.0; 20]).unwrap();
        assert_eq!(sel.best_lambda, 0.1);
        assert!(sel.summary[1].mean_score.is_none());

        let all_fail = |_l: f64, _d: &Dataset, _r: &[f64]| -> Result<rba::LinearRbaModel> {
            Err(Error::InvalidArgument("no".into()))
        };
        assert!(select(&plan, all_fail, &src, &vec![1.0; 20]).is_err());
    }

    #[test]
    fn plan_validation() {
        let mut plan = SelectionPlan::new(Scheme::Cv, 0);
        assert!(plan.validate(4).is_err());
        assert!(plan.validate(5).is_ok());
        plan.grid = vec![];
        assert!(plan.validate(10).is_err());
        plan.grid = vec![-1.0];
        assert!(plan.validate(10).is_err());
    }

    #[test]
    fn missing_class_in_fold_still_fits() {
        // class 2 has a single example, so some training folds lack it
        let mut src = labelled_blobs(6, 20, 2, 2);
        let mut labels = src.labels().to_vec();
        labels[0] = 2;
        src = Dataset::new(src.features().clone(), labels, 3).unwrap();
        let fit = |l: f64, d: &Dataset, _r: &[f64]| baselines::lr_fit(d, l, &quick_cfg()).map(|t| t.model);
        let sel = select(&SelectionPlan::new(Scheme::Cv, 1), fit, &src, &vec![1.0; 20]).unwrap();
        assert!(sel.summary.iter().all(|s| s.mean_score.is_some()));
    }
}
