use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use super::folds::{group_kfold, random_kfold, FoldPlan, SplitKind};
use super::ridge::GramRidge;
use crate::analysis::{correlations, CorrelationReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTask {
    /// K×N feature rows, usually q-coordinates.
    pub features: DMatrix<f64>,
    pub target: Vec<f64>,
    /// Group label per row, usually the model type.
    pub groups: Vec<String>,
    pub alpha_grid: Vec<f64>,
    pub n_folds: usize,
    pub inner_folds: usize,
    pub seeds: Vec<u64>,
    pub clip_range: Option<(f64, f64)>,
    pub split: SplitKind,
    pub fit_intercept: bool,
}

impl PredictionTask {
    pub fn new(features: DMatrix<f64>, target: Vec<f64>, groups: Vec<String>, alpha_grid: Vec<f64>) -> Self {
        Self {
            features,
            target,
            groups,
            alpha_grid,
            n_folds: 5,
            inner_folds: 5,
            seeds: (0..5).collect(),
            clip_range: None,
            split: SplitKind::Grouped,
            fit_intercept: true,
        }
    }

    fn validate(&self) -> Result<()> {
        let k = self.features.nrows();
        if self.target.len() != k || self.groups.len() != k {
            return Err(Error::Shape(alloc::format!(
                "{k} feature rows, {} targets, {} group labels",
                self.target.len(),
                self.groups.len()
            )));
        }
        if self.alpha_grid.is_empty() || self.alpha_grid.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::range("alpha_grid", "needs at least one positive, finite alpha"));
        }
        if self.n_folds < 2 || self.inner_folds < 2 {
            return Err(Error::range("folds", "outer and inner fold counts must be at least 2"));
        }
        if self.seeds.is_empty() {
            return Err(Error::range("seeds", "need at least one seed"));
        }
        if let Some(i) = self.target.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        if let Some((lo, hi)) = self.clip_range {
            if !(lo <= hi) {
                return Err(Error::range("clip_range", "lower bound exceeds upper bound"));
            }
        }
        Ok(())
    }

    fn plan(&self, rows: &[usize], folds: usize, seed: u64) -> Result<FoldPlan> {
        match self.split {
            SplitKind::Grouped => {
                let g: Vec<String> = rows.iter().map(|&i| self.groups[i].clone()).collect();
                group_kfold(&g, folds, seed)
            }
            SplitKind::Random => random_kfold(rows.len(), folds, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValResult {
    /// Held-out prediction per row, averaged over seeds.
    pub predictions: Vec<f64>,
    /// `None` when the predictions or targets are constant.
    pub report: Option<CorrelationReport>,
    /// Outer plan per seed.
    pub plans: Vec<FoldPlan>,
    /// Chosen alpha per seed and outer fold.
    pub selected_alphas: Vec<Vec<f64>>,
    /// Outer folds whose inner split fell back to ungrouped folds.
    pub inner_fallbacks: usize,
}

/// Index into `alphas` with the lowest mean inner-fold MSE; ties keep the
/// earlier alpha.
fn select_alpha(
    ridge: &GramRidge,
    task: &PredictionTask,
    train: &[usize],
    seed: u64,
    fallbacks: &mut usize,
) -> Result<usize> {
    if task.alpha_grid.len() == 1 {
        return Ok(0);
    }
    let inner = match task.plan(train, task.inner_folds, seed) {
        Ok(p) => p,
        Err(_) => {
            *fallbacks += 1;
            let folds = task.inner_folds.min(train.len());
            if folds < 2 {
                return Ok(0);
            }
            random_kfold(train.len(), folds, seed)?
        }
    };
    let mut mse = alloc::vec![0.0; task.alpha_grid.len()];
    for f in 0..inner.n_folds {
        let fit_rows: Vec<usize> = inner.complement(f).iter().map(|&r| train[r]).collect();
        let held: Vec<usize> = inner.members(f).iter().map(|&r| train[r]).collect();
        let preds = ridge.fit_predict(&fit_rows, &task.target, &held, &task.alpha_grid, task.fit_intercept)?;
        for (a, p) in preds.iter().enumerate() {
            let se: f64 = p
                .iter()
                .zip(&held)
                .map(|(v, &i)| (v - task.target[i]) * (v - task.target[i]))
                .sum();
            mse[a] += se / held.len() as f64 / inner.n_folds as f64;
        }
    }
    let mut best = 0;
    for a in 1..mse.len() {
        if mse[a] < mse[best] {
            best = a;
        }
    }
    Ok(best)
}

/// Nested cross-validated ridge predictions.
///
/// For each seed an outer plan is drawn; inside every outer training set,
/// alpha is chosen by an inner split of the same kind (grouped by the same
/// labels, seeded identically), the model is refit on the whole training
/// set and the held-out rows are predicted and clipped. Predictions are
/// averaged over seeds and compared with the target.
pub fn cross_val_predict(task: &PredictionTask) -> Result<CrossValResult> {
    task.validate()?;
    let k = task.features.nrows();
    let ridge = GramRidge::new(&task.features)?;
    let all: Vec<usize> = (0..k).collect();
    let mut sum = alloc::vec![0.0; k];
    let mut plans = Vec::with_capacity(task.seeds.len());
    let mut selected = Vec::with_capacity(task.seeds.len());
    let mut fallbacks = 0;

    for &seed in &task.seeds {
        let plan = task.plan(&all, task.n_folds, seed)?;
        let mut alphas = Vec::with_capacity(plan.n_folds);
        for f in 0..plan.n_folds {
            let train = plan.complement(f);
            let test = plan.members(f);
            let best = select_alpha(&ridge, task, &train, seed, &mut fallbacks)?;
            let alpha = task.alpha_grid[best];
            alphas.push(alpha);
            let pred = ridge.fit_predict(&train, &task.target, &test, &[alpha], task.fit_intercept)?;
            for (&i, &p) in test.iter().zip(&pred[0]) {
                sum[i] += match task.clip_range {
                    Some((lo, hi)) => p.clamp(lo, hi),
                    None => p,
                };
            }
        }
        plans.push(plan);
        selected.push(alphas);
    }
    let predictions: Vec<f64> = sum.iter().map(|s| s / task.seeds.len() as f64).collect();
    let report = correlations(&predictions, &task.target).ok();
    Ok(CrossValResult {
        predictions,
        report,
        plans,
        selected_alphas: selected,
        inner_fallbacks: fallbacks,
    })
}
