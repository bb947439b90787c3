//! Ridge regression from model coordinates to benchmark scores, with
//! grouped cross-validation.

mod cv;
mod folds;
mod ridge;

pub use cv::{cross_val_predict, CrossValResult, PredictionTask};
pub use folds::{audit_group_atomicity, group_kfold, random_kfold, FoldPlan, SplitKind};
pub use ridge::{fit_ridge, GramRidge, RidgeModel};

/// {10¹, …, 10⁹}: regularization grid for benchmark-score targets.
pub fn benchmark_alpha_grid() -> alloc::vec::Vec<f64> {
    (1..=9).map(|e| crate::math::powi(10.0, e)).collect()
}

/// {10⁻⁴, …, 10⁴}: regularization grid for mean log-likelihood targets.
pub fn loglik_alpha_grid() -> alloc::vec::Vec<f64> {
    (-4..=4).map(|e| crate::math::powi(10.0, e)).collect()
}

/// The six benchmark tasks and the derived targets a prediction run accepts.
pub const BENCHMARK_TASKS: [&str; 6] = ["ARC", "HellaSwag", "MMLU", "TruthfulQA", "Winogrande", "GSM8K"];
pub const TASK_MEAN: &str = "6-TaskMean";
pub const MEAN_LOGLIK: &str = "mean_loglik";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let b = benchmark_alpha_grid();
        assert_eq!(b.len(), 9);
        assert_eq!(b[0], 10.0);
        assert_eq!(b[8], 1e9);
        let l = loglik_alpha_grid();
        assert_eq!(l.len(), 9);
        assert!((l[0] - 1e-4).abs() < 1e-18);
        assert_eq!(l[8], 1e4);
    }
}
