//! Standardized-score analytics over models: primary category and task,
//! the leakage indicator, rank correlations and the additive error
//! decomposition of a log-likelihood matrix.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::LogLikMatrix;

/// Column-wise z-scores using the population (divide-by-K) deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedScores {
    pub axis_labels: Vec<String>,
    pub per_model: DMatrix<f64>,
    pub raw_means: DMatrix<f64>,
    pub population_mean: Vec<f64>,
    pub population_std: Vec<f64>,
}

fn column_stats(raw: &DMatrix<f64>, c: usize) -> (f64, f64) {
    let col: Vec<f64> = raw.column(c).iter().copied().collect();
    (math::mean(&col), math::sqrt(math::pop_variance(&col)))
}

pub fn standardize_columns(raw: &DMatrix<f64>, labels: &[String]) -> Result<StandardizedScores> {
    if labels.len() != raw.ncols() {
        return Err(Error::Shape(alloc::format!(
            "{} labels for {} columns",
            labels.len(),
            raw.ncols()
        )));
    }
    let (k, m) = raw.shape();
    let mut means = Vec::with_capacity(m);
    let mut stds = Vec::with_capacity(m);
    for (c, label) in labels.iter().enumerate() {
        let (mean, std) = column_stats(raw, c);
        if !(std > 0.0) {
            return Err(Error::Constant(alloc::format!("column `{label}` has zero spread")));
        }
        means.push(mean);
        stds.push(std);
    }
    let per_model = DMatrix::from_fn(k, m, |i, c| (raw[(i, c)] - means[c]) / stds[c]);
    Ok(StandardizedScores {
        axis_labels: labels.to_vec(),
        per_model,
        raw_means: raw.clone(),
        population_mean: means,
        population_std: stds,
    })
}

/// Index of the largest entry; the first one wins ties.
fn argmax(xs: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in xs.enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best.0
}

/// For each model, the text category with the highest standardized mean
/// log-likelihood. Categories are ordered by name and the first wins ties.
/// A category whose means are equal across all models contributes z = 0.
pub fn primary_category(matrix: &LogLikMatrix) -> Result<(StandardizedScores, Vec<String>)> {
    let mut by_cat: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (s, t) in matrix.texts().iter().enumerate() {
        if t.category.is_empty() {
            return Err(Error::UnknownId(alloc::format!("category of text `{}`", t.text_id)));
        }
        by_cat.entry(t.category.as_str()).or_default().push(s);
    }
    let labels: Vec<String> = by_cat.keys().map(|c| String::from(*c)).collect();
    let values = matrix.values();
    let k = matrix.n_models();
    let raw = DMatrix::from_fn(k, labels.len(), |i, c| {
        let cols = &by_cat[labels[c].as_str()];
        cols.iter().map(|&s| values[(i, s)]).sum::<f64>() / cols.len() as f64
    });
    let mut means = Vec::new();
    let mut stds = Vec::new();
    let mut z = DMatrix::zeros(k, labels.len());
    for c in 0..labels.len() {
        let (mean, std) = column_stats(&raw, c);
        means.push(mean);
        stds.push(std);
        if std > 0.0 {
            for i in 0..k {
                z[(i, c)] = (raw[(i, c)] - mean) / std;
            }
        }
    }
    let assigned = (0..k)
        .map(|i| labels[argmax(z.row(i).iter().copied())].clone())
        .collect();
    Ok((
        StandardizedScores {
            axis_labels: labels,
            per_model: z,
            raw_means: raw,
            population_mean: means,
            population_std: stds,
        },
        assigned,
    ))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrimaryTask {
    Task(String),
    /// Every standardized task score is below zero.
    AllUnder0,
}

impl fmt::Display for PrimaryTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrimaryTask::Task(t) => f.write_str(t),
            PrimaryTask::AllUnder0 => f.write_str("AllUnder0"),
        }
    }
}

/// Argmax of standardized benchmark scores per model, task list order
/// breaking ties.
pub fn primary_task(scores: &DMatrix<f64>, task_names: &[String]) -> Result<(StandardizedScores, Vec<PrimaryTask>)> {
    let z = standardize_columns(scores, task_names)?;
    let labels = (0..scores.nrows())
        .map(|i| {
            let row = z.per_model.row(i);
            if row.iter().all(|&v| v < 0.0) {
                PrimaryTask::AllUnder0
            } else {
                PrimaryTask::Task(task_names[argmax(row.iter().copied())].clone())
            }
        })
        .collect();
    Ok((z, labels))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageReport {
    /// z(mean log-likelihood) − z(benchmark mean), per model.
    pub per_model: Vec<f64>,
    /// Indices of models whose score exceeds the threshold.
    pub flagged: Vec<usize>,
    pub threshold: f64,
}

pub fn leakage_scores(mean_loglik: &[f64], bench_mean: &[f64], threshold: f64) -> Result<LeakageReport> {
    if mean_loglik.len() != bench_mean.len() {
        return Err(Error::Shape("leakage inputs differ in length".into()));
    }
    let z = |xs: &[f64], what: &str| -> Result<Vec<f64>> {
        let m = math::mean(xs);
        let sd = math::sqrt(math::pop_variance(xs));
        if !(sd > 0.0) {
            return Err(Error::Constant(alloc::format!("{what} is constant")));
        }
        Ok(xs.iter().map(|x| (x - m) / sd).collect())
    };
    let a = z(mean_loglik, "mean log-likelihood")?;
    let b = z(bench_mean, "benchmark mean")?;
    let per_model: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let flagged = per_model
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > threshold)
        .map(|(i, _)| i)
        .collect();
    Ok(LeakageReport {
        per_model,
        flagged,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationReport {
    pub pearson_r: f64,
    pub spearman_rho: f64,
    pub n: usize,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape("correlation inputs differ in length".into()));
    }
    if x.len() < 2 {
        return Err(Error::range("n", "correlation needs at least 2 pairs"));
    }
    let mx = math::mean(x);
    let my = math::mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Constant("correlation input is constant".into()));
    }
    Ok((sxy / math::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = alloc::vec![0.0; x.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end + 1 < idx.len() && x[idx[end + 1]] == x[idx[start]] {
            end += 1;
        }
        let rank = (start + end) as f64 / 2.0 + 1.0;
        for &i in &idx[start..=end] {
            ranks[i] = rank;
        }
        start = end + 1;
    }
    ranks
}

pub fn correlations(pred: &[f64], actual: &[f64]) -> Result<CorrelationReport> {
    let pearson_r = pearson(pred, actual)?;
    let spearman_rho = pearson(&average_ranks(pred), &average_ranks(actual))?;
    Ok(CorrelationReport {
        pearson_r,
        spearman_rho,
        n: pred.len(),
    })
}

/// `ε_is = a + b_i + c_s + d_is` with Σb = Σc = 0 and zero row and column
/// sums in d.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDecomposition {
    pub a: f64,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: DMatrix<f64>,
}

impl ErrorDecomposition {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d.nrows(), self.d.ncols(), |i, s| {
            self.a + self.b[i] + self.c[s] + self.d[(i, s)]
        })
    }
}

pub fn decompose_error(eps: &DMatrix<f64>) -> ErrorDecomposition {
    let (k, n) = eps.shape();
    let row_means = DVector::from_fn(k, |i, _| eps.row(i).sum() / n as f64);
    let col_means = DVector::from_fn(n, |s, _| eps.column(s).sum() / k as f64);
    let a = row_means.sum() / k as f64;
    let b = row_means.map(|r| r - a);
    let c = col_means.map(|m| m - a);
    let d = DMatrix::from_fn(k, n, |i, s| eps[(i, s)] - a - b[i] - c[s]);
    ErrorDecomposition { a, b, c, d }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{double_center_values, ModelRecord, TextRecord};
    use crate::rng::SplitMix64;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| String::from(*s)).collect()
    }

    #[test]
    fn two_point_column() {
        let z = standardize_columns(&DMatrix::from_row_slice(2, 1, &[0.0, 10.0]), &labels(&["x"])).unwrap();
        assert_eq!(z.per_model.as_slice(), &[-1.0, 1.0]);
        assert_eq!(z.population_mean, vec![5.0]);
        assert_eq!(z.population_std, vec![5.0]);
    }

    #[test]
    fn constant_column_is_an_error() {
        let raw = DMatrix::from_row_slice(3, 1, &[2.0, 2.0, 2.0]);
        assert!(matches!(
            standardize_columns(&raw, &labels(&["x"])),
            Err(Error::Constant(_))
        ));
    }

    proptest! {
        #[test]
        fn standardize_is_idempotent_and_affine_invariant(
            v in proptest::collection::vec(-50.0f64..50.0, 3..20),
            scale in 0.1f64..10.0,
            shift in -100.0f64..100.0,
        ) {
            prop_assume!(math::pop_variance(&v) > 1e-6);
            let raw = DMatrix::from_column_slice(v.len(), 1, &v);
            let z = standardize_columns(&raw, &labels(&["x"])).unwrap();
            let zz = standardize_columns(&z.per_model, &labels(&["x"])).unwrap();
            prop_assert!((&zz.per_model - &z.per_model).amax() < 1e-12);
            let mean = z.per_model.sum() / v.len() as f64;
            prop_assert!(mean.abs() < 1e-9);
            let var: f64 = z.per_model.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
            prop_assert!((var - 1.0).abs() < 1e-9);
            let moved = raw.map(|x| scale * x + shift);
            let z2 = standardize_columns(&moved, &labels(&["x"])).unwrap();
            prop_assert!((&z2.per_model - &z.per_model).amax() < 1e-9);
        }
    }

    fn llm(values: &[f64], k: usize, cats: &[&str]) -> LogLikMatrix {
        let models = (0..k).map(|i| ModelRecord::new(alloc::format!("m{i}"), "t")).collect();
        let texts = cats
            .iter()
            .enumerate()
            .map(|(s, c)| TextRecord::new(alloc::format!("x{s}"), *c, 10))
            .collect();
        LogLikMatrix::new(models, texts, DMatrix::from_row_slice(k, cats.len(), values)).unwrap()
    }

    #[test]
    fn primary_category_examples() {
        let m = llm(&[-1.0, -3.0, -3.0, -1.0], 2, &["A", "B"]);
        let (z, cats) = primary_category(&m).unwrap();
        assert_eq!(cats, labels(&["A", "B"]));
        assert_eq!(z.per_model.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, -1.0]);

        let one = llm(&[-1.0, -2.0, -5.0, -3.0], 2, &["Only", "Only"]);
        assert_eq!(primary_category(&one).unwrap().1, labels(&["Only", "Only"]));
    }

    #[test]
    fn primary_category_shift_invariance() {
        let mut rng = SplitMix64::new(4);
        let cats = ["A", "B", "A", "C", "B", "C", "C"];
        let k = 6;
        let vals: Vec<f64> = (0..k * cats.len()).map(|_| -50.0 + 10.0 * rng.normal()).collect();
        let base = primary_category(&llm(&vals, k, &cats)).unwrap().1;
        // A per-model shift also moves that model inside every category
        // column and changes the column spreads, so only per-category
        // shifts are an exact invariance.
        let cat_only: Vec<f64> = vals
            .iter()
            .enumerate()
            .map(|(idx, v)| v + if cats[idx % cats.len()] == "B" { 17.0 } else { 0.0 })
            .collect();
        assert_eq!(primary_category(&llm(&cat_only, k, &cats)).unwrap().1, base);
    }

    #[test]
    fn primary_task_examples() {
        let names = labels(&["ARC", "MMLU"]);
        // model 0 tops both tasks: tie on z goes to the first task.
        let s = DMatrix::from_row_slice(3, 2, &[90.0, 90.0, 50.0, 60.0, 60.0, 30.0]);
        let (_, t) = primary_task(&s, &names).unwrap();
        assert_eq!(t[0], PrimaryTask::Task("ARC".into()));
        // model 2 is below the mean on both tasks, models 0 and 1 straddle.
        let s = DMatrix::from_row_slice(3, 2, &[80.0, 40.0, 40.0, 80.0, 10.0, 10.0]);
        let (_, t) = primary_task(&s, &names).unwrap();
        assert_eq!(t[2], PrimaryTask::AllUnder0);
        assert_eq!(t[2].to_string(), "AllUnder0");
        assert_eq!(t[0], PrimaryTask::Task("ARC".into()));
        assert_eq!(t[1], PrimaryTask::Task("MMLU".into()));
        let flat = DMatrix::from_row_slice(2, 2, &[1.0, 5.0, 1.0, 6.0]);
        assert!(primary_task(&flat, &names).is_err());
    }

    #[test]
    fn leakage_examples() {
        let ll = [-100.0, -90.0, -80.0, -70.0];
        let bench = [20.0, 40.0, 60.0, 80.0];
        let r = leakage_scores(&ll, &bench, 1.0).unwrap();
        assert!(r.per_model.iter().all(|v| v.abs() < 1e-12));
        assert!(r.flagged.is_empty());

        let ll = [-100.0, -90.0, -80.0, -10.0];
        let bench = [20.0, 60.0, 80.0, 40.0];
        let r = leakage_scores(&ll, &bench, 1.0).unwrap();
        let top = argmax(r.per_model.iter().copied());
        assert_eq!(top, 3);
        assert_eq!(r.flagged, vec![3]);
        assert!(r.per_model.iter().sum::<f64>().abs() < 1e-12);
        assert!(leakage_scores(&[1.0, 1.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn correlation_examples() {
        let actual = [1.0, 2.0, 4.0, 8.0, 3.0];
        let pred: Vec<f64> = actual.iter().map(|a| 2.0 * a + 3.0).collect();
        let r = correlations(&pred, &actual).unwrap();
        assert!((r.pearson_r - 1.0).abs() < 1e-12 && (r.spearman_rho - 1.0).abs() < 1e-12);

        let pred: Vec<f64> = actual.iter().map(|a| math::exp(*a)).collect();
        let r = correlations(&pred, &actual).unwrap();
        assert!((r.spearman_rho - 1.0).abs() < 1e-12);
        assert!(r.pearson_r < 1.0 - 1e-6);

        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 3.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 40.0]), vec![1.0, 2.5, 2.5, 4.0]);
        let r = correlations(&[1.0, 2.0, 2.0, 3.0], &[10.0, 20.0, 20.0, 40.0]).unwrap();
        assert!((r.spearman_rho - 1.0).abs() < 1e-12);

        assert!(correlations(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    proptest! {
        #[test]
        fn spearman_ignores_monotone_maps(v in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..30)) {
            let x: Vec<f64> = v.iter().map(|p| p.0).collect();
            let y: Vec<f64> = v.iter().map(|p| p.1).collect();
            prop_assume!(math::pop_variance(&x) > 1e-9 && math::pop_variance(&y) > 1e-9);
            let base = correlations(&x, &y).unwrap();
            let fx: Vec<f64> = x.iter().map(|a| math::exp(*a) + a * a * a).collect();
            let moved = correlations(&fx, &y).unwrap();
            prop_assert!((base.spearman_rho - moved.spearman_rho).abs() < 1e-12);
            prop_assert!(base.pearson_r.abs() <= 1.0 && base.spearman_rho.abs() <= 1.0);
        }
    }

    #[test]
    fn error_decomposition_examples() {
        let e = decompose_error(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(e.a, 2.5);
        assert_eq!(e.b.as_slice(), &[-1.0, 1.0]);
        assert_eq!(e.c.as_slice(), &[-0.5, 0.5]);
        assert!(e.d.iter().all(|&v| v == 0.0));

        let b = [0.5, -1.5, 1.0];
        let c = [2.0, -2.0, 0.25, -0.25];
        let additive = DMatrix::from_fn(3, 4, |i, s| b[i] + c[s]);
        let e = decompose_error(&additive);
        assert!(e.d.amax() < 1e-15);
        assert!(e.a.abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn q_absorbs_only_the_interaction(
            k in 2usize..8, n in 2usize..20,
            seed in 0u64..1000,
        ) {
            let mut rng = SplitMix64::new(seed);
            let truth = DMatrix::from_fn(k, n, |_, _| -40.0 + 5.0 * rng.normal());
            let eps = DMatrix::from_fn(k, n, |_, _| rng.normal());
            let dec = decompose_error(&eps);
            prop_assert!((dec.reconstruct() - &eps).amax() < 1e-12);
            prop_assert!(dec.b.sum().abs() < 1e-9 && dec.c.sum().abs() < 1e-9);
            for i in 0..k { prop_assert!(dec.d.row(i).sum().abs() < 1e-9); }
            for s in 0..n { prop_assert!(dec.d.column(s).sum().abs() < 1e-9); }

            let q_star = double_center_values(&truth).q;
            let noisy = double_center_values(&(&truth + &eps));
            prop_assert!((&noisy.q - &q_star - &dec.d).amax() < 1e-9 * 50.0);
        }
    }
}
