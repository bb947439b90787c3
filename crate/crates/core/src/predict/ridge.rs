use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub weights: DVector<f64>,
    pub intercept: f64,
    pub alpha: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        (x * &self.weights).add_scalar(self.intercept)
    }
}

/// Solve `(G + αI) a = rhs` by Cholesky. If factorization fails, a diagonal
/// jitter starting at 1e-12 of the mean diagonal is added and grown tenfold,
/// up to eight times.
pub(crate) fn solve_regularized(gram: &DMatrix<f64>, alpha: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = gram.nrows();
    let base = (gram.trace() / n.max(1) as f64).abs().max(1.0);
    let mut jitter = 0.0;
    for attempt in 0..=8 {
        let mut m = gram.clone();
        for i in 0..n {
            m[(i, i)] += alpha + jitter;
        }
        if let Some(ch) = m.cholesky() {
            return Ok(ch.solve(rhs));
        }
        jitter = base * 1e-12 * crate::math::powi(10.0, attempt);
    }
    Err(Error::Numerical("ridge system is not positive definite".into()))
}

fn check_inputs(x: &DMatrix<f64>, y: &[f64], alpha: f64) -> Result<()> {
    if x.nrows() == 0 || x.nrows() != y.len() {
        return Err(Error::Shape(alloc::format!(
            "{} rows for {} targets",
            x.nrows(),
            y.len()
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::range("alpha", alloc::format!("{alpha} must be positive")));
    }
    crate::matrix::check_finite(x)?;
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: i, col: 0 });
    }
    Ok(())
}

/// Minimize `‖y − Xw − b‖² + α‖w‖²` with `b` unpenalized (or fixed at zero
/// when `fit_intercept` is false).
///
/// Solved in the dual: with centered `Xc`, `yc`, the weights are
/// `Xcᵀ (Xc Xcᵀ + αI)⁻¹ yc`, an n×n system instead of N×N.
pub fn fit_ridge(x: &DMatrix<f64>, y: &[f64], alpha: f64, fit_intercept: bool) -> Result<RidgeModel> {
    check_inputs(x, y, alpha)?;
    let (n, p) = x.shape();
    let (x_mean, y_mean) = if fit_intercept {
        (
            DVector::from_fn(p, |c, _| x.column(c).sum() / n as f64),
            y.iter().sum::<f64>() / n as f64,
        )
    } else {
        (DVector::zeros(p), 0.0)
    };
    let xc = DMatrix::from_fn(n, p, |i, c| x[(i, c)] - x_mean[c]);
    let yc = DVector::from_fn(n, |i, _| y[i] - y_mean);
    let gram = &xc * xc.transpose();
    let dual = solve_regularized(&gram, alpha, &yc)?;
    let weights = xc.transpose() * dual;
    let intercept = y_mean - x_mean.dot(&weights);
    Ok(RidgeModel {
        weights,
        intercept,
        alpha,
    })
}

/// Ridge fits that only touch the feature matrix through its Gram matrix,
/// so any train/test split of the same rows costs O(n³) rather than
/// O(n²N).
#[derive(Debug, Clone)]
pub struct GramRidge {
    gram: DMatrix<f64>,
}

impl GramRidge {
    pub fn new(features: &DMatrix<f64>) -> Result<Self> {
        crate::matrix::check_finite(features)?;
        Ok(Self {
            gram: features * features.transpose(),
        })
    }

    /// Fit on rows `train` with each alpha and predict rows `test`.
    /// Returns one prediction vector per alpha.
    pub fn fit_predict(
        &self,
        train: &[usize],
        y: &[f64],
        test: &[usize],
        alphas: &[f64],
        fit_intercept: bool,
    ) -> Result<Vec<Vec<f64>>> {
        let t = train.len();
        if t == 0 {
            return Err(Error::Shape("empty training set".into()));
        }
        let k_tt = DMatrix::from_fn(t, t, |a, b| self.gram[(train[a], train[b])]);
        let k_ut = DMatrix::from_fn(test.len(), t, |u, b| self.gram[(test[u], train[b])]);
        let y_t: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let (centered, cross, y_mean) = if fit_intercept {
            let row_mean = DVector::from_fn(t, |a, _| k_tt.row(a).sum() / t as f64);
            let grand = row_mean.sum() / t as f64;
            let kc = DMatrix::from_fn(t, t, |a, b| k_tt[(a, b)] - row_mean[a] - row_mean[b] + grand);
            let kx = DMatrix::from_fn(test.len(), t, |u, b| {
                let m_u = k_ut.row(u).sum() / t as f64;
                k_ut[(u, b)] - m_u - row_mean[b] + grand
            });
            (kc, kx, y_t.iter().sum::<f64>() / t as f64)
        } else {
            (k_tt, k_ut, 0.0)
        };
        let yc = DVector::from_fn(t, |a, _| y_t[a] - y_mean);
        alphas
            .iter()
            .map(|&alpha| {
                let dual = solve_regularized(&centered, alpha, &yc)?;
                let pred = &cross * dual;
                Ok(pred.iter().map(|p| p + y_mean).collect())
            })
            .collect()
    }
}
