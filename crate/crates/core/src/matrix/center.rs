use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::LogLikMatrix;

/// Row-centered and double-centered views of a value array, plus the means
/// that were removed.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredValues {
    /// Per-row mean, ℓ̄_i.
    pub mean_loglik: DVector<f64>,
    /// Row-centered values, ξ.
    pub xi: DMatrix<f64>,
    /// Per-column mean of ξ, ξ̄_s.
    pub column_mean_xi: DVector<f64>,
    /// Double-centered values, q.
    pub q: DMatrix<f64>,
}

/// Model coordinates together with the IDs they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCoordinates {
    pub model_ids: Vec<String>,
    pub text_ids: Vec<String>,
    pub mean_loglik: DVector<f64>,
    pub xi: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub column_mean_xi: DVector<f64>,
    pub n_texts: usize,
}

/// Subtract row means, then column means. Sums run in index order so the
/// result does not depend on how the caller schedules work.
pub fn double_center_values(values: &DMatrix<f64>) -> CenteredValues {
    let (k, n) = values.shape();
    let mean_loglik = DVector::from_fn(k, |i, _| {
        let mut acc = 0.0;
        for s in 0..n {
            acc += values[(i, s)];
        }
        acc / n as f64
    });
    let xi = DMatrix::from_fn(k, n, |i, s| values[(i, s)] - mean_loglik[i]);
    let column_mean_xi = DVector::from_fn(n, |s, _| {
        let mut acc = 0.0;
        for i in 0..k {
            acc += xi[(i, s)];
        }
        acc / k as f64
    });
    let q = DMatrix::from_fn(k, n, |i, s| xi[(i, s)] - column_mean_xi[s]);
    CenteredValues {
        mean_loglik,
        xi,
        column_mean_xi,
        q,
    }
}

pub fn double_center(matrix: &LogLikMatrix) -> ModelCoordinates {
    let c = double_center_values(matrix.values());
    ModelCoordinates {
        model_ids: matrix.model_ids(),
        text_ids: matrix.text_ids(),
        mean_loglik: c.mean_loglik,
        xi: c.xi,
        q: c.q,
        column_mean_xi: c.column_mean_xi,
        n_texts: matrix.n_texts(),
    }
}

impl ModelCoordinates {
    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    /// Coordinates built straight from an array, with generated IDs.
    pub fn from_values(values: &DMatrix<f64>) -> Self {
        let c = double_center_values(values);
        Self {
            model_ids: (0..values.nrows()).map(|i| alloc::format!("m{i}")).collect(),
            text_ids: (0..values.ncols()).map(|s| alloc::format!("t{s}")).collect(),
            mean_loglik: c.mean_loglik,
            xi: c.xi,
            q: c.q,
            column_mean_xi: c.column_mean_xi,
            n_texts: values.ncols(),
        }
    }

    /// ℓ̄_i + ξ̄_s + q_is, which should give back the input array.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.q.nrows(), self.q.ncols(), |i, s| {
            self.mean_loglik[i] + self.column_mean_xi[s] + self.q[(i, s)]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_two_by_two() {
        let l = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 2.0]);
        let c = double_center_values(&l);
        assert_eq!(c.mean_loglik.as_slice(), &[2.0, 2.0]);
        assert_eq!(c.xi, DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, 0.0]));
        assert_eq!(c.column_mean_xi.as_slice(), &[-0.5, 0.5]);
        assert_eq!(c.q, DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.5, -0.5]));
    }

    #[test]
    fn constants_vanish() {
        let c = double_center_values(&DMatrix::from_element(3, 5, -42.25));
        assert!(c.xi.iter().all(|&v| v == 0.0));
        assert!(c.q.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_model_has_zero_q() {
        let l = DMatrix::from_row_slice(1, 4, &[-1.0, -5.0, -2.5, -9.0]);
        let c = double_center_values(&l);
        assert!(c.q.iter().all(|&v| v == 0.0));
        assert_eq!(c.column_mean_xi.as_slice(), c.xi.row(0).transpose().as_slice());
    }

    fn arrays() -> impl Strategy<Value = DMatrix<f64>> {
        (1usize..8, 1usize..25).prop_flat_map(|(k, n)| {
            proptest::collection::vec(-300.0f64..0.0, k * n).prop_map(move |v| DMatrix::from_row_slice(k, n, &v))
        })
    }

    proptest! {
        #[test]
        fn zero_means_and_reconstruction(l in arrays()) {
            let (k, n) = l.shape();
            let coords = ModelCoordinates::from_values(&l);
            let scale = l.amax().max(1.0);
            for i in 0..k {
                prop_assert!(coords.q.row(i).sum().abs() <= 1e-9 * scale * n as f64);
                prop_assert!(coords.xi.row(i).sum().abs() <= 1e-9 * scale * n as f64);
            }
            for s in 0..n {
                prop_assert!(coords.q.column(s).sum().abs() <= 1e-9 * scale * k as f64);
                for i in 0..k {
                    let diff = coords.xi[(i, s)] - coords.q[(i, s)];
                    prop_assert!((diff - coords.column_mean_xi[s]).abs() <= 1e-9 * scale);
                }
            }
            let back = coords.reconstruct();
            prop_assert!((back - &l).amax() <= 1e-9 * scale);
        }

        #[test]
        fn idempotent_on_q(l in arrays()) {
            let q = double_center_values(&l).q;
            let again = double_center_values(&q);
            let scale = l.amax().max(1.0);
            prop_assert!((again.q - &q).amax() <= 1e-9 * scale);
            prop_assert!(again.mean_loglik.amax() <= 1e-9 * scale);
            prop_assert!(again.column_mean_xi.amax() <= 1e-9 * scale);
        }
    }
}
