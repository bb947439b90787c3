use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::{EmbeddingMethod, EmbeddingResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// All min(K, N) singular values, descending.
    pub singular_values: Vec<f64>,
    /// Running share of the summed squared singular values.
    pub cumulative_ratio: Vec<f64>,
}

impl SpectrumReport {
    /// Smallest number of components whose cumulative ratio reaches `level`.
    pub fn dims_for(&self, level: f64) -> usize {
        self.cumulative_ratio
            .iter()
            .position(|&r| r >= level)
            .map_or(self.cumulative_ratio.len(), |p| p + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    pub embedding: EmbeddingResult,
    pub spectrum: SpectrumReport,
    pub column_means: DVector<f64>,
    /// N×r right singular vectors, one column per component, all r = min(K, N).
    pub components: DMatrix<f64>,
    /// K×r projections of the centered rows on every component.
    pub scores: DMatrix<f64>,
}

impl PcaResult {
    /// Centered input rebuilt from the first `dims` components, plus the
    /// column means.
    pub fn reconstruct(&self, dims: usize) -> DMatrix<f64> {
        let s = self.scores.columns(0, dims);
        let v = self.components.columns(0, dims);
        let mut out = s * v.transpose();
        for mut row in out.row_iter_mut() {
            row += self.column_means.transpose();
        }
        out
    }
}

/// Principal components of the rows of `data` after column centering.
///
/// Each component's sign is chosen so that its largest-magnitude loading is
/// positive.
pub fn pca(data: &DMatrix<f64>, dims: usize) -> Result<PcaResult> {
    let (k, n) = data.shape();
    let rank = k.min(n);
    if dims == 0 || dims > rank {
        return Err(Error::range("dims", alloc::format!("{dims} not in 1..={rank}")));
    }
    crate::matrix::check_finite(data)?;
    let column_means = DVector::from_fn(n, |s, _| data.column(s).sum() / k as f64);
    let centered = DMatrix::from_fn(k, n, |i, s| data[(i, s)] - column_means[s]);

    let svd = centered.clone().svd(true, true);
    let u = svd.u.ok_or_else(|| Error::Numerical("SVD did not return U".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD did not return V".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut components = DMatrix::zeros(n, rank);
    let mut scores = DMatrix::zeros(k, rank);
    let mut singular_values = Vec::with_capacity(rank);
    for (c, &src) in order.iter().enumerate() {
        let sigma = svd.singular_values[src].max(0.0);
        singular_values.push(sigma);
        let mut loading: DVector<f64> = v_t.row(src).transpose();
        let pivot = loading
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        loading *= sign;
        components.set_column(c, &loading);
        scores.set_column(c, &(u.column(src) * (sigma * sign)));
    }

    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    let mut running = 0.0;
    let cumulative_ratio = singular_values
        .iter()
        .map(|s| {
            running += s * s;
            if total > 0.0 {
                (running / total).min(1.0)
            } else {
                1.0
            }
        })
        .collect();

    let mut params = BTreeMap::new();
    params.insert("dims".into(), dims as f64);
    let embedding = EmbeddingResult {
        model_ids: (0..k).map(|i| alloc::format!("m{i}")).collect(),
        coords: scores.columns(0, dims).into_owned(),
        method: EmbeddingMethod::Pca,
        seed: 0,
        params,
    };
    Ok(PcaResult {
        embedding,
        spectrum: SpectrumReport {
            singular_values,
            cumulative_ratio,
        },
        column_means,
        components,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random(k: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = SplitMix64::new(seed);
        DMatrix::from_fn(k, n, |_, _| rng.normal())
    }

    #[test]
    fn collinear_points_have_one_direction() {
        let data = DMatrix::from_fn(5, 3, |i, s| (i as f64) * [1.0, -2.0, 0.5][s]);
        let r = pca(&data, 1).unwrap();
        assert!((r.spectrum.cumulative_ratio[0] - 1.0).abs() < 1e-12);
        assert_eq!(r.spectrum.dims_for(0.9), 1);
    }

    #[test]
    fn worked_q_has_single_singular_value() {
        let q = DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.5, -0.5]);
        let r = pca(&q, 1).unwrap();
        // centered q is q itself; its rank is 1 with σ = ‖q‖_F = 1.
        assert!((r.spectrum.singular_values[0] - 1.0).abs() < 1e-12);
        assert!(r.spectrum.singular_values[1].abs() < 1e-12);
        assert!((r.spectrum.cumulative_ratio[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_reconstruction() {
        let data = random(10, 50, 3);
        let r = pca(&data, 2).unwrap();
        let back = r.reconstruct(10);
        assert!((back - &data).amax() < 1e-8);
    }

    #[test]
    fn spectrum_shape_and_decorrelated_scores() {
        let data = random(12, 7, 11);
        let r = pca(&data, 3).unwrap();
        let sv = &r.spectrum.singular_values;
        assert_eq!(sv.len(), 7);
        assert!(sv.windows(2).all(|w| w[0] >= w[1]));
        let cr = &r.spectrum.cumulative_ratio;
        assert!(cr.windows(2).all(|w| w[0] <= w[1]));
        assert!((cr[cr.len() - 1] - 1.0).abs() < 1e-9);
        let cov = r.scores.transpose() * &r.scores;
        let scale = cov.amax();
        for a in 0..cov.nrows() {
            for b in 0..cov.ncols() {
                if a != b {
                    assert!(cov[(a, b)].abs() <= 1e-8 * scale);
                }
            }
        }
    }

    #[test]
    fn sign_convention() {
        let r = pca(&random(6, 9, 5), 2).unwrap();
        for c in 0..r.components.ncols() {
            let col = r.components.column(c);
            let pivot = col
                .iter()
                .copied()
                .fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
            assert!(pivot >= 0.0);
        }
    }

    #[test]
    fn dims_out_of_range() {
        let d = random(3, 4, 1);
        assert!(pca(&d, 0).is_err());
        assert!(pca(&d, 4).is_err());
    }
}
