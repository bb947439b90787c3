//! Divergence geometry on model coordinates.
//!
//! For double-centered coordinates `q`, `‖q_i − q_j‖² / N` estimates
//! `2·KL(p_i, p_j)`; [`kl_matrix`] reports KL itself, i.e. divides by `2N`.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::ModelCoordinates;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceUnit {
    NatsPerText,
    BitsPerByte,
}

impl DivergenceUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            DivergenceUnit::NatsPerText => "nats_per_text",
            DivergenceUnit::BitsPerByte => "bits_per_byte",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nats_per_text" | "nats" => Some(DivergenceUnit::NatsPerText),
            "bits_per_byte" | "bpb" => Some(DivergenceUnit::BitsPerByte),
            _ => None,
        }
    }
}

impl fmt::Display for DivergenceUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Symmetric K×K estimated KL divergences with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceMatrix {
    pub model_ids: Vec<String>,
    pub values: DMatrix<f64>,
    pub unit: DivergenceUnit,
    /// Set once the matrix has been converted per byte.
    pub mean_text_bytes: Option<f64>,
}

/// Pairwise `‖r_i − r_j‖²` over the rows of `rows`, upper triangle mirrored.
pub fn pairwise_sq_distances(rows: &DMatrix<f64>) -> DMatrix<f64> {
    let (k, n) = rows.shape();
    let mut out = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in (i + 1)..k {
            let mut acc = 0.0;
            for s in 0..n {
                let d = rows[(i, s)] - rows[(j, s)];
                acc += d * d;
            }
            out[(i, j)] = acc;
            out[(j, i)] = acc;
        }
    }
    out
}

/// KL estimates in nats per text: `‖q_i − q_j‖² / (2N)`.
pub fn kl_matrix(coords: &ModelCoordinates) -> Result<DivergenceMatrix> {
    let n = coords.q.ncols();
    if n < 2 {
        return Err(Error::range("text count", alloc::format!("need N >= 2, got {n}")));
    }
    let values = pairwise_sq_distances(&coords.q) / (2.0 * n as f64);
    Ok(DivergenceMatrix {
        model_ids: coords.model_ids.clone(),
        values,
        unit: DivergenceUnit::NatsPerText,
        mean_text_bytes: None,
    })
}

/// Multiplier taking nats per text to bits per byte.
pub fn bits_per_byte_factor(mean_text_bytes: f64) -> f64 {
    1.0 / mean_text_bytes / core::f64::consts::LN_2
}

pub fn to_bits_per_byte(div: &DivergenceMatrix, mean_text_bytes: f64) -> Result<DivergenceMatrix> {
    if div.unit != DivergenceUnit::NatsPerText {
        return Err(Error::Unit {
            expected: DivergenceUnit::NatsPerText.as_str(),
            found: div.unit.as_str(),
        });
    }
    if !(mean_text_bytes > 0.0 && mean_text_bytes.is_finite()) {
        return Err(Error::range("mean_text_bytes", alloc::format!("{mean_text_bytes}")));
    }
    Ok(DivergenceMatrix {
        model_ids: div.model_ids.clone(),
        values: &div.values * bits_per_byte_factor(mean_text_bytes),
        unit: DivergenceUnit::BitsPerByte,
        mean_text_bytes: Some(mean_text_bytes),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    pub query_model_id: String,
    /// `(model_id, divergence)`, nearest first.
    pub neighbors: Vec<(String, f64)>,
    pub unit: DivergenceUnit,
}

/// The `k` models closest to `query`; equal divergences go to the
/// lexicographically smaller ID first.
pub fn nearest_neighbors(div: &DivergenceMatrix, query: &str, k: usize) -> Result<NeighborTable> {
    let qi = div
        .model_ids
        .iter()
        .position(|id| id == query)
        .ok_or_else(|| Error::UnknownId(query.into()))?;
    let others = div.model_ids.len() - 1;
    if k == 0 || k > others {
        return Err(Error::range("k", alloc::format!("{k} not in 1..={others}")));
    }
    let mut row: Vec<(usize, f64)> = (0..div.model_ids.len())
        .filter(|&j| j != qi)
        .map(|j| (j, div.values[(qi, j)]))
        .collect();
    row.sort_by(|a, b| match a.1.total_cmp(&b.1) {
        Ordering::Equal => div.model_ids[a.0].cmp(&div.model_ids[b.0]),
        o => o,
    });
    Ok(NeighborTable {
        query_model_id: query.into(),
        neighbors: row
            .into_iter()
            .take(k)
            .map(|(j, d)| (div.model_ids[j].clone(), d))
            .collect(),
        unit: div.unit,
    })
}

/// `‖ℓ_i − ℓ_j‖² = ‖q_i − q_j‖² + (h_i − h_j)²` with height `h_i = √N ℓ̄_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightDecomposition {
    pub height: DVector<f64>,
    pub horizontal_sq: DMatrix<f64>,
    pub total_sq: DMatrix<f64>,
}

impl HeightDecomposition {
    pub fn vertical_sq(&self, i: usize, j: usize) -> f64 {
        let d = self.height[i] - self.height[j];
        d * d
    }
}

/// Built from ℓ̄ and q only. The ξ̄ term drops out of pairwise differences
/// and q is orthogonal to the all-ones direction, so the total needs no
/// access to ℓ.
pub fn decompose(coords: &ModelCoordinates) -> HeightDecomposition {
    let k = coords.q.nrows();
    let root_n = math::sqrt(coords.q.ncols() as f64);
    let height = coords.mean_loglik.map(|m| root_n * m);
    let horizontal_sq = pairwise_sq_distances(&coords.q);
    let total_sq = DMatrix::from_fn(k, k, |i, j| {
        let d = height[i] - height[j];
        horizontal_sq[(i, j)] + d * d
    });
    HeightDecomposition {
        height,
        horizontal_sq,
        total_sq,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn coords(rows: usize, cols: usize, v: &[f64]) -> ModelCoordinates {
        ModelCoordinates::from_values(&DMatrix::from_row_slice(rows, cols, v))
    }

    fn div_from(ids: &[&str], values: DMatrix<f64>) -> DivergenceMatrix {
        DivergenceMatrix {
            model_ids: ids.iter().map(|s| String::from(*s)).collect(),
            values,
            unit: DivergenceUnit::NatsPerText,
            mean_text_bytes: None,
        }
    }

    #[test]
    fn identical_rows_have_zero_divergence() {
        let d = kl_matrix(&coords(2, 3, &[-1.0, -2.0, -3.0, -1.0, -2.0, -3.0])).unwrap();
        assert_eq!(d.values, DMatrix::zeros(2, 2));
    }

    #[test]
    fn hand_worked_kl() {
        // q rows already double centered: (1,-1) and (-1,1).
        let c = coords(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(c.q, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let d = kl_matrix(&c).unwrap();
        // ‖Δ‖² = 8, KL = 8 / (2·2)
        assert_eq!(d.values[(0, 1)], 2.0);
        assert_eq!(d.values[(1, 0)], 2.0);
        assert_eq!(d.values[(0, 0)], 0.0);
    }

    #[test]
    fn single_text_is_rejected() {
        assert!(kl_matrix(&coords(2, 1, &[-1.0, -2.0])).is_err());
    }

    #[test]
    fn bits_per_byte_worked_example() {
        let d = div_from(&["a", "b"], DMatrix::from_row_slice(2, 2, &[0.0, 1000.0, 1000.0, 0.0]));
        let b = to_bits_per_byte(&d, 972.3188).unwrap();
        assert_eq!(b.unit, DivergenceUnit::BitsPerByte);
        assert!((b.values[(0, 1)] - 1.484).abs() < 1e-3);
        assert!((1000.0f64 / 972.3188 - 1.028).abs() < 1e-3);
        assert!((bits_per_byte_factor(972.3188) - 0.001484).abs() < 1e-6);
        assert_eq!(b.values[(0, 0)], 0.0);
        assert!(to_bits_per_byte(&b, 972.3188).is_err());
        assert!(to_bits_per_byte(&d, 0.0).is_err());
    }

    #[test]
    fn neighbor_order_and_ties() {
        let v = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 3.0, 1.0, 2.0, //
                3.0, 0.0, 1.0, 1.0, //
                1.0, 1.0, 0.0, 1.0, //
                2.0, 1.0, 1.0, 0.0,
            ],
        );
        let d = div_from(&["q", "b", "c", "d"], v);
        let t = nearest_neighbors(&d, "q", 3).unwrap();
        let ids: Vec<&str> = t.neighbors.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, vec!["c", "d", "b"]);

        let d2 = div_from(&["z", "y", "x", "w"], d.values.clone());
        let t = nearest_neighbors(&d2, "x", 3).unwrap();
        let ids: Vec<&str> = t.neighbors.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, vec!["w", "y", "z"]);

        assert!(nearest_neighbors(&d, "nope", 1).is_err());
        assert!(nearest_neighbors(&d, "q", 0).is_err());
        assert!(nearest_neighbors(&d, "q", 4).is_err());
    }

    #[test]
    fn two_models_any_k() {
        let d = div_from(&["a", "b"], DMatrix::from_row_slice(2, 2, &[0.0, 5.0, 5.0, 0.0]));
        let t = nearest_neighbors(&d, "a", 1).unwrap();
        assert_eq!(t.neighbors, vec![(String::from("b"), 5.0)]);
    }

    #[test]
    fn decomposition_hand_example() {
        let c = coords(2, 2, &[1.0, 3.0, 2.0, 2.0]);
        let h = decompose(&c);
        assert_eq!(h.total_sq[(0, 1)], 2.0);
        assert_eq!(h.horizontal_sq[(0, 1)], 2.0);
        assert_eq!(h.vertical_sq(0, 1), 0.0);
    }

    #[test]
    fn identical_models_decompose_to_zero() {
        let h = decompose(&coords(2, 3, &[-1.0, -4.0, -2.0, -1.0, -4.0, -2.0]));
        assert_eq!(h.total_sq[(0, 1)], 0.0);
        assert_eq!(h.horizontal_sq[(0, 1)], 0.0);
        assert_eq!(h.vertical_sq(0, 1), 0.0);
    }

    fn arrays() -> impl Strategy<Value = DMatrix<f64>> {
        (2usize..7, 2usize..30).prop_flat_map(|(k, n)| {
            proptest::collection::vec(-200.0f64..0.0, k * n).prop_map(move |v| DMatrix::from_row_slice(k, n, &v))
        })
    }

    proptest! {
        #[test]
        fn total_matches_brute_force(l in arrays()) {
            let h = decompose(&ModelCoordinates::from_values(&l));
            let direct = pairwise_sq_distances(&l);
            for i in 0..l.nrows() {
                for j in 0..l.nrows() {
                    let scale = direct[(i, j)].max(1.0);
                    prop_assert!((h.total_sq[(i, j)] - direct[(i, j)]).abs() <= 1e-9 * scale);
                }
            }
        }

        #[test]
        fn kl_is_half_the_difference_variance(l in arrays()) {
            let d = kl_matrix(&ModelCoordinates::from_values(&l)).unwrap();
            for i in 0..l.nrows() {
                for j in 0..l.nrows() {
                    let diff: Vec<f64> = (0..l.ncols()).map(|s| l[(i, s)] - l[(j, s)]).collect();
                    let v = math::pop_variance(&diff) / 2.0;
                    prop_assert!((d.values[(i, j)] - v).abs() <= 1e-9 * v.max(1.0));
                }
            }
        }

        #[test]
        fn sqrt_kl_is_a_metric(l in arrays()) {
            let d = kl_matrix(&ModelCoordinates::from_values(&l)).unwrap();
            let k = l.nrows();
            for a in 0..k { for b in 0..k { for c in 0..k {
                let ab = math::sqrt(d.values[(a, b)]);
                let bc = math::sqrt(d.values[(b, c)]);
                let ac = math::sqrt(d.values[(a, c)]);
                prop_assert!(ac <= ab + bc + 1e-9 * (ab + bc).max(1.0));
            }}}
        }

        #[test]
        fn invariant_to_row_and_column_shifts(
            l in arrays(),
            rs in proptest::collection::vec(-50.0f64..50.0, 7),
            cs in proptest::collection::vec(-50.0f64..50.0, 30),
        ) {
            let shifted = DMatrix::from_fn(l.nrows(), l.ncols(), |i, s| l[(i, s)] + rs[i] + cs[s]);
            let a = kl_matrix(&ModelCoordinates::from_values(&l)).unwrap();
            let b = kl_matrix(&ModelCoordinates::from_values(&shifted)).unwrap();
            let scale = a.values.amax().max(1.0);
            prop_assert!((a.values - b.values).amax() <= 1e-9 * scale * 100.0);
        }

        #[test]
        fn conversion_preserves_rankings(l in arrays(), bytes in 1.0f64..5000.0) {
            let nats = kl_matrix(&ModelCoordinates::from_values(&l)).unwrap();
            let bits = to_bits_per_byte(&nats, bytes).unwrap();
            let k = l.nrows();
            for q in 0..k {
                let id = nats.model_ids[q].clone();
                let a = nearest_neighbors(&nats, &id, k - 1).unwrap();
                let b = nearest_neighbors(&bits, &id, k - 1).unwrap();
                let ia: Vec<_> = a.neighbors.iter().map(|x| &x.0).collect();
                let ib: Vec<_> = b.neighbors.iter().map(|x| &x.0).collect();
                prop_assert_eq!(ia, ib);
            }
        }
    }

    #[test]
    fn unit_names_round_trip() {
        for u in [DivergenceUnit::NatsPerText, DivergenceUnit::BitsPerByte] {
            assert_eq!(DivergenceUnit::parse(u.as_str()), Some(u));
        }
        assert_eq!(DivergenceUnit::parse("furlongs"), None);
    }
}
