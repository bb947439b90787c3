//! Exact t-SNE: dense O(K²) affinities and gradients.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use super::{EmbeddingMethod, EmbeddingResult};
use crate::error::{Error, Result};
use crate::geometry::pairwise_sq_distances;
use crate::math;
use crate::rng::SplitMix64;

const SEARCH_STEPS: usize = 50;
const ENTROPY_TOL: f64 = 1e-5;
const EXAGGERATION: f64 = 12.0;
const INIT_SD: f64 = 1e-4;
const MIN_GAIN: f64 = 0.01;
const FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            seed: 0,
        }
    }
}

/// Row-conditional affinities `p_{j|i}` with per-row precision chosen so the
/// row's perplexity matches the target.
#[derive(Debug, Clone, PartialEq)]
pub struct Affinities {
    pub conditional: DMatrix<f64>,
    /// Precision `β_i = 1 / (2σ_i²)` per row.
    pub betas: Vec<f64>,
    /// `exp(H_i)` reached by the search, H in nats.
    pub achieved_perplexity: Vec<f64>,
}

/// Row distribution and its entropy at precision `beta`. Distances are
/// shifted by the row minimum first; the shift cancels on normalization.
fn row_at(dist: &DMatrix<f64>, i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let k = dist.nrows();
    let d_min = (0..k)
        .filter(|&j| j != i)
        .map(|j| dist[(i, j)])
        .fold(f64::INFINITY, f64::min);
    let mut z = 0.0;
    let mut weighted = 0.0;
    for j in 0..k {
        if j == i {
            out[j] = 0.0;
            continue;
        }
        let d = dist[(i, j)] - d_min;
        let p = math::exp(-beta * d);
        out[j] = p;
        z += p;
        weighted += d * p;
    }
    for p in out.iter_mut() {
        *p /= z;
    }
    math::ln(z) + beta * weighted / z
}

/// Binary search on each row's precision: 50 steps at most, stopping once
/// the entropy is within 1e-5 nats of `ln(perplexity)`. The search starts
/// at the inverse mean distance of the row.
pub fn conditional_affinities(dist: &DMatrix<f64>, perplexity: f64) -> Affinities {
    let k = dist.nrows();
    let target = math::ln(perplexity);
    let mut conditional = DMatrix::zeros(k, k);
    let mut betas = Vec::with_capacity(k);
    let mut achieved = Vec::with_capacity(k);
    let mut row = alloc::vec![0.0; k];
    for i in 0..k {
        let mean_d = (0..k).filter(|&j| j != i).map(|j| dist[(i, j)]).sum::<f64>() / (k - 1) as f64;
        let mut beta = if mean_d > 0.0 { 1.0 / mean_d } else { 1.0 };
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut h = row_at(dist, i, beta, &mut row);
        for _ in 0..SEARCH_STEPS {
            let diff = h - target;
            if diff.abs() < ENTROPY_TOL {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_infinite() {
                    beta * 2.0
                } else {
                    (beta + hi) / 2.0
                };
            } else {
                hi = beta;
                beta = if lo.is_infinite() {
                    beta / 2.0
                } else {
                    (beta + lo) / 2.0
                };
            }
            h = row_at(dist, i, beta, &mut row);
        }
        for j in 0..k {
            conditional[(i, j)] = row[j];
        }
        betas.push(beta);
        achieved.push(math::exp(h));
    }
    Affinities {
        conditional,
        betas,
        achieved_perplexity: achieved,
    }
}

/// Embed the rows of `data` in two dimensions.
///
/// Early exaggeration 12 and momentum 0.5 hold for the first quarter of the
/// iterations, then momentum rises to 0.8. Steps use per-coordinate gains
/// (+0.2 on a sign flip, ×0.8 otherwise, floor 0.01), and the layout is
/// recentered after every step. Initial points are N(0, 1e-4²) draws from
/// [`SplitMix64`] seeded with `params.seed`.
pub fn tsne(data: &DMatrix<f64>, params: &TsneParams) -> Result<EmbeddingResult> {
    let k = data.nrows();
    let perplexity = params.perplexity;
    if !(perplexity > 1.0) {
        return Err(Error::range("perplexity", alloc::format!("{perplexity} must exceed 1")));
    }
    if (k as f64) < 3.0 * perplexity + 1.0 {
        return Err(Error::range(
            "perplexity",
            alloc::format!("{k} points cannot support perplexity {perplexity}; need K >= 3·perplexity + 1"),
        ));
    }
    crate::matrix::check_finite(data)?;

    let dist = pairwise_sq_distances(data);
    let aff = conditional_affinities(&dist, perplexity);
    let mut p = DMatrix::from_fn(k, k, |i, j| {
        (aff.conditional[(i, j)] + aff.conditional[(j, i)]) / (2.0 * k as f64)
    });
    for i in 0..k {
        for j in 0..k {
            p[(i, j)] = if i == j { 0.0 } else { p[(i, j)].max(FLOOR) };
        }
    }

    let mut rng = SplitMix64::new(params.seed);
    let mut y = DMatrix::from_fn(k, 2, |_, _| 0.0);
    for i in 0..k {
        for c in 0..2 {
            y[(i, c)] = INIT_SD * rng.normal();
        }
    }
    let mut update = DMatrix::<f64>::zeros(k, 2);
    let mut gains = DMatrix::<f64>::from_element(k, 2, 1.0);
    let mut num = DMatrix::<f64>::zeros(k, k);
    let mut grad = DMatrix::<f64>::zeros(k, 2);
    let switch = params.iterations / 4;

    for iter in 0..params.iterations {
        let (exaggeration, momentum) = if iter < switch { (EXAGGERATION, 0.5) } else { (1.0, 0.8) };
        let mut z = 0.0;
        for i in 0..k {
            for j in (i + 1)..k {
                let dx = y[(i, 0)] - y[(j, 0)];
                let dy = y[(i, 1)] - y[(j, 1)];
                let v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[(i, j)] = v;
                num[(j, i)] = v;
                z += 2.0 * v;
            }
        }
        for i in 0..k {
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in 0..k {
                if i == j {
                    continue;
                }
                let q = (num[(i, j)] / z).max(FLOOR);
                let m = (exaggeration * p[(i, j)] - q) * num[(i, j)];
                gx += m * (y[(i, 0)] - y[(j, 0)]);
                gy += m * (y[(i, 1)] - y[(j, 1)]);
            }
            grad[(i, 0)] = 4.0 * gx;
            grad[(i, 1)] = 4.0 * gy;
        }
        for i in 0..k {
            for c in 0..2 {
                let g = grad[(i, c)];
                let u = update[(i, c)];
                let gain = &mut gains[(i, c)];
                *gain = if (g > 0.0) != (u > 0.0) {
                    *gain + 0.2
                } else {
                    *gain * 0.8
                };
                if *gain < MIN_GAIN {
                    *gain = MIN_GAIN;
                }
                let step = momentum * u - params.learning_rate * *gain * g;
                update[(i, c)] = step;
                y[(i, c)] += step;
            }
        }
        for c in 0..2 {
            let mean = y.column(c).sum() / k as f64;
            for i in 0..k {
                y[(i, c)] -= mean;
            }
        }
    }

    let mut out = BTreeMap::new();
    out.insert("perplexity".into(), perplexity);
    out.insert("iterations".into(), params.iterations as f64);
    out.insert("learning_rate".into(), params.learning_rate);
    Ok(EmbeddingResult {
        model_ids: (0..k).map(|i| alloc::format!("m{i}")).collect(),
        coords: y,
        method: EmbeddingMethod::Tsne,
        seed: params.seed,
        params: out,
    })
}
