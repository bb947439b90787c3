//! Agglomerative clustering by Lance–Williams updates on a dense distance
//! matrix. O(K³), which is fine for the few thousand models a map holds.

use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::pairwise_sq_distances;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// `‖r_i − r_j‖²`
    SqEuclidean,
    /// `1 − Pearson(r_i, r_j)`
    Correlation,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::SqEuclidean => "sqeuclidean",
            Metric::Correlation => "correlation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    Median,
    Average,
}

impl Linkage {
    pub fn as_str(self) -> &'static str {
        match self {
            Linkage::Median => "median",
            Linkage::Average => "average",
        }
    }

    /// `d(k, i∪j)` from `d(k,i)`, `d(k,j)`, `d(i,j)` and cluster sizes.
    fn update(self, d_ki: f64, d_kj: f64, d_ij: f64, n_i: usize, n_j: usize) -> f64 {
        match self {
            Linkage::Median => 0.5 * d_ki + 0.5 * d_kj - 0.25 * d_ij,
            Linkage::Average => {
                let total = (n_i + n_j) as f64;
                (n_i as f64 * d_ki + n_j as f64 * d_kj) / total
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Leaves are nodes `0..K`; merge `m` creates node `K + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub leaves: Vec<String>,
    pub merges: Vec<Merge>,
    pub metric: Metric,
    pub linkage: Linkage,
    pub height_unit: String,
}

fn correlation_distances(rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (k, n) = rows.shape();
    let mut centered = rows.clone();
    let mut norms = Vec::with_capacity(k);
    for i in 0..k {
        let mean = rows.row(i).sum() / n as f64;
        let mut ss = 0.0;
        for s in 0..n {
            let v = rows[(i, s)] - mean;
            centered[(i, s)] = v;
            ss += v * v;
        }
        if ss == 0.0 {
            return Err(Error::Constant(alloc::format!(
                "row {i} is constant; correlation is undefined"
            )));
        }
        norms.push(math::sqrt(ss));
    }
    let mut out = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in (i + 1)..k {
            let dot: f64 = (0..n).map(|s| centered[(i, s)] * centered[(j, s)]).sum();
            let d = 1.0 - dot / (norms[i] * norms[j]);
            out[(i, j)] = d;
            out[(j, i)] = d;
        }
    }
    Ok(out)
}

/// Cluster the rows of `rows`. The closest active pair merges first; equal
/// distances go to the smaller `(lower node, higher node)` pair.
pub fn hcluster(rows: &DMatrix<f64>, metric: Metric, linkage: Linkage) -> Result<Dendrogram> {
    let k = rows.nrows();
    if k < 2 {
        return Err(Error::range("models", "clustering needs at least 2 rows"));
    }
    crate::matrix::check_finite(rows)?;
    let base = match metric {
        Metric::SqEuclidean => pairwise_sq_distances(rows),
        Metric::Correlation => correlation_distances(rows)?,
    };
    // Distances between active clusters, indexed by node id.
    let total = 2 * k - 1;
    let mut d = DMatrix::<f64>::zeros(total, total);
    d.view_mut((0, 0), (k, k)).copy_from(&base);
    let mut size = alloc::vec![1usize; total];
    let mut active: Vec<usize> = (0..k).collect();
    let mut merges = Vec::with_capacity(k - 1);

    for m in 0..(k - 1) {
        let mut best: Option<(f64, usize, usize)> = None;
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let dist = d[(lo, hi)];
                let better = match best {
                    None => true,
                    Some((bd, bl, bh)) => dist < bd || (dist == bd && (lo, hi) < (bl, bh)),
                };
                if better {
                    best = Some((dist, lo, hi));
                }
            }
        }
        let (height, i, j) = best.expect("two active clusters remain");
        let node = k + m;
        size[node] = size[i] + size[j];
        for &other in &active {
            if other == i || other == j {
                continue;
            }
            let v = linkage.update(d[(other, i)], d[(other, j)], d[(i, j)], size[i], size[j]);
            d[(other, node)] = v;
            d[(node, other)] = v;
        }
        active.retain(|&c| c != i && c != j);
        active.push(node);
        merges.push(Merge {
            left: i,
            right: j,
            height,
            size: size[node],
        });
    }

    Ok(Dendrogram {
        leaves: (0..k).map(|i| alloc::format!("m{i}")).collect(),
        merges,
        metric,
        linkage,
        height_unit: String::from(match metric {
            Metric::SqEuclidean => "squared_distance",
            Metric::Correlation => "one_minus_pearson",
        }),
    })
}
