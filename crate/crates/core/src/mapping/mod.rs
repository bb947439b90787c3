//! Visual geometry for model maps: linear and t-SNE embeddings, dendrograms
//! and a TSP ordering used to assign hues to categories.

mod cluster;
mod pca;
mod tsne;
mod tsp;

pub use cluster::{hcluster, Dendrogram, Linkage, Merge, Metric};
pub use pca::{pca, PcaResult, SpectrumReport};
pub use tsne::{conditional_affinities, tsne, Affinities, TsneParams};
pub use tsp::{hue_assignment, nearest_neighbor_tour, tour_length, tsp_hue_order, two_opt};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::math;
use crate::matrix::ModelCoordinates;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingMethod {
    Pca,
    Tsne,
}

impl EmbeddingMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingMethod::Pca => "pca",
            EmbeddingMethod::Tsne => "tsne",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingResult {
    pub model_ids: Vec<String>,
    /// K×d coordinates; d = 2 for maps.
    pub coords: DMatrix<f64>,
    pub method: EmbeddingMethod,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
}

/// q / √(2N): squared Euclidean distances between these rows are the KL
/// estimates in nats per text.
pub fn kl_scaled_rows(coords: &ModelCoordinates) -> DMatrix<f64> {
    let n = coords.q.ncols() as f64;
    &coords.q / math::sqrt(2.0 * n)
}
