//! Small probabilistic models whose KL divergences are known exactly.
//!
//! [`ExpFamily`] is a finite exponential family whose members at `λ·e_i`
//! are the registered models, [`MarkovTokenModel`] is an order-k token
//! source with per-token conditionals, and [`InterpolationGrid`] holds the
//! linear log-likelihood predictor for merged weights.

mod dist;
mod expfam;
mod interp;
mod markov;

pub use dist::{exact_kl, FiniteDistribution};
pub use expfam::{
    expfamily_from_models, random_family, sample_loglik_matrix, validate_all_pairs, validate_variance_identity,
    ExpFamily, Generator, VarianceReport, DEFAULT_CONCENTRATION,
};
pub use interp::{interpolate_loglik, weight_plane_coords, weight_plane_geometry, InterpolationGrid};
pub use markov::{
    exact_text_kl, exact_text_kl_enumerate, per_position_kl, token_coordinates, token_kl_sum, MarkovTokenModel,
    TokenCoordinates,
};
