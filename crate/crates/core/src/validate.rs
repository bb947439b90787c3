//! Gate checks: each returns rows of `(name, value, threshold, pass)`.
//!
//! * [`identities`]: exact algebra of the centering pipeline on random
//!   matrices.
//! * [`expfam_gates`]: the KL ≈ variance estimate against enumeration on
//!   random exponential families.
//! * [`token_gates`]: ζ-distances against per-token KL sums on Markov
//!   token models, and the text-KL recursion against enumeration.

use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::analysis::{decompose_error, pearson};
use crate::error::Result;
use crate::geometry::decompose;
use crate::math;
use crate::matrix::{double_center_values, ModelCoordinates};
use crate::oracle::{
    exact_text_kl, exact_text_kl_enumerate, per_position_kl, random_family, token_coordinates, token_kl_sum,
    validate_all_pairs, validate_variance_identity, Generator, MarkovTokenModel, VarianceReport, DEFAULT_CONCENTRATION,
};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    AtMost,
    AtLeast,
    /// Reported only.
    Info,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateRow {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub bound: Bound,
}

impl GateRow {
    fn new(name: &str, value: f64, bound: Bound, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            bound,
        }
    }

    pub fn pass(&self) -> bool {
        match self.bound {
            Bound::AtMost => self.value <= self.threshold,
            Bound::AtLeast => self.value >= self.threshold,
            Bound::Info => true,
        }
    }
}

pub fn all_pass(rows: &[GateRow]) -> bool {
    rows.iter().all(GateRow::pass)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Log-likelihood-like matrix: model level, text difficulty and noise, in
/// the hundreds of nats.
pub fn random_loglik(k: usize, n: usize, rng: &mut SplitMix64) -> DMatrix<f64> {
    let model: Vec<f64> = (0..k).map(|_| -500.0 + 100.0 * rng.normal()).collect();
    let text: Vec<f64> = (0..n).map(|_| 50.0 * rng.normal()).collect();
    DMatrix::from_fn(k, n, |i, s| model[i] + text[s] + 5.0 * rng.normal())
}

const IDENTITY_NAMES: [&str; 7] = [
    "identities.height_decomposition",
    "identities.zero_means",
    "identities.idempotence",
    "identities.linearity",
    "identities.error_algebra",
    "identities.reconstruction",
    "identities.variance_form",
];

/// Relative error of each identity on one matrix, in the order of the gate
/// names. `rng` supplies the second matrix, the mixing scalars and the
/// injected error. Errors are scaled by the largest magnitude of the
/// quantity being compared (the input matrix for the centering identities).
pub fn identity_errors(l: &DMatrix<f64>, rng: &mut SplitMix64) -> [f64; 7] {
    let (k, n) = l.shape();
    let mut out = [0.0f64; 7];
    let scale = max_abs(l).max(f64::MIN_POSITIVE);
    let c = double_center_values(l);
    let coords = ModelCoordinates::from_values(l);

    // ‖ℓ_i − ℓ_j‖² = ‖q_i − q_j‖² + (h_i − h_j)²
    let dec = decompose(&coords);
    let direct = DMatrix::from_fn(k, k, |i, j| {
        (0..n).map(|s| (l[(i, s)] - l[(j, s)]) * (l[(i, s)] - l[(j, s)])).sum()
    });
    out[0] = max_diff(&dec.total_sq, &direct) / max_abs(&direct).max(f64::MIN_POSITIVE);

    // zero row and column means of q
    let mut means = 0.0f64;
    for i in 0..k {
        means = means.max((c.q.row(i).sum() / n as f64).abs());
    }
    for s in 0..n {
        means = means.max((c.q.column(s).sum() / k as f64).abs());
    }
    out[1] = means / scale;

    // centering q again leaves it unchanged
    out[2] = max_diff(&double_center_values(&c.q).q, &c.q) / scale;

    // linear in L
    let l2 = random_loglik(k, n, rng);
    let (a, b) = (rng.normal(), rng.normal());
    let combined = l * a + &l2 * b;
    let parts = &c.q * a + double_center_values(&l2).q * b;
    out[3] = max_diff(&double_center_values(&combined).q, &parts) / max_abs(&combined).max(f64::MIN_POSITIVE);

    // additive error reaches q only through its interaction term d
    let eps = random_loglik(k, n, rng) * 0.01;
    let noisy = double_center_values(&(l + &eps)).q;
    out[4] = max_diff(&noisy, &(&c.q + decompose_error(&eps).d)) / scale;

    // ℓ = ℓ̄ + ξ̄ + q
    out[5] = max_diff(&coords.reconstruct(), l) / scale;

    // ‖q_i − q_j‖²/N is the biased sample variance of ℓ_i − ℓ_j
    for i in 0..k {
        for j in i + 1..k {
            let diffs: Vec<f64> = (0..n).map(|s| l[(i, s)] - l[(j, s)]).collect();
            let var = math::pop_variance(&diffs);
            let est = dec.horizontal_sq[(i, j)] / n as f64;
            out[6] = out[6].max((est - var).abs() / var.max(f64::MIN_POSITIVE));
        }
    }
    out
}

fn identity_rows(worst: [f64; 7], tolerance: f64) -> Vec<GateRow> {
    IDENTITY_NAMES
        .iter()
        .zip(worst)
        .map(|(n, w)| GateRow::new(n, w, Bound::AtMost, tolerance))
        .collect()
}

/// Worst relative error of each identity over `n_matrices` random matrices
/// with `K ∈ [2, 20]` and `N ∈ [2, 200]`.
pub fn identities(n_matrices: usize, seed: u64, tolerance: f64) -> Vec<GateRow> {
    let mut rng = SplitMix64::new(seed);
    let mut worst = [0.0f64; 7];
    for _ in 0..n_matrices {
        let k = 2 + rng.below(19) as usize;
        let n = 2 + rng.below(199) as usize;
        let l = random_loglik(k, n, &mut rng);
        for (w, e) in worst.iter_mut().zip(identity_errors(&l, &mut rng)) {
            *w = w.max(e);
        }
    }
    identity_rows(worst, tolerance)
}

/// The same identities on a given matrix.
pub fn identities_on(l: &DMatrix<f64>, seed: u64, tolerance: f64) -> Vec<GateRow> {
    identity_rows(identity_errors(l, &mut SplitMix64::new(seed)), tolerance)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpfamConfig {
    pub outcomes: usize,
    pub models: usize,
    pub lambda: f64,
    pub n_samples: usize,
    pub trials: usize,
    pub concentration: f64,
    pub seed: u64,
    pub tolerance: f64,
    pub scaling_lambdas: Vec<f64>,
    pub scaling_families: usize,
    pub scaling_ratio: f64,
    pub robustness_factor: f64,
}

impl Default for ExpfamConfig {
    fn default() -> Self {
        Self {
            outcomes: 64,
            models: 4,
            lambda: 0.1,
            n_samples: 100_000,
            trials: 10,
            concentration: DEFAULT_CONCENTRATION,
            seed: 0,
            tolerance: 0.05,
            scaling_lambdas: alloc::vec![0.2, 0.1, 0.05],
            scaling_families: 20,
            scaling_ratio: 4.0,
            robustness_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpfamOutcome {
    pub rows: Vec<GateRow>,
    /// Base-generator reports, trial-major.
    pub reports: Vec<VarianceReport>,
    /// Reports for ordered pairs `(i, j)` sampled from `p_i`.
    pub robustness: Vec<VarianceReport>,
    /// Mean theory error at each scaling λ.
    pub theory_error_by_lambda: Vec<(f64, f64)>,
}

/// Trial `t` draws its family from seed `seed + t` and its samples from
/// `seed + t + 1_000_000`.
pub fn expfam_gates(cfg: &ExpfamConfig) -> Result<ExpfamOutcome> {
    let mut reports = Vec::new();
    let mut robustness = Vec::new();
    for t in 0..cfg.trials as u64 {
        let fam = random_family(cfg.outcomes, cfg.models, cfg.lambda, cfg.concentration, cfg.seed + t)?;
        let sample_seed = cfg.seed + t + 1_000_000;
        reports.extend(validate_all_pairs(&fam, cfg.n_samples, sample_seed, Generator::Base)?);
        for i in 0..cfg.models {
            for j in 0..cfg.models {
                if i != j {
                    robustness.push(validate_variance_identity(
                        &fam,
                        i,
                        j,
                        cfg.n_samples,
                        sample_seed,
                        Generator::Member(i),
                    )?);
                }
            }
        }
    }
    let max_rel = reports.iter().fold(0.0f64, |acc, r| acc.max(r.relative_error()));
    let identity = reports.iter().fold(0.0f64, |acc, r| {
        acc.max((r.q_estimate - r.variance_sampled).abs() / r.variance_sampled)
    });
    let max_rel_gen = robustness.iter().fold(0.0f64, |acc, r| acc.max(r.relative_error()));

    let mut theory_error_by_lambda = Vec::new();
    for &lambda in &cfg.scaling_lambdas {
        let mut total = 0.0;
        let mut count = 0usize;
        for f in 0..cfg.scaling_families as u64 {
            let fam = random_family(
                cfg.outcomes,
                cfg.models,
                lambda,
                cfg.concentration,
                cfg.seed + 2_000_000 + f,
            )?;
            // n_samples is irrelevant for the theory error
            for r in validate_all_pairs(&fam, 1, 0, Generator::Base)? {
                total += r.theory_error();
                count += 1;
            }
        }
        theory_error_by_lambda.push((lambda, total / count as f64));
    }
    let min_ratio = theory_error_by_lambda
        .windows(2)
        .map(|w| w[0].1 / w[1].1)
        .fold(f64::INFINITY, f64::min);

    let rows = alloc::vec![
        GateRow::new("expfam.max_relative_error", max_rel, Bound::AtMost, cfg.tolerance),
        GateRow::new("expfam.q_estimate_vs_sample_variance", identity, Bound::AtMost, 1e-9),
        GateRow::new(
            "expfam.lambda_halving_ratio",
            min_ratio,
            Bound::AtLeast,
            cfg.scaling_ratio
        ),
        GateRow::new(
            "expfam.generator_robustness",
            max_rel_gen,
            Bound::AtMost,
            cfg.robustness_factor * cfg.tolerance
        ),
    ];
    Ok(ExpfamOutcome {
        rows,
        reports,
        robustness,
        theory_error_by_lambda,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenConfig {
    pub vocab: usize,
    pub models: usize,
    pub lambda: f64,
    pub base_concentration: f64,
    pub texts: usize,
    pub length: usize,
    pub seed: u64,
    pub min_r: f64,
    pub dp_vocab: usize,
    pub dp_length: usize,
    pub dp_pairs: usize,
    pub dp_tolerance: f64,
}

impl Default for TokenConfig {
    fn default() -> Self {
        Self {
            vocab: 4,
            models: 8,
            lambda: 0.3,
            base_concentration: 1.0,
            texts: 200,
            length: 64,
            seed: 0,
            min_r: 0.85,
            dp_vocab: 3,
            dp_length: 6,
            dp_pairs: 10,
            dp_tolerance: 1e-10,
        }
    }
}

/// Order-1 models tilted from a shared random base by `λ` along standard
/// normal directions; texts are drawn from the base.
///
/// The correlation gate is computed over model pairs: for each pair, the
/// ζ-distance and twice the per-token KL sum are averaged over all texts.
/// The same correlation over individual (pair, text) points is reported
/// alongside, as is the spread of the exact per-position KL, which would
/// be zero if the per-token KL were constant along the text.
pub fn token_gates(cfg: &TokenConfig) -> Result<Vec<GateRow>> {
    let mut rng = SplitMix64::new(cfg.seed);
    let base = MarkovTokenModel::random(cfg.vocab, 1, cfg.base_concentration, &mut rng)?;
    let entries = base.n_contexts() * cfg.vocab;
    let models: Vec<MarkovTokenModel> = (0..cfg.models)
        .map(|_| {
            let g: Vec<f64> = (0..entries).map(|_| rng.normal()).collect();
            base.perturb(&g, cfg.lambda)
        })
        .collect::<Result<_>>()?;
    let texts: Vec<Vec<usize>> = (0..cfg.texts).map(|_| base.sample(cfg.length, &mut rng)).collect();
    let zetas: Vec<Vec<_>> = models
        .iter()
        .map(|m| {
            texts
                .iter()
                .map(|t| token_coordinates(m, t))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let (mut pair_z, mut pair_kl, mut point_z, mut point_kl) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut spread = 0.0f64;
    for i in 0..cfg.models {
        for j in i + 1..cfg.models {
            let (mut zs, mut ks) = (0.0, 0.0);
            for (t, text) in texts.iter().enumerate() {
                let z = zetas[i][t].sq_distance(&zetas[j][t]);
                let k = 2.0 * token_kl_sum(&models[i], &models[j], text)?;
                zs += z;
                ks += k;
                point_z.push(z);
                point_kl.push(k);
            }
            pair_z.push(zs / cfg.texts as f64);
            pair_kl.push(ks / cfg.texts as f64);
            let profile = per_position_kl(&models[i], &models[j], cfg.length)?;
            spread = spread.max(math::sqrt(math::pop_variance(&profile)) / math::mean(&profile));
        }
    }
    let r_pairs = pearson(&pair_z, &pair_kl)?;
    let r_points = pearson(&point_z, &point_kl)?;

    let mut dp_err = 0.0f64;
    for _ in 0..cfg.dp_pairs {
        let p = MarkovTokenModel::random(cfg.dp_vocab, 1, 1.0, &mut rng)?;
        let q = MarkovTokenModel::random(cfg.dp_vocab, 1, 1.0, &mut rng)?;
        let dp = exact_text_kl(&p, &q, cfg.dp_length)?;
        let brute = exact_text_kl_enumerate(&p, &q, cfg.dp_length, 1_000_000)?;
        dp_err = dp_err.max((dp - brute).abs());
    }
    Ok(alloc::vec![
        GateRow::new("token.pearson_r_pairs", r_pairs, Bound::AtLeast, cfg.min_r),
        GateRow::new("token.pearson_r_texts", r_points, Bound::Info, f64::NAN),
        GateRow::new("token.per_position_kl_cv", spread, Bound::Info, f64::NAN),
        GateRow::new("token.dp_vs_enumeration", dp_err, Bound::AtMost, cfg.dp_tolerance),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities_hold_on_a_small_batch() {
        let rows = identities(10, 1, 1e-9);
        assert_eq!(rows.len(), 7);
        assert!(all_pass(&rows), "{rows:?}");
    }

    #[test]
    fn identities_on_the_worked_matrix() {
        let l = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 2.0]);
        assert!(all_pass(&identities_on(&l, 0, 1e-9)));
    }

    #[test]
    fn gate_bounds() {
        assert!(GateRow::new("a", 1.0, Bound::AtMost, 1.0).pass());
        assert!(!GateRow::new("a", 1.1, Bound::AtMost, 1.0).pass());
        assert!(!GateRow::new("a", 0.9, Bound::AtLeast, 1.0).pass());
        assert!(GateRow::new("a", f64::NAN, Bound::Info, f64::NAN).pass());
        // NaN never passes a real bound
        assert!(!GateRow::new("a", f64::NAN, Bound::AtMost, 1.0).pass());
    }

    #[test]
    fn small_expfam_run() {
        let cfg = ExpfamConfig {
            n_samples: 20_000,
            trials: 2,
            scaling_families: 3,
            ..Default::default()
        };
        let out = expfam_gates(&cfg).unwrap();
        assert_eq!(out.reports.len(), 12);
        assert_eq!(out.robustness.len(), 24);
        assert!(out.rows[1].pass());
        assert!(out.rows[2].pass());
    }

    #[test]
    fn small_token_run() {
        let cfg = TokenConfig {
            texts: 30,
            models: 4,
            dp_pairs: 2,
            ..Default::default()
        };
        let rows = token_gates(&cfg).unwrap();
        assert!(rows[3].pass());
        assert!(rows[0].value > 0.0);
    }
}
