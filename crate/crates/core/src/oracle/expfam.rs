use alloc::vec::Vec;
use nalgebra::DMatrix;

use super::dist::{exact_kl, FiniteDistribution};
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::double_center_values;
use crate::rng::SplitMix64;

/// `p(x; θ) = p₀(x) exp(θᵀ b(x) − ψ(θ))` over a finite outcome space.
///
/// Column `i` of `b` is the sufficient statistic of model `i`; the
/// registered models sit at `θ = λ e_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpFamily {
    pub base: FiniteDistribution,
    /// M×K.
    pub b: DMatrix<f64>,
    pub lambda: f64,
}

impl ExpFamily {
    pub fn new(base: FiniteDistribution, b: DMatrix<f64>, lambda: f64) -> Result<Self> {
        if b.nrows() != base.len() || b.ncols() == 0 {
            return Err(Error::Shape(alloc::format!(
                "b is {}×{} for {} outcomes",
                b.nrows(),
                b.ncols(),
                base.len()
            )));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::range("lambda", alloc::format!("{lambda}")));
        }
        crate::matrix::check_finite(&b)?;
        Ok(Self { base, b, lambda })
    }

    pub fn n_models(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outcomes(&self) -> usize {
        self.base.len()
    }

    /// Same `b` at another order parameter.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.base.clone(), self.b.clone(), lambda)
    }

    fn natural(&self, theta: &[f64], x: usize) -> f64 {
        theta.iter().enumerate().map(|(k, t)| t * self.b[(x, k)]).sum()
    }

    /// `ψ(θ) = ln Σ_x p₀(x) exp(θᵀ b(x))`.
    pub fn psi(&self, theta: &[f64]) -> f64 {
        let p0 = self.base.probs();
        let terms = (0..p0.len())
            .filter(|&x| p0[x] > 0.0)
            .map(|x| math::ln(p0[x]) + self.natural(theta, x));
        math::log_sum_exp(terms)
    }

    /// Log-probabilities of `p(·; θ)`.
    pub fn member_log_probs(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.n_models() {
            return Err(Error::Shape(alloc::format!(
                "θ has {} entries for {} models",
                theta.len(),
                self.n_models()
            )));
        }
        let psi = self.psi(theta);
        let p0 = self.base.probs();
        Ok((0..p0.len())
            .map(|x| {
                if p0[x] > 0.0 {
                    math::ln(p0[x]) + self.natural(theta, x) - psi
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect())
    }

    pub fn member(&self, theta: &[f64]) -> Result<FiniteDistribution> {
        let lp = self.member_log_probs(theta)?;
        let w: Vec<f64> = lp.iter().map(|&l| math::exp(l)).collect();
        FiniteDistribution::from_weights(&w)
    }

    fn unit(&self, i: usize) -> Vec<f64> {
        let mut theta = alloc::vec![0.0; self.n_models()];
        theta[i] = self.lambda;
        theta
    }

    /// Registered model `i`, i.e. `member(λ e_i)`.
    pub fn model(&self, i: usize) -> Result<FiniteDistribution> {
        self.member(&self.unit(i))
    }

    /// M×K table of `ℓ_i(x) = ln p_i(x)`.
    pub fn loglik_table(&self) -> Result<DMatrix<f64>> {
        let mut t = DMatrix::zeros(self.n_outcomes(), self.n_models());
        for i in 0..self.n_models() {
            let lp = self.member_log_probs(&self.unit(i))?;
            t.set_column(i, &nalgebra::DVector::from_vec(lp));
        }
        Ok(t)
    }
}

/// Family whose members at `λ e_i` reproduce `models[i]`: column `i` of `b`
/// is `(ln p_i − ln p₀)/λ`, so `ψ(λ e_i) = 0`.
pub fn expfamily_from_models(p0: &FiniteDistribution, models: &[FiniteDistribution], lambda: f64) -> Result<ExpFamily> {
    let m = p0.len();
    let mut b = DMatrix::zeros(m, models.len());
    for (i, p) in models.iter().enumerate() {
        if p.len() != m {
            return Err(Error::Shape(alloc::format!(
                "model {i} has {} outcomes, base has {m}",
                p.len()
            )));
        }
        for x in 0..m {
            let (a, c) = (p0.probs()[x], p.probs()[x]);
            if (a > 0.0) != (c > 0.0) {
                return Err(Error::Support(x));
            }
            if a > 0.0 {
                b[(x, i)] = (math::ln(c) - math::ln(a)) / lambda;
            }
        }
    }
    ExpFamily::new(p0.clone(), b, lambda)
}

/// Dirichlet concentration used by [`random_family`] unless a caller picks
/// another. At this size the reweighting is close to log-normal with a
/// spread of about 3%, which keeps the skewness of `b` small.
pub const DEFAULT_CONCENTRATION: f64 = 1000.0;

/// Random family over `m` outcomes with `k` models.
///
/// `p₀ ~ Dirichlet(1)`. Each perturbed model reweights the base,
/// `p̃_i ∝ p₀ ⊙ w_i` with `w_i ~ Dirichlet(concentration)`, and its
/// log-ratio `ln p̃_i − ln p₀` is centered and scaled to unit variance under
/// `p₀`, so `λ` alone sets the distance between members. The reweighting
/// keeps `b` free of `p₀`'s rare-outcome tail.
pub fn random_family(m: usize, k: usize, lambda: f64, concentration: f64, seed: u64) -> Result<ExpFamily> {
    if m < 2 || k == 0 {
        return Err(Error::range("family size", alloc::format!("m = {m}, k = {k}")));
    }
    if !(concentration > 0.0) {
        return Err(Error::range("concentration", alloc::format!("{concentration}")));
    }
    let mut rng = SplitMix64::new(seed);
    let p0 = FiniteDistribution::new(rng.dirichlet(&alloc::vec![1.0; m]))
        .or_else(|_| FiniteDistribution::from_weights(&rng.dirichlet(&alloc::vec![1.0; m])))?;
    let alpha = alloc::vec![concentration; m];
    let mut b = DMatrix::zeros(m, k);
    for i in 0..k {
        let w = rng.dirichlet(&alpha);
        // ln p̃ − ln p₀ up to the normalizer, which centering removes
        let r: Vec<f64> = w.iter().map(|&v| math::ln(v.max(f64::MIN_POSITIVE))).collect();
        let mean: f64 = (0..m).map(|x| p0.probs()[x] * r[x]).sum();
        let var: f64 = (0..m).map(|x| p0.probs()[x] * (r[x] - mean) * (r[x] - mean)).sum();
        if !(var > 0.0) {
            return Err(Error::Numerical("degenerate perturbation".into()));
        }
        let sd = math::sqrt(var);
        for x in 0..m {
            b[(x, i)] = (r[x] - mean) / sd;
        }
    }
    ExpFamily::new(p0, b, lambda)
}

/// Which distribution generates the sampled texts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Generator {
    #[default]
    Base,
    Member(usize),
}

/// Theory and sampling errors for one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub i: usize,
    pub j: usize,
    pub lambda: f64,
    pub n_samples: usize,
    pub generator: Generator,
    /// `2·KL(p_i, p_j)` by enumeration.
    pub exact_2kl: f64,
    /// `Var(ℓ_i − ℓ_j)` under the generator, by enumeration.
    pub variance_exact: f64,
    /// Biased sample variance of `ℓ_i − ℓ_j` over the draws.
    pub variance_sampled: f64,
    /// `‖q_i − q_j‖² / N` from the double-centered sampled matrix.
    pub q_estimate: f64,
}

impl VarianceReport {
    pub fn theory_error(&self) -> f64 {
        (self.exact_2kl - self.variance_exact).abs()
    }

    pub fn sampling_error(&self) -> f64 {
        (self.variance_exact - self.variance_sampled).abs()
    }

    /// `|q_estimate − 2KL| / 2KL`; zero when both are zero.
    pub fn relative_error(&self) -> f64 {
        if self.exact_2kl == 0.0 {
            return self.q_estimate.abs();
        }
        (self.q_estimate - self.exact_2kl).abs() / self.exact_2kl
    }
}

fn generator_dist(fam: &ExpFamily, generator: Generator) -> Result<FiniteDistribution> {
    match generator {
        Generator::Base => Ok(fam.base.clone()),
        Generator::Member(i) if i < fam.n_models() => fam.model(i),
        Generator::Member(i) => Err(Error::range(
            "generator",
            alloc::format!("model {i} of {}", fam.n_models()),
        )),
    }
}

/// Draws `n_samples` outcomes from the generator and returns the K×N
/// log-likelihood matrix of the registered models on them.
pub fn sample_loglik_matrix(
    fam: &ExpFamily,
    n_samples: usize,
    seed: u64,
    generator: Generator,
) -> Result<DMatrix<f64>> {
    let gen = generator_dist(fam, generator)?;
    let table = fam.loglik_table()?;
    let mut rng = SplitMix64::new(seed);
    let mut l = DMatrix::zeros(fam.n_models(), n_samples);
    for s in 0..n_samples {
        let x = gen.sample(&mut rng);
        for i in 0..fam.n_models() {
            l[(i, s)] = table[(x, i)];
        }
    }
    Ok(l)
}

fn exact_variance(gen: &FiniteDistribution, table: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let p = gen.probs();
    let d = |x: usize| table[(x, i)] - table[(x, j)];
    let live = (0..p.len()).filter(|&x| p[x] > 0.0);
    let mean: f64 = live.clone().map(|x| p[x] * d(x)).sum();
    live.map(|x| p[x] * (d(x) - mean) * (d(x) - mean)).sum()
}

/// Reports for every pair `i < j` from a single shared sample.
pub fn validate_all_pairs(
    fam: &ExpFamily,
    n_samples: usize,
    seed: u64,
    generator: Generator,
) -> Result<Vec<VarianceReport>> {
    if n_samples == 0 {
        return Err(Error::range("n_samples", "0"));
    }
    let gen = generator_dist(fam, generator)?;
    let table = fam.loglik_table()?;
    let models: Vec<FiniteDistribution> = (0..fam.n_models()).map(|i| fam.model(i)).collect::<Result<_>>()?;
    let l = sample_loglik_matrix(fam, n_samples, seed, generator)?;
    let centered = double_center_values(&l);
    let n = n_samples as f64;
    let mut out = Vec::new();
    for i in 0..fam.n_models() {
        for j in i + 1..fam.n_models() {
            out.push(pair_report(
                fam,
                &gen,
                &table,
                &models,
                &l,
                &centered.q,
                i,
                j,
                n,
                generator,
            )?);
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn pair_report(
    fam: &ExpFamily,
    gen: &FiniteDistribution,
    table: &DMatrix<f64>,
    models: &[FiniteDistribution],
    l: &DMatrix<f64>,
    q: &DMatrix<f64>,
    i: usize,
    j: usize,
    n: f64,
    generator: Generator,
) -> Result<VarianceReport> {
    let diffs: Vec<f64> = (0..l.ncols()).map(|s| l[(i, s)] - l[(j, s)]).collect();
    let q_sq: f64 = (0..q.ncols())
        .map(|s| (q[(i, s)] - q[(j, s)]) * (q[(i, s)] - q[(j, s)]))
        .sum();
    Ok(VarianceReport {
        i,
        j,
        lambda: fam.lambda,
        n_samples: l.ncols(),
        generator,
        exact_2kl: 2.0 * exact_kl(&models[i], &models[j])?,
        variance_exact: exact_variance(gen, table, i, j),
        variance_sampled: math::pop_variance(&diffs),
        q_estimate: q_sq / n,
    })
}

/// Exact `2·KL`, exact variance, sampled variance and the q-coordinate
/// estimate for one pair. The sampled matrix holds all K models, so the
/// column centering matches what a real run would do.
pub fn validate_variance_identity(
    fam: &ExpFamily,
    i: usize,
    j: usize,
    n_samples: usize,
    seed: u64,
    generator: Generator,
) -> Result<VarianceReport> {
    let k = fam.n_models();
    if i >= k || j >= k {
        return Err(Error::range("pair", alloc::format!("({i}, {j}) with {k} models")));
    }
    if n_samples == 0 {
        return Err(Error::range("n_samples", "0"));
    }
    let gen = generator_dist(fam, generator)?;
    let table = fam.loglik_table()?;
    let models: Vec<FiniteDistribution> = (0..k).map(|m| fam.model(m)).collect::<Result<_>>()?;
    let l = sample_loglik_matrix(fam, n_samples, seed, generator)?;
    let centered = double_center_values(&l);
    pair_report(
        fam,
        &gen,
        &table,
        &models,
        &l,
        &centered.q,
        i,
        j,
        n_samples as f64,
        generator,
    )
}
