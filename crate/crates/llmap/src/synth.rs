//! Toy log-likelihood matrices drawn from a finite exponential family.
//!
//! Texts are sequences of outcomes from the family's base space; a model's
//! log-likelihood of a text is the sum of its outcome log-probabilities.
//! Models of one type sit near a shared direction, text categories tilt the
//! sampling distribution, and benchmark scores are noisy linear functions
//! of the model's natural parameters, so every downstream command has
//! structure to find.

use llmap_core::matrix::{LogLikMatrix, ModelRecord, TextRecord};
use llmap_core::oracle::{random_family, DEFAULT_CONCENTRATION};
use llmap_core::predict::BENCHMARK_TASKS;
use llmap_core::rng::SplitMix64;
use llmap_core::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub models: usize,
    pub types: usize,
    pub texts: usize,
    pub outcomes: usize,
    pub lambda: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub categories: Vec<String>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            models: 8,
            types: 4,
            texts: 200,
            outcomes: 64,
            lambda: 0.3,
            min_len: 16,
            max_len: 48,
            categories: vec!["web".into(), "code".into(), "books".into()],
            seed: 0,
        }
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn synthesize(cfg: &SynthConfig) -> Result<LogLikMatrix> {
    if cfg.models == 0 || cfg.types == 0 || cfg.texts == 0 || cfg.categories.is_empty() {
        return Err(Error::Config(
            "models, types, texts and categories must be non-empty".into(),
        ));
    }
    if cfg.min_len == 0 || cfg.max_len < cfg.min_len {
        return Err(Error::Config("need 0 < min_len <= max_len".into()));
    }
    let fam = random_family(cfg.outcomes, cfg.types, cfg.lambda, DEFAULT_CONCENTRATION, cfg.seed)?;
    let mut rng = SplitMix64::new(cfg.seed ^ 0x5EED_5EED);
    let t = cfg.types;

    let thetas: Vec<Vec<f64>> = (0..cfg.models)
        .map(|m| {
            (0..t)
                .map(|k| cfg.lambda * (f64::from(u8::from(k == m % t)) + 0.5 * rng.normal()))
                .collect()
        })
        .collect();
    let logp: Vec<Vec<f64>> = thetas
        .iter()
        .map(|th| fam.member_log_probs(th))
        .collect::<Result<_, _>>()?;
    let generators = (0..cfg.categories.len())
        .map(|_| {
            let th: Vec<f64> = (0..t).map(|_| 2.0 * cfg.lambda * rng.normal()).collect();
            fam.member(&th)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut values = DMatrix::zeros(cfg.models, cfg.texts);
    let mut texts = Vec::with_capacity(cfg.texts);
    for s in 0..cfg.texts {
        let c = s % cfg.categories.len();
        let len = cfg.min_len + rng.below((cfg.max_len - cfg.min_len + 1) as u64) as usize;
        let mut bytes = 0;
        for _ in 0..len {
            let x = generators[c].sample(&mut rng);
            bytes += 1 + x % 4;
            for m in 0..cfg.models {
                values[(m, s)] += logp[m][x];
            }
        }
        texts.push(TextRecord::new(format!("x{s:04}"), cfg.categories[c].clone(), bytes));
    }

    let weights: Vec<Vec<f64>> = BENCHMARK_TASKS
        .iter()
        .map(|_| (0..t).map(|_| rng.normal()).collect())
        .collect();
    let models = (0..cfg.models)
        .map(|m| {
            let mut r = ModelRecord::new(format!("m{m}"), format!("type{}", m % t));
            r.param_count = Some(1_000_000_000 * (1 + (m % t) as u64));
            r.tags.insert("synthetic".into());
            for (task, w) in BENCHMARK_TASKS.iter().zip(&weights) {
                let signal: f64 = w.iter().zip(&thetas[m]).map(|(a, b)| a * b / cfg.lambda).sum();
                let score = (50.0 + 12.0 * signal + 2.0 * rng.normal()).clamp(0.0, 100.0);
                r.benchmark_scores.insert((*task).into(), round2(score));
            }
            r
        })
        .collect();
    Ok(LogLikMatrix::new(models, texts, values)?)
}
