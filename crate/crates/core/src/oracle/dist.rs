use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::rng::SplitMix64;

/// A distribution over outcomes `0..M`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl FiniteDistribution {
    /// Probabilities must be non-negative and sum to one within 1e-12.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Shape("empty outcome space".into()));
        }
        if let Some(x) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::range(
                "probs",
                alloc::format!("outcome {x} has probability {}", probs[x]),
            ));
        }
        let total = math::sum(&probs);
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::range("probs", alloc::format!("sum is {total}")));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { probs, cumulative })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total = math::sum(weights);
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::range("weights", "need a positive finite total"));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(m: usize) -> Result<Self> {
        Self::from_weights(&alloc::vec![1.0; m])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `ln p(x)`, `-inf` where `p(x) = 0`.
    pub fn log_probs(&self) -> Vec<f64> {
        self.probs.iter().map(|&p| math::ln(p)).collect()
    }

    /// Inverse-CDF draw; outcomes with zero mass are never returned.
    pub fn sample(&self, rng: &mut SplitMix64) -> usize {
        let u = rng.uniform() * self.cumulative[self.cumulative.len() - 1];
        let x = self.cumulative.partition_point(|&c| c <= u);
        let mut x = x.min(self.probs.len() - 1);
        while self.probs[x] == 0.0 {
            x -= 1;
        }
        x
    }

    pub fn total_variation(&self, other: &Self) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// `Σ p ln(p/q)` in nats. Outcomes with `p = 0` contribute nothing; `p > 0`
/// where `q = 0` is [`Error::Support`] rather than infinity.
pub fn exact_kl(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<f64> {
    kl_rows(p.probs(), q.probs())
}

pub(crate) fn kl_rows(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(alloc::format!("{} vs {} outcomes", p.len(), q.len())));
    }
    let mut kl = 0.0;
    for (x, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Err(Error::Support(x));
        }
        kl += a * (math::ln(a) - math::ln(b));
    }
    Ok(kl)
}
