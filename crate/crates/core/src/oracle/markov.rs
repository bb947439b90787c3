use alloc::vec::Vec;

use super::dist::kl_rows;
use crate::error::{Error, Result};
use crate::math;
use crate::rng::SplitMix64;

/// Token source whose next-token distribution depends on the last `order`
/// tokens. Token ids are `0..vocab`; `vocab` itself is the BOS marker that
/// pads the history before the first token.
///
/// A context is encoded oldest-first in base `vocab + 1`, so the most recent
/// token is the least significant digit.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovTokenModel {
    vocab: usize,
    order: usize,
    /// `(vocab+1)^order` rows of `vocab` probabilities.
    transition: Vec<f64>,
}

fn n_contexts(vocab: usize, order: usize) -> usize {
    (vocab + 1).pow(order as u32)
}

impl MarkovTokenModel {
    pub fn new(vocab: usize, order: usize, transition: Vec<f64>) -> Result<Self> {
        if vocab < 1 {
            return Err(Error::range("vocab", "0"));
        }
        let rows = n_contexts(vocab, order);
        if transition.len() != rows * vocab {
            return Err(Error::Shape(alloc::format!(
                "{} transition entries, expected {rows}×{vocab}",
                transition.len()
            )));
        }
        for (c, row) in transition.chunks(vocab).enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) || (math::sum(row) - 1.0).abs() > 1e-12 {
                return Err(Error::range(
                    "transition",
                    alloc::format!("context {c} is not a distribution"),
                ));
            }
        }
        Ok(Self {
            vocab,
            order,
            transition,
        })
    }

    pub fn uniform(vocab: usize, order: usize) -> Result<Self> {
        let rows = n_contexts(vocab, order);
        Self::new(vocab, order, alloc::vec![1.0 / vocab as f64; rows * vocab])
    }

    /// Each context row drawn from a symmetric Dirichlet.
    pub fn random(vocab: usize, order: usize, concentration: f64, rng: &mut SplitMix64) -> Result<Self> {
        let rows = n_contexts(vocab, order);
        let mut t = Vec::with_capacity(rows * vocab);
        for _ in 0..rows {
            t.extend(normalize(rng.dirichlet(&alloc::vec![concentration; vocab])));
        }
        Self::new(vocab, order, t)
    }

    /// Tilts every row by `exp(λ g)`: `p'(y|c) ∝ p(y|c) exp(λ g[c][y])`.
    pub fn perturb(&self, g: &[f64], lambda: f64) -> Result<Self> {
        if g.len() != self.transition.len() {
            return Err(Error::Shape(alloc::format!(
                "{} directions for {} entries",
                g.len(),
                self.transition.len()
            )));
        }
        let mut t = Vec::with_capacity(g.len());
        for (row, dir) in self.transition.chunks(self.vocab).zip(g.chunks(self.vocab)) {
            let w: Vec<f64> = row.iter().zip(dir).map(|(p, d)| p * math::exp(lambda * d)).collect();
            t.extend(normalize(w));
        }
        Self::new(self.vocab, self.order, t)
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bos(&self) -> usize {
        self.vocab
    }

    pub fn n_contexts(&self) -> usize {
        n_contexts(self.vocab, self.order)
    }

    pub fn conditional(&self, context: usize) -> &[f64] {
        &self.transition[context * self.vocab..(context + 1) * self.vocab]
    }

    /// Context index before position `t` of `text`.
    pub fn context_index(&self, text: &[usize], t: usize) -> usize {
        let base = self.vocab + 1;
        (0..self.order).fold(0, |acc, back| {
            let pos = t as isize - (self.order - back) as isize;
            let tok = if pos < 0 { self.bos() } else { text[pos as usize] };
            acc * base + tok
        })
    }

    fn check_text(&self, text: &[usize]) -> Result<()> {
        match text.iter().position(|&y| y >= self.vocab) {
            Some(t) => Err(Error::range(
                "token",
                alloc::format!("token {} at position {t}", text[t]),
            )),
            None => Ok(()),
        }
    }

    /// `ln p(y_t | y^{t−1})` for every position.
    pub fn token_logprobs(&self, text: &[usize]) -> Result<Vec<f64>> {
        self.check_text(text)?;
        (0..text.len())
            .map(|t| {
                let p = self.conditional(self.context_index(text, t))[text[t]];
                if p > 0.0 {
                    Ok(math::ln(p))
                } else {
                    Err(Error::ZeroProbability(t))
                }
            })
            .collect()
    }

    pub fn loglik(&self, text: &[usize]) -> Result<f64> {
        Ok(math::sum(&self.token_logprobs(text)?))
    }

    pub fn sample(&self, n: usize, rng: &mut SplitMix64) -> Vec<usize> {
        let mut text = Vec::with_capacity(n);
        for t in 0..n {
            let row = self.conditional(self.context_index(&text, t));
            let u = rng.uniform();
            let mut acc = 0.0;
            let mut y = self.vocab - 1;
            for (k, &p) in row.iter().enumerate() {
                acc += p;
                if u < acc && p > 0.0 {
                    y = k;
                    break;
                }
            }
            while row[y] == 0.0 {
                y -= 1;
            }
            text.push(y);
        }
        text
    }
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let total = math::sum(&w);
    for x in w.iter_mut() {
        *x /= total;
    }
    // absorb rounding so the row sums to one within the constructor tolerance
    let drift = 1.0 - math::sum(&w);
    if let Some(max) = w.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *max += drift;
    }
    w
}

/// Per-token log conditional probabilities centered by their mean over the
/// text, so they sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenCoordinates {
    pub zeta: Vec<f64>,
}

impl TokenCoordinates {
    pub fn sq_distance(&self, other: &Self) -> f64 {
        self.zeta.iter().zip(&other.zeta).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

pub fn token_coordinates(model: &MarkovTokenModel, text: &[usize]) -> Result<TokenCoordinates> {
    let lp = model.token_logprobs(text)?;
    if lp.is_empty() {
        return Ok(TokenCoordinates { zeta: lp });
    }
    let mean = math::mean(&lp);
    Ok(TokenCoordinates {
        zeta: lp.iter().map(|v| v - mean).collect(),
    })
}

fn same_vocab(p: &MarkovTokenModel, q: &MarkovTokenModel) -> Result<()> {
    if p.vocab != q.vocab {
        return Err(Error::Shape(alloc::format!(
            "vocabularies of {} and {} tokens",
            p.vocab,
            q.vocab
        )));
    }
    Ok(())
}

/// `Σ_t KL(p(·|y^{t−1}) ‖ q(·|y^{t−1}))` along the given text.
pub fn token_kl_sum(p: &MarkovTokenModel, q: &MarkovTokenModel, text: &[usize]) -> Result<f64> {
    same_vocab(p, q)?;
    p.check_text(text)?;
    let mut total = 0.0;
    for t in 0..text.len() {
        let a = p.conditional(p.context_index(text, t));
        let b = q.conditional(q.context_index(text, t));
        total += kl_rows(a, b).map_err(|_| Error::Support(t))?;
    }
    Ok(total)
}

/// Expected per-position conditional KL under `p`'s own state marginals,
/// for positions `0..n`. Summing gives [`exact_text_kl`]; the spread of the
/// entries shows how far the per-position KL is from constant.
pub fn per_position_kl(p: &MarkovTokenModel, q: &MarkovTokenModel, n: usize) -> Result<Vec<f64>> {
    same_vocab(p, q)?;
    let v = p.vocab;
    let order = p.order.max(q.order);
    let states = n_contexts(v, order);
    let (mod_p, mod_q) = (n_contexts(v, p.order), n_contexts(v, q.order));
    let mut kl_at = alloc::vec![f64::NAN; states];
    let mut mass = alloc::vec![0.0; states];
    // all-BOS history
    mass[(0..order).fold(0, |acc, _| acc * (v + 1) + v)] = 1.0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut step = 0.0;
        let mut next = alloc::vec![0.0; states];
        for s in 0..states {
            if mass[s] == 0.0 {
                continue;
            }
            let row = p.conditional(s % mod_p);
            if kl_at[s].is_nan() {
                kl_at[s] = kl_rows(row, q.conditional(s % mod_q)).map_err(|_| Error::Support(s))?;
            }
            step += mass[s] * kl_at[s];
            for (y, &py) in row.iter().enumerate() {
                if py > 0.0 {
                    next[(s * (v + 1) + y) % states] += mass[s] * py;
                }
            }
        }
        out.push(step);
        mass = next;
    }
    Ok(out)
}

/// KL between the length-`n` text distributions of `p` and `q`, by dynamic
/// programming over `p`'s history marginals.
pub fn exact_text_kl(p: &MarkovTokenModel, q: &MarkovTokenModel, n: usize) -> Result<f64> {
    Ok(math::sum(&per_position_kl(p, q, n)?))
}

/// The same quantity by enumerating all `vocab^n` texts; refuses when that
/// exceeds `limit`.
pub fn exact_text_kl_enumerate(p: &MarkovTokenModel, q: &MarkovTokenModel, n: usize, limit: usize) -> Result<f64> {
    same_vocab(p, q)?;
    let v = p.vocab;
    let count = (0..n).try_fold(1usize, |acc, _| acc.checked_mul(v).filter(|c| *c <= limit));
    let count = count.ok_or_else(|| Error::range("enumeration", alloc::format!("{v}^{n} texts exceed {limit}")))?;
    let mut text = alloc::vec![0usize; n];
    let mut kl = 0.0;
    for code in 0..count {
        let mut c = code;
        for slot in text.iter_mut().rev() {
            *slot = c % v;
            c /= v;
        }
        let lp = match p.token_logprobs(&text) {
            Ok(lp) => math::sum(&lp),
            Err(_) => continue,
        };
        let lq = q.loglik(&text).map_err(|_| Error::Support(code))?;
        kl += math::exp(lp) * (lp - lq);
    }
    Ok(kl)
}
