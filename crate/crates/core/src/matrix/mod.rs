//! The log-likelihood matrix and everything done to it before geometry:
//! validation, lower clipping, corpus chunking and sampling, and double
//! centering.

mod center;
mod clip;
mod corpus;

pub use center::{double_center, double_center_values, CenteredValues, ModelCoordinates};
pub use clip::{clip_lower, quantile_sorted, ClipReport, ClipScope};
pub use corpus::{chunk_corpus, sample_texts, split_chunks, Chunk, RawText};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TextRecord {
    pub text_id: String,
    pub category: String,
    /// UTF-8 length of the text payload.
    pub byte_length: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelRecord {
    pub model_id: String,
    pub model_type: String,
    pub param_count: Option<u64>,
    /// Creation date as given by the metadata, usually ISO-8601.
    pub created: Option<String>,
    pub tags: BTreeSet<String>,
    /// Benchmark name to score in `[0, 100]`.
    pub benchmark_scores: BTreeMap<String, f64>,
}

impl ModelRecord {
    pub fn new(model_id: impl Into<String>, model_type: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            model_type: model_type.into(),
            ..Default::default()
        }
    }
}

impl TextRecord {
    pub fn new(text_id: impl Into<String>, category: impl Into<String>, byte_length: usize) -> Self {
        Self {
            text_id: text_id.into(),
            category: category.into(),
            byte_length,
        }
    }
}

/// K models by N texts of total log-likelihoods in nats.
///
/// Entry `(i, s)` is `log p_i(x_s)` summed over the whole text, never a
/// per-token average.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLikMatrix {
    models: Vec<ModelRecord>,
    texts: Vec<TextRecord>,
    values: DMatrix<f64>,
}

impl LogLikMatrix {
    pub fn new(models: Vec<ModelRecord>, texts: Vec<TextRecord>, values: DMatrix<f64>) -> Result<Self> {
        if models.is_empty() || texts.is_empty() {
            return Err(Error::Shape("need at least one model and one text".into()));
        }
        if values.nrows() != models.len() || values.ncols() != texts.len() {
            return Err(Error::Shape(alloc::format!(
                "values are {}x{} but there are {} models and {} texts",
                values.nrows(),
                values.ncols(),
                models.len(),
                texts.len()
            )));
        }
        check_unique(models.iter().map(|m| m.model_id.as_str()))?;
        check_unique(texts.iter().map(|t| t.text_id.as_str()))?;
        for t in &texts {
            if t.byte_length == 0 {
                return Err(Error::range(
                    "byte_length",
                    alloc::format!("text `{}` has zero bytes", t.text_id),
                ));
            }
        }
        for m in &models {
            for (task, &score) in &m.benchmark_scores {
                if !(0.0..=100.0).contains(&score) {
                    return Err(Error::range(
                        "benchmark score",
                        alloc::format!("{}: {task} = {score} is outside [0, 100]", m.model_id),
                    ));
                }
            }
        }
        check_finite(&values)?;
        Ok(Self { models, texts, values })
    }

    /// A matrix with placeholder records, for callers that only have numbers.
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        let models = (0..values.nrows())
            .map(|i| ModelRecord::new(alloc::format!("m{i}"), "unknown"))
            .collect();
        let texts = (0..values.ncols())
            .map(|s| TextRecord::new(alloc::format!("t{s}"), "unknown", 1))
            .collect();
        Self::new(models, texts, values)
    }

    pub fn models(&self) -> &[ModelRecord] {
        &self.models
    }

    pub fn texts(&self) -> &[TextRecord] {
        &self.texts
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_models(&self) -> usize {
        self.models.len()
    }

    pub fn n_texts(&self) -> usize {
        self.texts.len()
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.models.iter().map(|m| m.model_id.clone()).collect()
    }

    pub fn text_ids(&self) -> Vec<String> {
        self.texts.iter().map(|t| t.text_id.clone()).collect()
    }

    pub fn model_index(&self, id: &str) -> Option<usize> {
        self.models.iter().position(|m| m.model_id == id)
    }

    /// Mean `byte_length` over the texts.
    pub fn mean_text_bytes(&self) -> f64 {
        self.texts.iter().map(|t| t.byte_length as f64).sum::<f64>() / self.texts.len() as f64
    }

    /// Replace the values, keeping the records. The new array must have the
    /// same shape and be finite.
    pub fn with_values(&self, values: DMatrix<f64>) -> Result<Self> {
        if values.shape() != self.values.shape() {
            return Err(Error::Shape("replacement values change the shape".into()));
        }
        check_finite(&values)?;
        Ok(Self {
            models: self.models.clone(),
            texts: self.texts.clone(),
            values,
        })
    }

    /// Keep only the listed rows, in the given order.
    pub fn select_models(&self, rows: &[usize]) -> Result<Self> {
        let models = rows.iter().map(|&i| self.models[i].clone()).collect();
        let values = self.values.select_rows(rows);
        Self::new(models, self.texts.clone(), values)
    }
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id.into()));
        }
    }
    Ok(())
}

pub(crate) fn check_finite(values: &DMatrix<f64>) -> Result<()> {
    for col in 0..values.ncols() {
        for row in 0..values.nrows() {
            if !values[(row, col)].is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_duplicates_and_non_finite() {
        let models = vec![ModelRecord::new("a", "x"), ModelRecord::new("a", "x")];
        let texts = vec![TextRecord::new("t", "c", 3)];
        let err = LogLikMatrix::new(models, texts.clone(), DMatrix::zeros(2, 1)).unwrap_err();
        assert_eq!(err, Error::DuplicateId("a".into()));

        let models = vec![ModelRecord::new("a", "x")];
        let mut v = DMatrix::zeros(1, 1);
        v[(0, 0)] = f64::NAN;
        let err = LogLikMatrix::new(models, texts, v).unwrap_err();
        assert_eq!(err, Error::NonFinite { row: 0, col: 0 });
    }

    #[test]
    fn rejects_bad_scores_and_empty_texts() {
        let mut m = ModelRecord::new("a", "x");
        m.benchmark_scores.insert("ARC".into(), 101.0);
        let texts = vec![TextRecord::new("t", "c", 3)];
        assert!(LogLikMatrix::new(vec![m], texts, DMatrix::zeros(1, 1)).is_err());

        let texts = vec![TextRecord::new("t", "c", 0)];
        let models = vec![ModelRecord::new("a", "x")];
        assert!(LogLikMatrix::new(models, texts, DMatrix::zeros(1, 1)).is_err());
    }
}
