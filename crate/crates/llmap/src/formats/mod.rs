//! Text formats exchanged between subcommands and with the scorer.

mod corpus;
mod matrix;
mod tables;

pub use corpus::{read_corpus, write_corpus, CorpusLine};
pub use matrix::{
    load_matrix, matrix_to_tsv, metadata_from_matrix, parse_matrix_tsv, save_matrix, LabeledValues, Metadata,
    ModelMeta, TextMeta,
};
pub use tables::{
    dendrogram_to_json, divergence_to_tsv, embedding_to_tsv, neighbors_to_tsv, parse_divergence_tsv,
    parse_predictions_tsv, predictions_to_tsv, PredictionRow,
};

use std::fmt::Write;

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(out: &mut String, v: f64) {
    write!(out, "{v}").expect("writing to a String");
}

pub(crate) fn check_id(id: &str) -> Result<(), String> {
    if id.is_empty() {
        return Err("empty id".into());
    }
    if id.contains(['\t', '\n', '\r']) {
        return Err(format!("id {id:?} contains a tab or newline"));
    }
    Ok(())
}
