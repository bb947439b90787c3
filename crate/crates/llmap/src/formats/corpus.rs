use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of the corpus JSONL shared with the scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusLine {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub category: String,
}

/// Raw bytes of each `text` are kept as decoded JSON strings, which are
/// always valid UTF-8.
pub fn read_corpus(content: &str, path: &Path) -> Result<Vec<CorpusLine>> {
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.into(),
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

pub fn write_corpus(lines: &[CorpusLine]) -> String {
    let mut out = String::new();
    for l in lines {
        out.push_str(&serde_json::to_string(l).expect("corpus line serializes"));
        out.push('\n');
    }
    out
}
