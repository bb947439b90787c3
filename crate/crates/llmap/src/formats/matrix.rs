use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use llmap_core::matrix::{LogLikMatrix, ModelRecord, TextRecord};
use llmap_core::DMatrix;
use serde::{Deserialize, Serialize};

use super::{check_id, fmt_f64};
use crate::error::{Error, Result};
use crate::io::{read_to_string, write_atomic, write_output, Header};

/// A matrix TSV before it is joined with metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledValues {
    pub row_ids: Vec<String>,
    pub column_ids: Vec<String>,
    pub values: DMatrix<f64>,
}

/// Parse the interchange TSV: a `model_id` header cell followed by text
/// IDs, then one row per model. `first_cell` is the expected header cell.
pub fn parse_matrix_tsv(text: &str, path: &Path, first_cell: &str) -> Result<LabeledValues> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.into(),
        line,
        msg,
    };
    let mut lines = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let mut cells = header.split('\t');
    if cells.next() != Some(first_cell) {
        return Err(err(1, format!("malformed header: first cell must be `{first_cell}`")));
    }
    let column_ids: Vec<String> = cells.map(String::from).collect();
    if column_ids.is_empty() {
        return Err(err(1, "malformed header: no columns".into()));
    }
    let mut seen = HashSet::new();
    for id in &column_ids {
        check_id(id).map_err(|m| err(1, format!("malformed header: {m}")))?;
        if !seen.insert(id.as_str()) {
            return Err(err(1, format!("duplicate column id `{id}`")));
        }
    }

    let mut row_ids = Vec::new();
    let mut data = Vec::new();
    let mut trailing_blank = false;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            trailing_blank = true;
            continue;
        }
        if trailing_blank {
            return Err(err(lineno - 1, "blank line inside the table".into()));
        }
        let mut cells = line.split('\t');
        let id = cells.next().unwrap_or_default();
        check_id(id).map_err(|m| err(lineno, m))?;
        let mut count = 0;
        for (c, cell) in cells.enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| err(lineno, format!("non-numeric cell {cell:?} in column {}", c + 1)))?;
            if !v.is_finite() {
                return Err(err(lineno, format!("non-finite cell {cell:?} in column {}", c + 1)));
            }
            data.push(v);
            count += 1;
        }
        if count != column_ids.len() {
            return Err(err(lineno, format!("{count} values for {} columns", column_ids.len())));
        }
        row_ids.push(id.to_string());
    }
    if row_ids.is_empty() {
        return Err(err(2, "no rows".into()));
    }
    let values = DMatrix::from_row_slice(row_ids.len(), column_ids.len(), &data);
    Ok(LabeledValues {
        row_ids,
        column_ids,
        values,
    })
}

/// Canonical form: `\n` line endings, shortest round-trip floats, trailing
/// newline.
pub fn labeled_to_tsv(first_cell: &str, column_ids: &[String], row_ids: &[String], values: &DMatrix<f64>) -> String {
    let mut out = String::new();
    out.push_str(first_cell);
    for id in column_ids {
        out.push('\t');
        out.push_str(id);
    }
    out.push('\n');
    for (i, id) in row_ids.iter().enumerate() {
        out.push_str(id);
        for s in 0..values.ncols() {
            out.push('\t');
            fmt_f64(&mut out, values[(i, s)]);
        }
        out.push('\n');
    }
    out
}

pub fn matrix_to_tsv(m: &LogLikMatrix) -> String {
    labeled_to_tsv("model_id", &m.text_ids(), &m.model_ids(), m.values())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub id: String,
    #[serde(rename = "type", default)]
    pub model_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created: Option<String>,
    #[serde(default)]
    pub tags: BTreeSet<String>,
    #[serde(default)]
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextMeta {
    pub id: String,
    #[serde(default)]
    pub category: String,
    pub byte_length: usize,
}

/// Metadata JSON; unknown fields are ignored.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default)]
    pub models: Vec<ModelMeta>,
    #[serde(default)]
    pub texts: Vec<TextMeta>,
}

impl Metadata {
    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_to_string(path)?).map_err(Error::json(path))
    }

    pub fn to_json(&self) -> String {
        crate::io::to_json_string(self)
    }
}

impl ModelMeta {
    fn to_record(&self) -> Result<ModelRecord> {
        let param_count = match self.params {
            None => None,
            Some(p) if p >= 1.0 && p.fract() == 0.0 && p < u64::MAX as f64 => Some(p as u64),
            Some(p) => {
                return Err(Error::Data(format!(
                    "model `{}`: params {p} is not a positive integer",
                    self.id
                )))
            }
        };
        Ok(ModelRecord {
            model_id: self.id.clone(),
            model_type: self.model_type.clone(),
            param_count,
            created: self.created.clone(),
            tags: self.tags.clone(),
            benchmark_scores: self.scores.clone(),
        })
    }

    fn from_record(r: &ModelRecord) -> Self {
        Self {
            id: r.model_id.clone(),
            model_type: r.model_type.clone(),
            params: r.param_count.map(|p| p as f64),
            created: r.created.clone(),
            tags: r.tags.clone(),
            scores: r.benchmark_scores.clone(),
        }
    }
}

pub fn metadata_from_matrix(m: &LogLikMatrix) -> Metadata {
    Metadata {
        models: m.models().iter().map(ModelMeta::from_record).collect(),
        texts: m
            .texts()
            .iter()
            .map(|t| TextMeta {
                id: t.text_id.clone(),
                category: t.category.clone(),
                byte_length: t.byte_length,
            })
            .collect(),
    }
}

fn index_unique<'a, T>(items: &'a [T], id: impl Fn(&T) -> &str, what: &str) -> Result<HashMap<&'a str, &'a T>> {
    let mut map = HashMap::new();
    for item in items {
        if map.insert(id(item), item).is_some() {
            return Err(Error::Data(format!("duplicate {what} id `{}` in metadata", id(item))));
        }
    }
    Ok(map)
}

/// Join a parsed TSV with metadata. Every row and column ID must appear in
/// the metadata; extra metadata entries are ignored. Row and column order
/// come from the TSV.
pub fn join_metadata(tsv: LabeledValues, meta: &Metadata) -> Result<LogLikMatrix> {
    let models = index_unique(&meta.models, |m| m.id.as_str(), "model")?;
    let texts = index_unique(&meta.texts, |t| t.id.as_str(), "text")?;
    let model_records = tsv
        .row_ids
        .iter()
        .map(|id| {
            models
                .get(id.as_str())
                .ok_or_else(|| Error::Data(format!("ID mismatch: model `{id}` is not in the metadata")))
                .and_then(|m| m.to_record())
        })
        .collect::<Result<Vec<_>>>()?;
    let text_records = tsv
        .column_ids
        .iter()
        .map(|id| {
            texts
                .get(id.as_str())
                .map(|t| TextRecord::new(id.clone(), t.category.clone(), t.byte_length))
                .ok_or_else(|| Error::Data(format!("ID mismatch: text `{id}` is not in the metadata")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LogLikMatrix::new(model_records, text_records, tsv.values)?)
}

pub fn load_matrix(path: &Path, metadata_path: &Path) -> Result<LogLikMatrix> {
    let tsv = parse_matrix_tsv(&read_to_string(path)?, path, "model_id")?;
    join_metadata(tsv, &Metadata::load(metadata_path)?)
}

/// Canonical matrix TSV and metadata JSON. Without a header only the two
/// files are written.
pub fn save_matrix(m: &LogLikMatrix, path: &Path, metadata_path: Option<&Path>, header: Option<&Header>) -> Result<()> {
    let tsv = matrix_to_tsv(m);
    match header {
        Some(h) => write_output(path, &tsv, h)?,
        None => write_atomic(path, tsv.as_bytes())?,
    }
    if let Some(mp) = metadata_path {
        let json = metadata_from_matrix(m).to_json();
        match header {
            Some(h) => write_output(mp, &json, h)?,
            None => write_atomic(mp, json.as_bytes())?,
        }
    }
    Ok(())
}
