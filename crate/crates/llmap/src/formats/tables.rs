use std::path::Path;

use llmap_core::geometry::{DivergenceMatrix, DivergenceUnit, NeighborTable};
use llmap_core::mapping::{Dendrogram, EmbeddingResult};
use serde::Serialize;

use super::fmt_f64;
use super::matrix::{labeled_to_tsv, parse_matrix_tsv};
use crate::error::{Error, Result};

/// Square table whose first header cell names the unit.
pub fn divergence_to_tsv(div: &DivergenceMatrix) -> String {
    labeled_to_tsv(div.unit.as_str(), &div.model_ids, &div.model_ids, &div.values)
}

pub fn parse_divergence_tsv(text: &str, path: &Path) -> Result<DivergenceMatrix> {
    let first = text.split(['\t', '\n']).next().unwrap_or_default();
    let unit = DivergenceUnit::parse(first).ok_or_else(|| Error::Parse {
        path: path.into(),
        line: 1,
        msg: format!("unknown unit `{first}`"),
    })?;
    let t = parse_matrix_tsv(text, path, first)?;
    if t.row_ids != t.column_ids {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            msg: "row and column IDs differ".into(),
        });
    }
    Ok(DivergenceMatrix {
        model_ids: t.row_ids,
        values: t.values,
        unit,
        mean_text_bytes: None,
    })
}

pub fn neighbors_to_tsv(tables: &[NeighborTable]) -> String {
    let mut out = String::from("query_id\trank\tneighbor_id\tdivergence\tunit\n");
    for t in tables {
        for (rank, (id, d)) in t.neighbors.iter().enumerate() {
            out.push_str(&format!("{}\t{}\t{}\t", t.query_model_id, rank + 1, id));
            fmt_f64(&mut out, *d);
            out.push('\t');
            out.push_str(t.unit.as_str());
            out.push('\n');
        }
    }
    out
}

pub fn embedding_to_tsv(e: &EmbeddingResult) -> String {
    let mut out = String::from("model_id\tx\ty\tmethod\tseed\n");
    for (i, id) in e.model_ids.iter().enumerate() {
        out.push_str(id);
        for c in 0..2 {
            out.push('\t');
            let v = if c < e.coords.ncols() { e.coords[(i, c)] } else { 0.0 };
            fmt_f64(&mut out, v);
        }
        out.push_str(&format!("\t{}\t{}\n", e.method.as_str(), e.seed));
    }
    out
}

#[derive(Serialize)]
struct DendrogramJson<'a> {
    leaves: &'a [String],
    merges: Vec<(usize, usize, f64, usize)>,
    metric: &'static str,
    linkage: &'static str,
    height_unit: &'a str,
}

pub fn dendrogram_to_json(d: &Dendrogram) -> String {
    crate::io::to_json_string(&DendrogramJson {
        leaves: &d.leaves,
        merges: d.merges.iter().map(|m| (m.left, m.right, m.height, m.size)).collect(),
        metric: d.metric.as_str(),
        linkage: d.linkage.as_str(),
        height_unit: &d.height_unit,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub model_id: String,
    pub target_name: String,
    pub predicted: f64,
    pub actual: f64,
    /// Held-out fold under the first seed.
    pub fold: usize,
    pub seed_count: usize,
}

const PREDICTION_HEADER: &str = "model_id\ttarget_name\tpredicted\tactual\tfold\tseed_count";

pub fn predictions_to_tsv(rows: &[PredictionRow]) -> String {
    let mut out = String::from(PREDICTION_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{}\t{}\t", r.model_id, r.target_name));
        fmt_f64(&mut out, r.predicted);
        out.push('\t');
        fmt_f64(&mut out, r.actual);
        out.push_str(&format!("\t{}\t{}\n", r.fold, r.seed_count));
    }
    out
}

pub fn parse_predictions_tsv(text: &str, path: &Path) -> Result<Vec<PredictionRow>> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.into(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == PREDICTION_HEADER => {}
        _ => return Err(err(1, "malformed predictions header".into())),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let c: Vec<&str> = line.split('\t').collect();
        if c.len() != 6 {
            return Err(err(idx + 1, format!("{} cells, expected 6", c.len())));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| err(idx + 1, format!("non-numeric cell {s:?}")))
        };
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| err(idx + 1, format!("non-integer cell {s:?}")))
        };
        rows.push(PredictionRow {
            model_id: c[0].into(),
            target_name: c[1].into(),
            predicted: num(c[2])?,
            actual: num(c[3])?,
            fold: int(c[4])?,
            seed_count: int(c[5])?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use llmap_core::mapping::{hcluster, Linkage, Metric};
    use llmap_core::DMatrix;

    #[test]
    fn divergence_round_trip() {
        let div = DivergenceMatrix {
            model_ids: vec!["a".into(), "b".into()],
            values: DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]),
            unit: DivergenceUnit::BitsPerByte,
            mean_text_bytes: Some(3.0),
        };
        let text = divergence_to_tsv(&div);
        assert_eq!(text, "bits_per_byte\ta\tb\na\t0\t0.5\nb\t0.5\t0\n");
        let back = parse_divergence_tsv(&text, Path::new("d.tsv")).unwrap();
        assert_eq!(back.values, div.values);
        assert_eq!(back.unit, DivergenceUnit::BitsPerByte);
        assert!(parse_divergence_tsv("furlongs\ta\na\t0\n", Path::new("d.tsv")).is_err());
    }

    #[test]
    fn dendrogram_layout() {
        let rows = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 3.0]);
        let mut d = hcluster(&rows, Metric::SqEuclidean, Linkage::Average).unwrap();
        d.leaves = vec!["x".into(), "y".into(), "z".into()];
        let v: serde_json::Value = serde_json::from_str(&dendrogram_to_json(&d)).unwrap();
        assert_eq!(v["merges"][0], serde_json::json!([0, 1, 1.0, 2]));
        assert_eq!(v["merges"][1], serde_json::json!([2, 3, 6.5, 3]));
        assert_eq!(v["metric"], "sqeuclidean");
        assert_eq!(v["linkage"], "average");
        assert_eq!(v["leaves"][2], "z");
    }

    #[test]
    fn predictions_round_trip() {
        let rows = vec![PredictionRow {
            model_id: "m0".into(),
            target_name: "ARC".into(),
            predicted: 41.25,
            actual: 40.0,
            fold: 3,
            seed_count: 5,
        }];
        let text = predictions_to_tsv(&rows);
        assert_eq!(parse_predictions_tsv(&text, Path::new("p.tsv")).unwrap(), rows);
    }
}
