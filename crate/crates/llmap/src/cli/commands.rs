use std::collections::BTreeSet;

use llmap_core::analysis::{correlations, leakage_scores, primary_category, primary_task, StandardizedScores};
use llmap_core::geometry::{kl_matrix, nearest_neighbors, to_bits_per_byte};
use llmap_core::mapping::{hcluster, kl_scaled_rows, pca, tsne, Linkage, Metric, TsneParams};
use llmap_core::matrix::{
    chunk_corpus, clip_lower, double_center, sample_texts, ClipScope, LogLikMatrix, ModelRecord, RawText,
};
use llmap_core::oracle::{interpolate_loglik, weight_plane_coords, InterpolationGrid, VarianceReport};
use llmap_core::predict::{
    audit_group_atomicity, benchmark_alpha_grid, cross_val_predict, loglik_alpha_grid, PredictionTask, SplitKind,
    BENCHMARK_TASKS, MEAN_LOGLIK, TASK_MEAN,
};
use llmap_core::validate::{self, Bound, ExpfamConfig, GateRow, TokenConfig};
use llmap_core::DMatrix;
use serde::Serialize;
use serde_json::json;

use super::*;
use crate::formats::{
    self, dendrogram_to_json, divergence_to_tsv, embedding_to_tsv, load_matrix, neighbors_to_tsv, parse_divergence_tsv,
    parse_predictions_tsv, predictions_to_tsv, read_corpus, save_matrix, write_corpus, CorpusLine, Metadata,
    PredictionRow, TextMeta,
};
use crate::io::{read_to_string, to_json_string, write_output, Header};
use crate::synth::{synthesize, SynthConfig};

pub(super) fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Ingest(a) => ingest(&a),
        Command::Clip(a) => clip(&a),
        Command::Center(a) => center(&a),
        Command::Kl(a) => kl(&a),
        Command::Neighbors(a) => neighbors(&a),
        Command::Map(a) => map(&a),
        Command::Cluster(a) => cluster(&a),
        Command::Analyze(a) => analyze(&a),
        Command::Predict(a) => predict(&a),
        Command::Validate(a) => validate(&a),
        Command::Interp(a) => interp(&a),
        Command::Chunk(a) => chunk(&a),
        Command::Synth(a) => synth(&a),
    }
}

fn load(input: &MatrixIn) -> Result<LogLikMatrix> {
    load_matrix(&input.matrix, &input.meta)
}

fn fmt_row(out: &mut String, id: &str, values: impl IntoIterator<Item = f64>) {
    out.push_str(id);
    for v in values {
        out.push('\t');
        formats::fmt_f64(out, v);
    }
    out.push('\n');
}

fn ingest(a: &IngestArgs) -> Result<()> {
    let m = load(&a.input)?;
    let h = Header::new("ingest", a, None);
    save_matrix(&m, &a.out, None, Some(&h))?;
    write_output(&a.out_meta, &formats::metadata_from_matrix(&m).to_json(), &h)
}

fn clip(a: &ClipArgs) -> Result<()> {
    let m = load(&a.input)?;
    let scope = match a.scope {
        Scope::Global => ClipScope::Global,
        Scope::Row => ClipScope::PerRow,
    };
    let (clipped, report) = clip_lower(&m, a.clip_fraction, scope)?;
    let h = Header::new("clip", a, None);
    save_matrix(&clipped, &a.out, None, Some(&h))?;
    if let Some(path) = &a.report {
        let body = json!({
            "threshold": report.threshold,
            "row_thresholds": report.row_thresholds,
            "fraction_requested": report.fraction_requested,
            "entries_clipped": report.entries_clipped,
            "scope": a.scope,
        });
        write_output(path, &to_json_string(&body), &h)?;
    }
    Ok(())
}

fn center(a: &CenterArgs) -> Result<()> {
    let m = load(&a.input)?;
    let c = double_center(&m);
    let h = Header::new("center", a, None);
    let q = m.with_values(c.q.clone())?;
    save_matrix(&q, &a.out, None, Some(&h))?;
    if let Some(path) = &a.means {
        let root_n = (m.n_texts() as f64).sqrt();
        let mut out = String::from("model_id\tmean_loglik\theight\n");
        for (id, mean) in c.model_ids.iter().zip(c.mean_loglik.iter()) {
            fmt_row(&mut out, id, [*mean, root_n * mean]);
        }
        write_output(path, &out, &h)?;
    }
    Ok(())
}

fn kl(a: &KlArgs) -> Result<()> {
    let m = load(&a.input)?;
    let mut div = kl_matrix(&double_center(&m))?;
    if a.unit == Unit::BitsPerByte {
        div = to_bits_per_byte(&div, a.mean_text_bytes.unwrap_or_else(|| m.mean_text_bytes()))?;
    }
    write_output(&a.out, &divergence_to_tsv(&div), &Header::new("kl", a, None))
}

fn neighbors(a: &NeighborsArgs) -> Result<()> {
    let div = parse_divergence_tsv(&read_to_string(&a.divergence)?, &a.divergence)?;
    let queries = match &a.query {
        Some(q) => vec![q.clone()],
        None => div.model_ids.clone(),
    };
    let tables = queries
        .iter()
        .map(|q| nearest_neighbors(&div, q, a.top))
        .collect::<Result<Vec<_>, _>>()?;
    write_output(&a.out, &neighbors_to_tsv(&tables), &Header::new("neighbors", a, None))
}

fn rows_of(m: &LogLikMatrix, on: Rows) -> DMatrix<f64> {
    match on {
        Rows::L => m.values().clone(),
        Rows::Q => double_center(m).q,
    }
}

fn map(a: &MapArgs) -> Result<()> {
    let m = load(&a.input)?;
    let data = rows_of(&m, a.on);
    let mut e = match a.method {
        Method::Pca => {
            let mut e = pca(&data, 2.min(data.nrows().min(data.ncols())))?.embedding;
            e.seed = a.seed;
            e
        }
        Method::Tsne => tsne(
            &data,
            &TsneParams {
                perplexity: a.perplexity,
                iterations: a.iterations,
                learning_rate: a.learning_rate,
                seed: a.seed,
            },
        )?,
    };
    e.model_ids = m.model_ids();
    write_output(&a.out, &embedding_to_tsv(&e), &Header::new("map", a, Some(a.seed)))
}

fn cluster(a: &ClusterArgs) -> Result<()> {
    let m = load(&a.input)?;
    let rows = if a.kl_scale {
        kl_scaled_rows(&double_center(&m))
    } else {
        rows_of(&m, a.on)
    };
    let metric = match a.metric {
        MetricArg::Sqeuclidean => Metric::SqEuclidean,
        MetricArg::Correlation => Metric::Correlation,
    };
    let linkage = match a.linkage {
        LinkageArg::Median => Linkage::Median,
        LinkageArg::Average => Linkage::Average,
    };
    let mut d = hcluster(&rows, metric, linkage)?;
    d.leaves = m.model_ids();
    if a.kl_scale && metric == Metric::SqEuclidean {
        d.height_unit = "nats_per_text".into();
    }
    write_output(&a.out, &dendrogram_to_json(&d), &Header::new("cluster", a, None))
}

fn z_table(first: &str, ids: &[String], z: &StandardizedScores, label: impl Fn(usize) -> String) -> String {
    let mut out = format!("{first}\tprimary");
    for l in &z.axis_labels {
        out.push('\t');
        out.push_str(l);
    }
    out.push('\n');
    for (i, id) in ids.iter().enumerate() {
        out.push_str(id);
        out.push('\t');
        out.push_str(&label(i));
        for c in 0..z.per_model.ncols() {
            out.push('\t');
            formats::fmt_f64(&mut out, z.per_model[(i, c)]);
        }
        out.push('\n');
    }
    out
}

fn require<'a, T>(v: &'a Option<T>, flag: &str, kind: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::Config(format!("`analyze {kind}` needs --{flag}")))
}

/// Models with every benchmark score, with the K×6 score matrix.
fn benchmark_rows(models: &[ModelRecord]) -> (Vec<usize>, DMatrix<f64>) {
    let keep: Vec<usize> = (0..models.len())
        .filter(|&i| {
            BENCHMARK_TASKS
                .iter()
                .all(|t| models[i].benchmark_scores.contains_key(*t))
        })
        .collect();
    let scores = DMatrix::from_fn(keep.len(), BENCHMARK_TASKS.len(), |r, c| {
        models[keep[r]].benchmark_scores[BENCHMARK_TASKS[c]]
    });
    (keep, scores)
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let h = Header::new("analyze", a, None);
    let kind = match a.kind {
        AnalyzeKind::PrimaryCategory => "primary-category",
        AnalyzeKind::PrimaryTask => "primary-task",
        AnalyzeKind::Leakage => "leakage",
        AnalyzeKind::Correlate => "correlate",
    };
    let matrix = || -> Result<LogLikMatrix> {
        load_matrix(require(&a.matrix, "matrix", kind)?, require(&a.meta, "meta", kind)?)
    };
    let out = match a.kind {
        AnalyzeKind::PrimaryCategory => {
            let m = matrix()?;
            let (z, labels) = primary_category(&m)?;
            z_table("model_id", &m.model_ids(), &z, |i| labels[i].clone())
        }
        AnalyzeKind::PrimaryTask => {
            let meta = Metadata::load(require(&a.meta, "meta", kind)?)?;
            let models: Vec<ModelRecord> = meta
                .models
                .iter()
                .map(|mm| {
                    let mut r = ModelRecord::new(mm.id.clone(), mm.model_type.clone());
                    r.benchmark_scores = mm.scores.clone();
                    r
                })
                .collect();
            let (keep, scores) = benchmark_rows(&models);
            if keep.is_empty() {
                return Err(Error::Data("no model has all six benchmark scores".into()));
            }
            let names: Vec<String> = BENCHMARK_TASKS.iter().map(|t| t.to_string()).collect();
            let (z, labels) = primary_task(&scores, &names)?;
            let ids: Vec<String> = keep.iter().map(|&i| models[i].model_id.clone()).collect();
            z_table("model_id", &ids, &z, |i| labels[i].to_string())
        }
        AnalyzeKind::Leakage => {
            let m = matrix()?;
            let (keep, scores) = benchmark_rows(m.models());
            let means = double_center(&m).mean_loglik;
            let ll: Vec<f64> = keep.iter().map(|&i| means[i]).collect();
            let bench: Vec<f64> = (0..keep.len()).map(|r| scores.row(r).mean()).collect();
            let rep = leakage_scores(&ll, &bench, a.threshold)?;
            let mut out = String::from("model_id\tmean_loglik\ttask_mean\tleakage\tflagged\n");
            for (r, &i) in keep.iter().enumerate() {
                out.push_str(&m.models()[i].model_id);
                for v in [ll[r], bench[r], rep.per_model[r]] {
                    out.push('\t');
                    formats::fmt_f64(&mut out, v);
                }
                out.push_str(if rep.flagged.contains(&r) {
                    "\ttrue\n"
                } else {
                    "\tfalse\n"
                });
            }
            out
        }
        AnalyzeKind::Correlate => {
            let path = require(&a.predictions, "predictions", kind)?;
            let rows = parse_predictions_tsv(&read_to_string(path)?, path)?;
            let pred: Vec<f64> = rows.iter().map(|r| r.predicted).collect();
            let actual: Vec<f64> = rows.iter().map(|r| r.actual).collect();
            let c = correlations(&pred, &actual)?;
            println!(
                "pearson_r\t{}\nspearman_rho\t{}\nn\t{}",
                c.pearson_r, c.spearman_rho, c.n
            );
            to_json_string(&json!({"pearson_r": c.pearson_r, "spearman_rho": c.spearman_rho, "n": c.n}))
        }
    };
    write_output(&a.out, &out, &h)
}

fn predict(a: &PredictArgs) -> Result<()> {
    let m = load(&a.input)?;
    let is_bench = BENCHMARK_TASKS.contains(&a.target.as_str()) || a.target == TASK_MEAN;
    if !is_bench && a.target != MEAN_LOGLIK {
        return Err(Error::Config(format!(
            "unknown target `{}`; expected one of {}, {TASK_MEAN} or {MEAN_LOGLIK}",
            a.target,
            BENCHMARK_TASKS.join(", ")
        )));
    }
    let means = double_center(&m).mean_loglik;
    let mut keep = Vec::new();
    let mut target = Vec::new();
    for (i, r) in m.models().iter().enumerate() {
        let s = &r.benchmark_scores;
        let y = if a.target == MEAN_LOGLIK {
            Some(means[i])
        } else if a.target == TASK_MEAN {
            BENCHMARK_TASKS
                .iter()
                .map(|t| s.get(*t).copied())
                .sum::<Option<f64>>()
                .map(|v| v / BENCHMARK_TASKS.len() as f64)
        } else {
            s.get(&a.target).copied()
        };
        if let Some(y) = y {
            keep.push(i);
            target.push(y);
        }
    }
    if keep.len() < 2 {
        return Err(Error::Data(format!(
            "{} models carry target `{}`",
            keep.len(),
            a.target
        )));
    }
    let sub = m.select_models(&keep)?;
    let groups: Vec<String> = sub
        .models()
        .iter()
        .map(|r| match a.group_by {
            GroupBy::Type => r.model_type.clone(),
            GroupBy::Id => r.model_id.clone(),
        })
        .collect();
    let grid = match &a.alphas {
        Some(g) if !g.is_empty() => g.clone(),
        Some(_) => return Err(Error::Config("--alphas is empty".into())),
        None if is_bench => benchmark_alpha_grid(),
        None => loglik_alpha_grid(),
    };
    let mut task = PredictionTask::new(rows_of(&sub, a.features), target.clone(), groups.clone(), grid);
    task.n_folds = a.folds;
    task.inner_folds = a.inner_folds;
    task.seeds = (0..a.seeds as u64).map(|s| a.seed + s).collect();
    task.clip_range = is_bench.then_some((0.0, 100.0));
    task.split = match a.split {
        Split::Grouped => SplitKind::Grouped,
        Split::Random => SplitKind::Random,
    };
    task.fit_intercept = !a.no_intercept;
    let res = cross_val_predict(&task)?;

    let rows: Vec<PredictionRow> = sub
        .model_ids()
        .into_iter()
        .enumerate()
        .map(|(i, id)| PredictionRow {
            model_id: id,
            target_name: a.target.clone(),
            predicted: res.predictions[i],
            actual: target[i],
            fold: res.plans[0].fold_of[i],
            seed_count: task.seeds.len(),
        })
        .collect();
    write_output(
        &a.out,
        &predictions_to_tsv(&rows),
        &Header::new("predict", a, Some(a.seed)),
    )?;
    if res.inner_fallbacks > 0 {
        eprintln!(
            "llmap: {} outer folds used ungrouped inner folds (too few groups)",
            res.inner_fallbacks
        );
    }
    match &res.report {
        Some(c) => println!(
            "pearson_r\t{}\nspearman_rho\t{}\nn\t{}",
            c.pearson_r, c.spearman_rho, c.n
        ),
        None => println!("pearson_r\tNaN\nspearman_rho\tNaN\nn\t{}", rows.len()),
    }
    if task.split == SplitKind::Grouped && !res.plans.iter().all(|p| audit_group_atomicity(&groups, p)) {
        return Err(Error::Gate("a group was split across outer folds".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct GateJson<'a> {
    name: &'a str,
    value: f64,
    threshold: f64,
    bound: &'static str,
    pass: bool,
}

fn bound_str(b: Bound) -> &'static str {
    match b {
        Bound::AtMost => "<=",
        Bound::AtLeast => ">=",
        Bound::Info => "info",
    }
}

fn pair_json(r: &VarianceReport) -> serde_json::Value {
    json!({
        "i": r.i,
        "j": r.j,
        "lambda": r.lambda,
        "n_samples": r.n_samples,
        "exact_2kl": r.exact_2kl,
        "variance_exact": r.variance_exact,
        "variance_sampled": r.variance_sampled,
        "q_estimate": r.q_estimate,
        "errors": {"theory": r.theory_error(), "sampling": r.sampling_error(), "relative": r.relative_error()},
    })
}

fn validate(a: &ValidateArgs) -> Result<()> {
    let mut extra = serde_json::Map::new();
    let rows: Vec<GateRow> = match a.kind {
        ValidateKind::Identities => {
            let tol = a.tolerance.unwrap_or(1e-9);
            match &a.matrix {
                Some(path) => {
                    let meta = a
                        .meta
                        .as_ref()
                        .ok_or_else(|| Error::Config("--matrix needs --meta".into()))?;
                    validate::identities_on(load_matrix(path, meta)?.values(), a.seed, tol)
                }
                None => validate::identities(a.matrices, a.seed, tol),
            }
        }
        ValidateKind::Expfam => {
            let mut cfg = ExpfamConfig {
                n_samples: a.samples,
                trials: a.trials,
                seed: a.seed,
                ..Default::default()
            };
            if let Some(l) = a.lambda {
                cfg.lambda = l;
            }
            if let Some(t) = a.tolerance {
                cfg.tolerance = t;
            }
            let out = validate::expfam_gates(&cfg)?;
            extra.insert("pairs".into(), out.reports.iter().map(pair_json).collect());
            extra.insert("generator_pairs".into(), out.robustness.iter().map(pair_json).collect());
            extra.insert(
                "theory_error_by_lambda".into(),
                out.theory_error_by_lambda
                    .iter()
                    .map(|(l, e)| json!({"lambda": l, "mean_theory_error": e}))
                    .collect(),
            );
            out.rows
        }
        ValidateKind::Token => {
            let mut cfg = TokenConfig {
                texts: a.texts,
                seed: a.seed,
                ..Default::default()
            };
            if let Some(l) = a.lambda {
                cfg.lambda = l;
            }
            validate::token_gates(&cfg)?
        }
    };
    for r in &rows {
        let verdict = match (r.bound, r.pass()) {
            (Bound::Info, _) => "INFO",
            (_, true) => "PASS",
            (_, false) => "FAIL",
        };
        match r.bound {
            Bound::Info => println!("{verdict}\t{}\t{:.6e}", r.name, r.value),
            b => println!(
                "{verdict}\t{}\t{:.6e}\t{} {:e}",
                r.name,
                r.value,
                bound_str(b),
                r.threshold
            ),
        }
    }
    if let Some(path) = &a.out {
        let gates: Vec<GateJson> = rows
            .iter()
            .map(|r| GateJson {
                name: &r.name,
                value: r.value,
                threshold: r.threshold,
                bound: bound_str(r.bound),
                pass: r.pass(),
            })
            .collect();
        let mut body = serde_json::Map::new();
        body.insert("kind".into(), serde_json::to_value(a.kind).expect("enum"));
        body.insert("gates".into(), serde_json::to_value(gates).expect("gates"));
        body.append(&mut extra);
        write_output(path, &to_json_string(&body), &Header::new("validate", a, Some(a.seed)))?;
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass()).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Gate(failed.join(", ")))
    }
}

fn interp(a: &InterpArgs) -> Result<()> {
    let m = load(&a.input)?;
    let row = |id: &str| -> Result<Vec<f64>> {
        let i = m
            .model_index(id)
            .ok_or_else(|| Error::Data(format!("unknown model `{id}`")))?;
        Ok(m.values().row(i).iter().copied().collect())
    };
    let grid = InterpolationGrid::new(
        vec![a.alpha],
        vec![a.beta],
        row(&a.base)?,
        row(&a.parent1)?,
        row(&a.parent2)?,
    )?;
    let id = format!("interp_a{}_b{}", a.alpha, a.beta);
    let values = interpolate_loglik(&grid, a.alpha, a.beta)?;
    let mut rec = ModelRecord::new(id.clone(), "interpolated");
    rec.tags = BTreeSet::from([a.base.clone(), a.parent1.clone(), a.parent2.clone()]);
    let out = LogLikMatrix::new(
        vec![rec],
        m.texts().to_vec(),
        DMatrix::from_row_slice(1, values.len(), &values),
    )?;
    let h = Header::new("interp", a, None);
    save_matrix(&out, &a.out, None, Some(&h))?;
    if let Some(p) = &a.out_meta {
        write_output(p, &formats::metadata_from_matrix(&out).to_json(), &h)?;
    }
    if let Some(p) = &a.plane_out {
        let (Some(r1), Some(r2), Some(phi)) = (a.r1, a.r2, a.phi) else {
            return Err(Error::Config("--plane-out needs --r1, --r2 and --phi".into()));
        };
        let (x, y) = weight_plane_coords(r1, r2, phi, a.alpha, a.beta)?;
        let mut s = String::from("model_id\tx\ty\n");
        fmt_row(&mut s, &id, [x, y]);
        write_output(p, &s, &h)?;
    }
    Ok(())
}

fn chunk(a: &ChunkArgs) -> Result<()> {
    let lines = read_corpus(&read_to_string(&a.input)?, &a.input)?;
    let raw = lines.iter().map(|l| RawText {
        id: &l.id,
        category: &l.category,
        bytes: l.text.as_bytes(),
    });
    let mut chunks = chunk_corpus(raw, a.bytes, a.min)?;
    if let Some(n) = a.sample {
        let records: Vec<_> = chunks.iter().map(|c| c.record.clone()).collect();
        let kept: BTreeSet<String> = sample_texts(&records, n, a.seed)?
            .into_iter()
            .map(|r| r.text_id)
            .collect();
        chunks.retain(|c| kept.contains(&c.record.text_id));
    }
    let out: Vec<CorpusLine> = chunks
        .iter()
        .map(|c| CorpusLine {
            id: c.record.text_id.clone(),
            text: c.payload.clone(),
            category: c.record.category.clone(),
        })
        .collect();
    let meta = Metadata {
        models: Vec::new(),
        texts: chunks
            .iter()
            .map(|c| TextMeta {
                id: c.record.text_id.clone(),
                category: c.record.category.clone(),
                byte_length: c.record.byte_length,
            })
            .collect(),
    };
    let h = Header::new("chunk", a, Some(a.seed));
    write_output(&a.out, &write_corpus(&out), &h)?;
    write_output(&a.out_meta, &meta.to_json(), &h)
}

fn synth(a: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        models: a.models,
        types: a.types,
        texts: a.texts,
        outcomes: a.outcomes,
        lambda: a.lambda,
        seed: a.seed,
        ..Default::default()
    };
    let m = synthesize(&cfg)?;
    let h = Header::new("synth", &cfg, Some(a.seed));
    save_matrix(&m, &a.out, Some(&a.out_meta), Some(&h))
}
