//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Runs without the libtest harness so the lines are always shown.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use llmap_core::geometry::{bits_per_byte_factor, to_bits_per_byte, DivergenceMatrix, DivergenceUnit};
use llmap_core::mapping::{
    hcluster, nearest_neighbor_tour, tour_length, tsne, tsp_hue_order, Linkage, Merge, Metric, TsneParams,
};
use llmap_core::matrix::{double_center, quantile_sorted, LogLikMatrix};
use llmap_core::predict::{audit_group_atomicity, cross_val_predict, group_kfold, PredictionTask};
use llmap_core::rng::SplitMix64;
use llmap_core::validate::{self, ExpfamConfig, GateRow, TokenConfig};
use llmap_core::DMatrix;

const BIN: &str = env!("CARGO_BIN_EXE_llmap");

struct Suite {
    failed: Vec<&'static str>,
}

impl Suite {
    fn report(&mut self, name: &'static str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(name);
        }
    }
}

fn row<'a>(rows: &'a [GateRow], name: &str) -> &'a GateRow {
    rows.iter()
        .find(|r| r.name == name)
        .unwrap_or_else(|| panic!("no gate {name}"))
}

fn describe(rows: &[&GateRow]) -> String {
    rows.iter()
        .map(|r| format!("{}={:.3e}{}", r.name, r.value, if r.pass() { "" } else { " (fail)" }))
        .collect::<Vec<_>>()
        .join(", ")
}

fn identities(s: &mut Suite) {
    let t = Instant::now();
    let rows = validate::identities(100, 0, 1e-9);
    let took = t.elapsed();
    let exact: Vec<&GateRow> = rows.iter().filter(|r| r.name != "identities.variance_form").collect();
    let pass = exact.iter().all(|r| r.pass()) && took < Duration::from_secs(5);
    s.report(
        "exact_identities",
        pass,
        format!("{} in {:.2?}", describe(&exact), took),
    );
    let vf = row(&rows, "identities.variance_form");
    s.report("variance_form", vf.pass(), describe(&[vf]));
}

fn unit_conversion(s: &mut Suite) {
    let div = DivergenceMatrix {
        model_ids: vec!["a".into(), "b".into()],
        values: DMatrix::from_row_slice(2, 2, &[0.0, 1000.0, 1000.0, 0.0]),
        unit: DivergenceUnit::NatsPerText,
        mean_text_bytes: None,
    };
    let bpb = to_bits_per_byte(&div, 972.3188).unwrap().values[(0, 1)];
    let factor = bits_per_byte_factor(972.3188);
    let pass = (bpb - 1.484).abs() <= 0.001 && (factor - 0.001484).abs() <= 1e-6;
    s.report(
        "unit_conversion",
        pass,
        format!("1000 nats/text = {bpb:.6} bits/byte, factor {factor:.9}"),
    );
}

fn expfam(s: &mut Suite) {
    let t = Instant::now();
    let out = validate::expfam_gates(&ExpfamConfig::default()).unwrap();
    let took = t.elapsed();
    let gated = [
        row(&out.rows, "expfam.max_relative_error"),
        row(&out.rows, "expfam.q_estimate_vs_sample_variance"),
        row(&out.rows, "expfam.lambda_halving_ratio"),
    ];
    let pass = gated.iter().all(|r| r.pass()) && took < Duration::from_secs(60);
    s.report("expfam_oracle", pass, format!("{} in {:.2?}", describe(&gated), took));
    let g = row(&out.rows, "expfam.generator_robustness");
    s.report("generator_robustness", g.pass(), describe(&[g]));
}

fn token(s: &mut Suite) {
    let rows = validate::token_gates(&TokenConfig::default()).unwrap();
    let gated = [
        row(&rows, "token.pearson_r_pairs"),
        row(&rows, "token.dp_vs_enumeration"),
    ];
    s.report("token_validation", gated.iter().all(|r| r.pass()), describe(&gated));
}

fn linear_task(seed: u64, permute: Option<u64>) -> PredictionTask {
    let mut rng = SplitMix64::new(seed);
    let l = DMatrix::from_fn(60, 40, |_, _| -200.0 + 20.0 * rng.normal());
    let q = double_center(&LogLikMatrix::from_values(l).unwrap()).q;
    let w: Vec<f64> = (0..40).map(|_| rng.normal()).collect();
    let mut y: Vec<f64> = (0..60).map(|i| (0..40).map(|c| q[(i, c)] * w[c]).sum()).collect();
    if let Some(p) = permute {
        SplitMix64::new(p).shuffle(&mut y);
    }
    let groups = (0..60).map(|i| format!("type{}", i % 12)).collect();
    let mut grid = vec![1e-8];
    grid.extend(llmap_core::predict::loglik_alpha_grid());
    let mut task = PredictionTask::new(q, y, groups, grid);
    task.seeds = vec![0];
    task
}

fn abs_r(task: &PredictionTask) -> f64 {
    cross_val_predict(task)
        .unwrap()
        .report
        .map_or(0.0, |r| r.pearson_r.abs())
}

fn ridge(s: &mut Suite) {
    let res = cross_val_predict(&linear_task(1, None)).unwrap();
    let r = res.report.unwrap().pearson_r;
    s.report("ridge_noiseless", r >= 0.999, format!("held-out r = {r:.6}"));

    let control = abs_r(&linear_task(1, Some(0)));
    let mut null: Vec<f64> = (1..=100).map(|p| abs_r(&linear_task(1, Some(p)))).collect();
    null.sort_by(f64::total_cmp);
    let p95 = quantile_sorted(&null, 0.95);
    s.report(
        "ridge_permutation_control",
        control < p95,
        format!("|r| = {control:.4}, null 95th percentile = {p95:.4}"),
    );

    let mut rng = SplitMix64::new(2024);
    let mut ok = 0;
    for trial in 0..1000u64 {
        let n = 10 + rng.below(91) as usize;
        let g = 5 + rng.below(16) as usize;
        let groups: Vec<String> = (0..n).map(|_| format!("g{}", rng.below(g as u64))).collect();
        let distinct = groups.iter().collect::<std::collections::BTreeSet<_>>().len();
        let folds = 2 + (trial as usize % 4).min(distinct.saturating_sub(2));
        if let Ok(plan) = group_kfold(&groups, folds.min(distinct), trial) {
            ok += usize::from(audit_group_atomicity(&groups, &plan));
        }
    }
    s.report(
        "group_atomicity_audit",
        ok == 1000,
        format!("{ok}/1000 assignments audited clean"),
    );
}

fn blobs() -> (DMatrix<f64>, Vec<usize>) {
    let mut rng = SplitMix64::new(5);
    let data = DMatrix::from_fn(90, 10, |i, c| if c == i / 30 { 50.0 } else { 0.0 } + rng.normal());
    (data, (0..90).map(|i| i / 30).collect())
}

fn clustering(s: &mut Suite) {
    let mut rng = SplitMix64::new(77);
    let mut monotone = 0;
    for _ in 0..100 {
        let k = 2 + rng.below(30) as usize;
        let d = 1 + rng.below(8) as usize;
        let rows = DMatrix::from_fn(k, d, |_, _| rng.normal() * 10.0);
        let dg = hcluster(&rows, Metric::SqEuclidean, Linkage::Average).unwrap();
        monotone += usize::from(dg.merges.windows(2).all(|w| w[0].height <= w[1].height));
    }
    s.report(
        "average_linkage_monotone",
        monotone == 100,
        format!("{monotone}/100 instances"),
    );

    let dg = hcluster(
        &DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 3.0]),
        Metric::SqEuclidean,
        Linkage::Average,
    )
    .unwrap();
    let want = [
        Merge {
            left: 0,
            right: 1,
            height: 1.0,
            size: 2,
        },
        Merge {
            left: 2,
            right: 3,
            height: 6.5,
            size: 3,
        },
    ];
    s.report("three_point_dendrogram", dg.merges == want, format!("{:?}", dg.merges));

    let (data, labels) = blobs();
    let params = TsneParams {
        perplexity: 10.0,
        iterations: 500,
        seed: 3,
        ..Default::default()
    };
    let a = tsne(&data, &params).unwrap();
    let b = tsne(&data, &params).unwrap();
    let same = a
        .coords
        .iter()
        .zip(b.coords.iter())
        .all(|(x, y)| x.to_bits() == y.to_bits());
    s.report("tsne_determinism", same, "two runs with seed 3 compared bitwise".into());

    // Share of each point's 5 nearest embedded neighbours from its own blob.
    let k = 5;
    let mut hits = 0;
    for i in 0..90 {
        let mut d: Vec<(f64, usize)> = (0..90)
            .filter(|&j| j != i)
            .map(|j| {
                (
                    (a.coords[(i, 0)] - a.coords[(j, 0)]).powi(2) + (a.coords[(i, 1)] - a.coords[(j, 1)]).powi(2),
                    j,
                )
            })
            .collect();
        d.sort_by(|x, y| x.0.total_cmp(&y.0));
        hits += d[..k].iter().filter(|(_, j)| labels[*j] == labels[i]).count();
    }
    let share = hits as f64 / (90 * k) as f64;
    s.report(
        "tsne_blob_neighborhoods",
        share >= 0.95,
        format!("{:.1}% same-blob neighbours", 100.0 * share),
    );

    let mut rng = SplitMix64::new(9);
    let mut never_worse = 0;
    for _ in 0..200 {
        let n = 3 + rng.below(30) as usize;
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.uniform(), rng.uniform()]).collect();
        let nn = tour_length(&pts, &nearest_neighbor_tour(&pts));
        never_worse += usize::from(tour_length(&pts, &tsp_hue_order(&pts).unwrap()) <= nn + 1e-12);
    }
    let square = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]];
    let len = tour_length(&square, &tsp_hue_order(&square).unwrap());
    s.report(
        "tsp_tours",
        never_worse == 200 && (len - 4.0).abs() < 1e-12,
        format!("2-opt <= NN on {never_worse}/200, unit square tour {len}"),
    );
}

fn llmap(dir: &Path, args: &[&str]) -> i32 {
    let out = Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run llmap");
    if !out.status.success() {
        eprintln!("llmap {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr));
    }
    out.status.code().unwrap_or(-1)
}

fn toy_pipeline(dir: &Path) -> bool {
    let m = "--matrix clipped.tsv --meta meta.json";
    let steps = [
        "synth --models 8 --seed 7 --out raw.tsv --out-meta raw.json".to_string(),
        "ingest --matrix raw.tsv --meta raw.json --out matrix.tsv --out-meta meta.json".into(),
        "clip --matrix matrix.tsv --meta meta.json --out clipped.tsv --report clip.json".into(),
        format!("center {m} --out q.tsv --means means.tsv"),
        format!("kl {m} --out kl.tsv"),
        "neighbors --divergence kl.tsv --top 3 --out neighbors.tsv".into(),
        format!("map {m} --method tsne --perplexity 2 --seed 7 --out map.tsv"),
        format!("map {m} --method pca --on Q --out pca.tsv"),
        format!("cluster {m} --kl-scale --out dendrogram.json"),
        format!("predict {m} --target 6-TaskMean --folds 4 --inner-folds 3 --seed 7 --out pred.tsv"),
    ];
    steps
        .iter()
        .all(|step| llmap(dir, &step.split(' ').collect::<Vec<_>>()) == 0)
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn cli(s: &mut Suite) {
    let tmp = tempfile::tempdir().unwrap();
    let code = llmap(tmp.path(), &["validate", "identities"]);
    s.report("cli_validate_identities", code == 0, format!("exit code {code}"));

    let t = Instant::now();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ran = toy_pipeline(a.path()) && toy_pipeline(b.path());
    let took = t.elapsed();
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let identical = ran && sa == sb;
    s.report(
        "cli_toy_pipeline",
        identical && took < Duration::from_secs(120),
        format!(
            "{} files, byte-identical: {identical}, two runs in {took:.2?}",
            sa.len()
        ),
    );
}

fn main() {
    let mut s = Suite { failed: Vec::new() };
    identities(&mut s);
    unit_conversion(&mut s);
    expfam(&mut s);
    token(&mut s);
    ridge(&mut s);
    clustering(&mut s);
    cli(&mut s);
    if s.failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: {} failing: {}", s.failed.len(), s.failed.join(", "));
        std::process::exit(1);
    }
}
