//! `llmap` subcommands.
//!
//! Every subcommand reads and writes files only. Output files get a
//! `<file>.header.json` sidecar holding the command, the full resolved
//! configuration and the seed.
//!
//! `--config FILE` names a JSON object whose keys are long flag names
//! (`clip_fraction` or `clip-fraction`); values from the file apply first
//! and flags given on the command line win.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "llmap", version, about = "Language models as points in log-likelihood space")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a matrix and its metadata and write canonical copies.
    Ingest(IngestArgs),
    /// Raise the lowest entries to a quantile threshold.
    Clip(ClipArgs),
    /// Double-center a matrix; the output is q in matrix format.
    Center(CenterArgs),
    /// Pairwise KL estimates.
    Kl(KlArgs),
    /// Nearest neighbors from a divergence table.
    Neighbors(NeighborsArgs),
    /// 2-D model map by PCA or exact t-SNE.
    Map(MapArgs),
    /// Agglomerative clustering dendrogram.
    Cluster(ClusterArgs),
    /// Standardized-score reports.
    Analyze(AnalyzeArgs),
    /// Cross-validated ridge predictions of a benchmark target.
    Predict(PredictArgs),
    /// Run validation gates; exits 4 when one fails.
    Validate(ValidateArgs),
    /// Interpolated log-likelihoods of a merged model.
    Interp(InterpArgs),
    /// Split a JSONL corpus into byte-bounded chunks.
    Chunk(ChunkArgs),
    /// Generate a toy matrix and metadata from a finite exponential family.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MatrixIn {
    /// Matrix TSV.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Metadata JSON.
    #[arg(long)]
    pub meta: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IngestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: MatrixIn,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub out_meta: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Global,
    Row,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClipArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: MatrixIn,
    /// Fraction of entries at the bottom to clip.
    #[arg(long, default_value_t = 0.02)]
    pub clip_fraction: f64,
    #[arg(long, value_enum, default_value_t = Scope::Global)]
    pub scope: Scope,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional JSON clip report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CenterArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: MatrixIn,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional TSV of per-model mean log-likelihood and height.
    #[arg(long)]
    pub means: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Unit {
    #[value(name = "nats_per_text", alias = "nats")]
    #[serde(rename = "nats_per_text")]
    NatsPerText,
    #[value(name = "bits_per_byte", alias = "bpb")]
    #[serde(rename = "bits_per_byte")]
    BitsPerByte,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KlArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: MatrixIn,
    #[arg(long, value_enum, default_value_t = Unit::NatsPerText)]
    pub unit: Unit,
    /// Overrides the mean of the metadata byte lengths.
    #[arg(long)]
    pub mean_text_bytes: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NeighborsArgs {
    /// Divergence TSV written by `kl`.
    #[arg(long)]
    pub divergence: PathBuf,
    /// Query model; every model when omitted.
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pca,
    Tsne,
}

/// Rows used as coordinates: raw log-likelihoods or double-centered q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Rows {
    #[value(name = "L", alias = "l")]
    L,
    #[value(name = "Q", alias = "q")]
    Q,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MapArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: MatrixIn,
    #[arg(long, value_enum, default_value_t = Method::Tsne)]
    pub method: Method,
    #[arg(long, value_enum, default_value_t = Rows::L)]
    pub on: Rows,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 30.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 200.0)]
    pub learning_rate: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Sqeuclidean,
    Correlation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkageArg {
    Median,
    Average,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClusterArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: MatrixIn,
    #[arg(long, value_enum, default_value_t = MetricArg::Sqeuclidean)]
    pub metric: MetricArg,
    #[arg(long, value_enum, default_value_t = LinkageArg::Median)]
    pub linkage: LinkageArg,
    /// Cluster q/√(2N) so squared-distance heights read as KL in nats/text.
    #[arg(long)]
    pub kl_scale: bool,
    #[arg(long, value_enum, default_value_t = Rows::Q)]
    pub on: Rows,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalyzeKind {
    PrimaryCategory,
    PrimaryTask,
    Leakage,
    Correlate,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(value_enum)]
    pub kind: AnalyzeKind,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Leakage flag threshold in z units.
    #[arg(long, default_value_t = 1.0)]
    pub threshold: f64,
    /// Predictions TSV for `correlate`.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Type,
    Id,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Grouped,
    Random,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: MatrixIn,
    /// ARC, HellaSwag, MMLU, TruthfulQA, Winogrande, GSM8K, 6-TaskMean or mean_loglik.
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 5)]
    pub inner_folds: usize,
    /// Number of seeds to average over.
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = GroupBy::Type)]
    pub group_by: GroupBy,
    #[arg(long, value_enum, default_value_t = Split::Grouped)]
    pub split: Split,
    #[arg(long, value_enum, default_value_t = Rows::Q)]
    pub features: Rows,
    #[arg(long)]
    pub no_intercept: bool,
    /// Comma-separated alpha grid replacing the default for the target.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidateKind {
    Identities,
    Expfam,
    Token,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[arg(value_enum)]
    pub kind: ValidateKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random matrices for `identities`.
    #[arg(long, default_value_t = 100)]
    pub matrices: usize,
    /// Check `identities` on this matrix instead of random ones.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Gate tolerance; 1e-9 for `identities`, 0.05 for `expfam`.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Perturbation size; 0.1 for `expfam`, 0.3 for `token`.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 200)]
    pub texts: usize,
    /// JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InterpArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: MatrixIn,
    /// Model playing ℓ₀.
    #[arg(long)]
    pub base: String,
    #[arg(long)]
    pub parent1: String,
    #[arg(long)]
    pub parent2: String,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub r1: Option<f64>,
    #[arg(long)]
    pub r2: Option<f64>,
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub out_meta: Option<PathBuf>,
    /// Weight-plane placement TSV; needs r1, r2 and phi.
    #[arg(long)]
    pub plane_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ChunkArgs {
    /// Corpus JSONL with id, text and category.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1024)]
    pub bytes: usize,
    #[arg(long, default_value_t = 256)]
    pub min: usize,
    /// Keep a seeded uniform sample of this many chunks.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Metadata JSON listing the kept chunks.
    #[arg(long)]
    pub out_meta: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    pub models: usize,
    #[arg(long, default_value_t = 4)]
    pub types: usize,
    #[arg(long, default_value_t = 200)]
    pub texts: usize,
    #[arg(long, default_value_t = 64)]
    pub outcomes: usize,
    #[arg(long, default_value_t = 0.3)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub out_meta: PathBuf,
}

/// Pull `--config FILE` out of `argv` and splice the file's settings in
/// right after the subcommand name, ahead of the user's own flags.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            config = Some(PathBuf::from(
                it.next().ok_or_else(|| Error::Config("--config needs a path".into()))?,
            ));
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let serde_json::Value::Object(map) = value else {
        return Err(Error::Config(format!("{}: expected a JSON object", path.display())));
    };
    let mut injected = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &serde_json::Value| match v {
            serde_json::Value::String(s) => Ok(s.clone()),
            serde_json::Value::Number(n) => Ok(n.to_string()),
            other => Err(Error::Config(format!("`{key}`: unsupported value {other}"))),
        };
        match &v {
            serde_json::Value::Null | serde_json::Value::Bool(false) => {}
            serde_json::Value::Bool(true) => injected.push(OsString::from(flag)),
            serde_json::Value::Array(items) => {
                let joined = items.iter().map(scalar).collect::<Result<Vec<_>>>()?.join(",");
                injected.push(OsString::from(format!("{flag}={joined}")));
            }
            other => injected.push(OsString::from(format!("{flag}={}", scalar(other)?))),
        }
    }
    let sub = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 2)
        .ok_or_else(|| Error::Config("--config given without a subcommand".into()))?;
    rest.splice(sub..sub, injected);
    Ok(rest)
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv = match expand_config(argv.into_iter().map(Into::into).collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("llmap: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("llmap: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(args: &[&str]) -> Vec<OsString> {
        args.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_values_go_before_user_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(
            &cfg,
            r#"{"clip_fraction": 0.05, "scope": "row", "alphas": [1, 10], "kl_scale": true, "x": null}"#,
        )
        .unwrap();
        let argv = os(&[
            "llmap",
            "--config",
            cfg.to_str().unwrap(),
            "clip",
            "--clip-fraction",
            "0.1",
        ]);
        let out = expand_config(argv).unwrap();
        let strs: Vec<String> = out.iter().map(|s| s.to_string_lossy().into_owned()).collect();
        assert_eq!(
            strs,
            [
                "llmap",
                "clip",
                "--alphas=1,10",
                "--clip-fraction=0.05",
                "--kl-scale",
                "--scope=row",
                "--clip-fraction",
                "0.1"
            ]
        );
    }

    #[test]
    fn flags_win_over_config() {
        let argv = os(&[
            "llmap",
            "clip",
            "--matrix",
            "m",
            "--meta",
            "j",
            "--out",
            "o",
            "--clip-fraction=0.05",
            "--clip-fraction",
            "0.1",
        ]);
        let Command::Clip(a) = Cli::try_parse_from(argv).unwrap().command else {
            panic!()
        };
        assert_eq!(a.clip_fraction, 0.1);
    }

    #[test]
    fn bad_config_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, "[1]").unwrap();
        assert_eq!(run(os(&["llmap", "--config", cfg.to_str().unwrap(), "kl"])), 2);
        assert_eq!(run(os(&["llmap", "no-such-command"])), 2);
        assert_eq!(run(os(&["llmap", "kl", "--unit", "furlongs"])), 2);
    }

    #[test]
    fn defaults_match_the_documented_settings() {
        let Command::Clip(c) =
            Cli::try_parse_from(os(&["llmap", "clip", "--matrix", "m", "--meta", "j", "--out", "o"]))
                .unwrap()
                .command
        else {
            panic!()
        };
        assert_eq!((c.clip_fraction, c.scope), (0.02, Scope::Global));
        let Command::Map(m) = Cli::try_parse_from(os(&["llmap", "map", "--matrix", "m", "--meta", "j", "--out", "o"]))
            .unwrap()
            .command
        else {
            panic!()
        };
        assert_eq!(m.perplexity, 30.0);
        let Command::Predict(p) = Cli::try_parse_from(os(&[
            "llmap", "predict", "--matrix", "m", "--meta", "j", "--out", "o", "--target", "ARC",
        ]))
        .unwrap()
        .command
        else {
            panic!()
        };
        assert_eq!((p.folds, p.seeds, p.split), (5, 5, Split::Grouped));
    }
}
