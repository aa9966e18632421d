use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nlts::backend::{estimate_cost, BackendContext, BackendSelection, CostTable, Usage};
use nlts::bench::{
    compute_metrics, load_dataset, run_sweep, theory_check, write_report, ConcaveQuadratic, DatasetFormat,
    MetricReport, NormalizationMode, SweepConfig, TheoryCheckConfig,
};
use nlts::codec::CodecConfig;
use nlts::noise::{NoiseKind, NoiseSpec};
use nlts::pipeline::{oracle_continuation, run_nlts, ForecastJob, JobSettings, PromptStyle, RunManifest, SampleReport};
use nlts::synth::{generate_benchmark, KernelSpec, DEFAULT_HOLDOUT, DEFAULT_LENGTH};
use nlts::{PointForecast, SplitSpec};

#[derive(Parser)]
#[command(name = "nlts", version, about = "Noise-augmented zero-shot forecasting with language models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forecast the held-out tail of one series.
    Forecast(Box<ForecastArgs>),
    /// Write a GP-prior benchmark: one CSV per series plus manifest.json.
    Synth(SynthArgs),
    /// Run a noise-level sweep and write results.csv, results.json, summary.md.
    Bench(BenchArgs),
    /// Monte-Carlo check of E[f(x+eps)] - f(x) = sigma^2/2 tr(H) on -x^T x / 2.
    TheoryCheck(TheoryArgs),
    /// Price a usage record.
    Cost(CostArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Live,
    Oracle,
    Echo,
    Replay,
    Scripted,
}

#[derive(clap::Args)]
struct ForecastArgs {
    /// CSV file with a `value` column, or builtin:air_passengers.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "value")]
    value_column: String,
    /// frac:<x> or horizon:<H>; defaults to the is_holdout column, else frac:0.8.
    #[arg(long)]
    split: Option<SplitSpec>,
    /// JSON job settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// gaussian, uniform, laplace, gamma, beta, geometric, or none.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    precision: Option<u32>,
    /// Digits without separating spaces.
    #[arg(long)]
    basic: bool,
    #[arg(long)]
    style: Option<PromptStyle>,
    #[arg(long, value_enum, default_value = "oracle")]
    backend: BackendArg,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Append every live exchange to this cassette.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Serve responses from this cassette; implies --backend replay.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// One response per line, for --backend scripted.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long, default_value = "minmax_full")]
    normalization: NormalizationMode,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SynthArgs {
    /// `all` or a comma-separated list of kernel names.
    #[arg(long, default_value = "all")]
    kernels: String,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = DEFAULT_LENGTH)]
    length: usize,
    #[arg(long, default_value_t = DEFAULT_HOLDOUT)]
    holdout: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct BenchArgs {
    /// Sweep configuration; the built-in AirPassengers oracle sweep when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct TheoryArgs {
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 1_000_000)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct CostArgs {
    /// Inline JSON or a file: a usage object, or any object with a `usage` field.
    #[arg(long)]
    usage: String,
    /// Defaults to the record's `model` field.
    #[arg(long)]
    model: Option<String>,
    /// JSON price table replacing the built-in one.
    #[arg(long)]
    table: Option<PathBuf>,
}

type CliResult<T> = Result<T, String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Forecast(a) => forecast(*a),
        Command::Synth(a) => synth(a),
        Command::Bench(a) => bench(a),
        Command::TheoryCheck(a) => theory(a),
        Command::Cost(a) => cost(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn emit(json: String, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, json + "\n").map_err(|e| format!("{}: {e}", p.display())),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Serialize)]
struct ForecastOutput {
    dataset: String,
    model: String,
    history_len: usize,
    horizon: usize,
    forecast: PointForecast,
    target: Vec<f64>,
    metrics: MetricReport,
    valid_samples: usize,
    samples: Vec<Vec<f64>>,
    usage: Usage,
    cost: Option<f64>,
    sample_reports: Vec<SampleReport>,
    manifest: RunManifest,
}

fn job_settings(a: &ForecastArgs) -> CliResult<JobSettings> {
    let mut s: JobSettings = match &a.config {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
        None => JobSettings::default(),
    };
    if a.style == Some(PromptStyle::Chat) && a.config.is_none() {
        s = JobSettings::chat(&s.params.model);
    }
    if let Some(style) = a.style {
        s.prompt_style = style;
    }
    if a.basic {
        s.codec = CodecConfig { precision: s.codec.precision, ..CodecConfig::basic() };
    }
    if let Some(k) = a.precision {
        s.codec.precision = k;
    }
    if let Some(m) = a.samples {
        s.samples = m;
    }
    if let Some(seed) = a.seed {
        s.seed = seed;
        s.noise.seed = seed;
    }
    if let Some(model) = &a.model {
        s.params.model = model.clone();
    }
    if a.noise.is_some() || a.alpha.is_some() {
        let kind = match &a.noise {
            Some(n) => NoiseKind::from_name(n).ok_or_else(|| format!("unknown noise kind `{n}`"))?,
            None if s.noise.kind == NoiseKind::None => NoiseKind::from_name("gaussian").expect("known"),
            None => s.noise.kind,
        };
        let alpha = a.alpha.unwrap_or(if kind == NoiseKind::None { 0.0 } else { s.noise.alpha });
        s.noise = NoiseSpec { kind, alpha, ..s.noise };
    }
    Ok(s)
}

fn forecast(a: ForecastArgs) -> CliResult<()> {
    let settings = job_settings(&a)?;
    let format = DatasetFormat { value_column: a.value_column.clone(), ..DatasetFormat::default() };
    let dataset = load_dataset(&a.data, &format).map_err(|e| e.to_string())?;
    let (history, target) = dataset.split(a.split).map_err(|e| e.to_string())?;

    let selection = match (a.replay.as_ref(), a.backend) {
        (Some(path), BackendArg::Replay | BackendArg::Oracle) => BackendSelection::Replay { path: path.clone() },
        (Some(_), _) => return Err("--replay cannot be combined with another --backend".into()),
        (None, BackendArg::Replay) => return Err("--backend replay needs --replay <cassette>".into()),
        (None, BackendArg::Live) => BackendSelection::Live { record: a.record.clone(), max_in_flight: None },
        (None, _) if a.record.is_some() => return Err("--record only applies to --backend live".into()),
        (None, BackendArg::Oracle) => BackendSelection::Oracle,
        (None, BackendArg::Echo) => BackendSelection::EchoTail { tail: 1 },
        (None, BackendArg::Scripted) => {
            BackendSelection::Scripted { path: a.script.clone().ok_or("--backend scripted needs --script <file>")? }
        }
    };
    let ctx = BackendContext {
        oracle_text: oracle_continuation(&history, target.values(), &settings.codec).ok(),
        horizon: target.len(),
        step_separator: settings.codec.step_separator.clone(),
    };
    let backend = selection.build(&ctx, Path::new(".")).map_err(|e| e.to_string())?;

    let job = ForecastJob::new(history.clone(), target.len(), settings);
    let started = unix_now();
    let mut result = run_nlts(&job, backend.as_ref()).map_err(|e| e.to_string())?;
    if !selection.is_offline() {
        result.stamp(started, unix_now());
    }

    let normalization = a.normalization.resolve(history.values(), target.values());
    let metrics = compute_metrics(&result.point.median, target.values(), &normalization).map_err(|e| e.to_string())?;
    let model = job.settings.params.model.clone();
    let output = ForecastOutput {
        dataset: history.name().to_owned(),
        cost: estimate_cost(&result.usage, &model, &CostTable::default()),
        model,
        history_len: history.len(),
        horizon: target.len(),
        forecast: result.point,
        target: target.into_values(),
        metrics,
        valid_samples: result.valid_samples,
        samples: result.samples.paths().to_vec(),
        usage: result.usage,
        sample_reports: result.sample_reports,
        manifest: result.manifest,
    };
    emit(serde_json::to_string_pretty(&output).expect("serializable"), a.out.as_deref())
}

fn synth(a: SynthArgs) -> CliResult<()> {
    let kernels = if a.kernels == "all" {
        KernelSpec::all_defaults(1.0)
    } else {
        a.kernels
            .split(',')
            .map(|n| KernelSpec::default_for(n.trim(), 1.0).ok_or_else(|| format!("unknown kernel `{}`", n.trim())))
            .collect::<CliResult<Vec<_>>>()?
    };
    let manifest =
        generate_benchmark(&kernels, a.count, a.length, a.holdout, a.seed, &a.out).map_err(|e| e.to_string())?;
    println!(
        "wrote {} series ({} kernels x {}) and manifest.json to {}",
        manifest.series.len(),
        kernels.len(),
        a.count,
        a.out.display()
    );
    Ok(())
}

fn bench(a: BenchArgs) -> CliResult<()> {
    let (cfg, base_dir) = match &a.config {
        Some(p) => {
            let cfg: SweepConfig = serde_json::from_str(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?;
            (cfg, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (SweepConfig::default(), PathBuf::from(".")),
    };
    let report = run_sweep(&cfg, &base_dir).map_err(|e| e.to_string())?;
    let files = write_report(&report, &a.out).map_err(|e| e.to_string())?;
    let failed = report.cells.iter().filter(|c| c.error.is_some()).count();
    for f in files {
        println!("{}", f.display());
    }
    if failed > 0 {
        eprintln!("{failed} of {} cells failed; see summary.md", report.cells.len());
    }
    Ok(())
}

fn theory(a: TheoryArgs) -> CliResult<()> {
    let f = ConcaveQuadratic::identity(a.dim).map_err(|e| e.to_string())?;
    let cfg = TheoryCheckConfig { sigma: a.sigma, draws: a.draws, seed: a.seed, point: None };
    let report = theory_check(&f, &cfg).map_err(|e| e.to_string())?;
    emit(serde_json::to_string_pretty(&report).expect("serializable"), None)
}

#[derive(Serialize)]
struct CostOutput {
    model: String,
    usage: Usage,
    cost: f64,
}

fn cost(a: CostArgs) -> CliResult<()> {
    let text = if a.usage.trim_start().starts_with('{') { a.usage.clone() } else { read(Path::new(&a.usage))? };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("usage: {e}"))?;
    let usage_value = value.get("usage").cloned().unwrap_or_else(|| value.clone());
    let usage: Usage = serde_json::from_value(usage_value).map_err(|e| format!("usage: {e}"))?;
    let model = match (&a.model, value.get("model").and_then(|m| m.as_str())) {
        (Some(m), _) => m.clone(),
        (None, Some(m)) => m.to_owned(),
        (None, None) => return Err("no model given; pass --model".into()),
    };
    let table = match &a.table {
        Some(p) => CostTable::from_json(&read(p)?).map_err(|e| e.to_string())?,
        None => CostTable::default(),
    };
    let cost = estimate_cost(&usage, &model, &table).ok_or_else(|| {
        let known: Vec<&str> = table.models().collect();
        format!("no price for model `{model}`; known: {}", known.join(", "))
    })?;
    let out = CostOutput { model, usage, cost };
    emit(serde_json::to_string_pretty(&out).expect("serializable"), None)
}
