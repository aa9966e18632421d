//! Noise-level sweeps: every (dataset, distribution, level) cell is a full
//! forecast run, scored and tabulated with one row per level.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use super::{compute_metrics, io_error, load_dataset, BenchError, DatasetFormat, MetricReport, NormalizationMode};
use crate::backend::{estimate_cost, Backend, BackendContext, BackendError, BackendSelection, CostTable, Usage};
use crate::noise::{NoiseKind, NoiseSpec};
use crate::pipeline::{oracle_continuation, prepare_sample, run_nlts, ForecastJob, JobSettings};
use crate::rng::RNG_IDENTITY;
use crate::series::{SplitSpec, TimeSeries};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILES: [&str; 3] = ["results.csv", "results.json", "summary.md"];

const ORIGINAL: &str = "Original";
const MAX_CONCURRENT_CELLS: usize = 8;

/// Picks a cell index from (Original cell, noisy cells by kind then level, kind).
type CellPick<'a> = dyn Fn(usize, &[Vec<usize>], usize) -> usize + 'a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// CSV path, or `builtin:air_passengers`.
    pub path: PathBuf,
    /// Overrides the file's holdout column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
    #[serde(default)]
    pub format: DatasetFormat,
}

impl DatasetRef {
    pub fn builtin() -> Self {
        Self {
            name: Some("air_passengers".into()),
            path: PathBuf::from(super::BUILTIN_AIR_PASSENGERS),
            split: None,
            format: DatasetFormat::default(),
        }
    }

    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub datasets: Vec<DatasetRef>,
    /// `0` is the Original row, which is always run.
    pub noise_levels: Vec<f64>,
    /// Names (`"laplace"`) or full objects (`{"kind": "gamma", "shape": 3}`).
    #[serde(deserialize_with = "deserialize_kinds")]
    pub kinds: Vec<NoiseKind>,
    /// Per-run settings; `noise` is replaced per cell.
    pub settings: JobSettings,
    pub backend: BackendSelection,
    pub normalization: NormalizationMode,
    /// JSON price table; the built-in table otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_table: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            datasets: vec![DatasetRef::builtin()],
            noise_levels: vec![0.0, 0.001, 0.005, 0.01, 0.02, 0.05],
            kinds: vec![NoiseKind::from_name("gaussian").expect("known kind")],
            settings: JobSettings::default(),
            backend: BackendSelection::Oracle,
            normalization: NormalizationMode::MinmaxFull,
            cost_table: None,
        }
    }
}

fn deserialize_kinds<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<NoiseKind>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Name(String),
        Full(NoiseKind),
    }
    Vec::<Entry>::deserialize(d)?
        .into_iter()
        .map(|e| match e {
            Entry::Full(k) => Ok(k),
            Entry::Name(n) => {
                NoiseKind::from_name(&n).ok_or_else(|| serde::de::Error::custom(format!("unknown noise kind `{n}`")))
            }
        })
        .collect()
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.datasets.is_empty() {
            return bad("no datasets".into());
        }
        if self.noise_levels.is_empty() {
            return bad("no noise levels".into());
        }
        if let Some(a) = self.noise_levels.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return bad(format!("noise level {a} must be finite and >= 0"));
        }
        if self.kinds.is_empty() {
            return bad("no noise kinds".into());
        }
        for k in &self.kinds {
            if *k == NoiseKind::None {
                return bad("`none` is the Original row; list only noisy kinds".into());
            }
            k.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        }
        let mut labels: Vec<String> = self.datasets.iter().map(DatasetRef::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return bad("dataset labels must be unique; set `name`".into());
        }
        Ok(())
    }

    fn nonzero_levels(&self) -> Vec<f64> {
        let mut seen: Vec<f64> = Vec::new();
        for &a in &self.noise_levels {
            if a > 0.0 && !seen.contains(&a) {
                seen.push(a);
            }
        }
        seen
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    /// `none` for the Original cell.
    pub kind: String,
    pub noise_level: f64,
    pub status: CellStatus,
    pub metrics: Option<MetricReport>,
    pub median: Option<Vec<f64>>,
    pub valid_samples: Option<usize>,
    pub usage: Usage,
    pub cost: Option<f64>,
    /// SHA-256 of sample 0's prompt, so cells can be compared without the text.
    pub prompt_digest: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepColumn {
    pub dataset: String,
    pub kind: String,
}

impl SweepColumn {
    fn key(&self) -> String {
        format!("{}/{}", self.dataset, self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowEntry {
    /// Index into [`SweepReport::cells`].
    pub cell: usize,
    pub mse: Option<f64>,
    pub mae: Option<f64>,
    /// `(original - noisy) / original`.
    pub mse_rel_improvement: Option<f64>,
    pub mae_rel_improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub noise_level: f64,
    /// One per [`SweepReport::columns`] entry.
    pub entries: Vec<RowEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub code_version: String,
    pub rng: String,
    pub seed: u64,
    pub samples: usize,
    pub model: String,
    pub backend: BackendSelection,
    pub normalization: NormalizationMode,
    pub columns: Vec<SweepColumn>,
    pub rows: Vec<SweepRow>,
    pub cells: Vec<CellResult>,
    pub total_usage: Usage,
    /// Sum over cells with a known price.
    pub total_cost: Option<f64>,
}

/// Run with the configured backend; relative paths resolve against `base_dir`.
pub fn run_sweep(cfg: &SweepConfig, base_dir: &Path) -> Result<SweepReport, BenchError> {
    run_sweep_with(cfg, base_dir, &|ctx| cfg.backend.build(ctx, base_dir))
}

type BackendFactory<'a> = dyn Fn(&BackendContext) -> Result<Box<dyn Backend>, BackendError> + 'a;

/// Run with backends from `factory`, called once per dataset.
pub fn run_sweep_with(
    cfg: &SweepConfig,
    base_dir: &Path,
    factory: &BackendFactory<'_>,
) -> Result<SweepReport, BenchError> {
    cfg.validate()?;
    let prices = match &cfg.cost_table {
        Some(p) => {
            let path = if p.is_absolute() { p.clone() } else { base_dir.join(p) };
            let text = std::fs::read_to_string(&path).map_err(io_error(&path))?;
            CostTable::from_json(&text)?
        }
        None => CostTable::default(),
    };
    let levels = cfg.nonzero_levels();

    let mut cells = Vec::new();
    let mut columns = Vec::new();
    // Per dataset: index of its Original cell, then its noisy cells by (kind, level).
    let mut layout: Vec<(usize, Vec<Vec<usize>>)> = Vec::new();

    for dataset in &cfg.datasets {
        let label = dataset.label();
        let mut specs = vec![(NoiseKind::None, 0.0)];
        for kind in &cfg.kinds {
            specs.extend(levels.iter().map(|&a| (*kind, a)));
            columns.push(SweepColumn { dataset: label.clone(), kind: kind.name().to_owned() });
        }
        let first = cells.len();
        cells.extend(run_dataset_cells(cfg, dataset, &label, &specs, base_dir, factory, &prices));
        let noisy = (0..cfg.kinds.len())
            .map(|k| (0..levels.len()).map(|l| first + 1 + k * levels.len() + l).collect())
            .collect();
        layout.push((first, noisy));
    }

    let mut rows = Vec::with_capacity(levels.len() + 1);
    let entry = |cell: usize, original: usize| {
        let metric = |i: usize| cells[i].metrics.as_ref();
        let rel = |f: fn(&MetricReport) -> f64| match (metric(original), metric(cell)) {
            (Some(o), Some(n)) if f(o) > 0.0 => Some((f(o) - f(n)) / f(o)),
            _ => None,
        };
        RowEntry {
            cell,
            mse: metric(cell).map(|m| m.mse),
            mae: metric(cell).map(|m| m.mae),
            mse_rel_improvement: rel(|m| m.mse),
            mae_rel_improvement: rel(|m| m.mae),
        }
    };
    let per_column = |pick: &CellPick<'_>| {
        layout
            .iter()
            .flat_map(|(original, noisy)| (0..noisy.len()).map(move |k| (*original, noisy, k)))
            .map(|(original, noisy, k)| entry(pick(original, noisy, k), original))
            .collect::<Vec<_>>()
    };
    rows.push(SweepRow { label: ORIGINAL.into(), noise_level: 0.0, entries: per_column(&|original, _, _| original) });
    for (l, &alpha) in levels.iter().enumerate() {
        rows.push(SweepRow {
            label: format!("{alpha}"),
            noise_level: alpha,
            entries: per_column(&|_, noisy, k| noisy[k][l]),
        });
    }

    let total_usage = cells.iter().map(|c| c.usage).sum();
    let costs: Vec<f64> = cells.iter().filter_map(|c| c.cost).collect();
    Ok(SweepReport {
        schema_version: REPORT_SCHEMA_VERSION,
        code_version: crate::VERSION.into(),
        rng: RNG_IDENTITY.into(),
        seed: cfg.settings.seed,
        samples: cfg.settings.samples,
        model: cfg.settings.params.model.clone(),
        backend: cfg.backend.clone(),
        normalization: cfg.normalization,
        columns,
        rows,
        cells,
        total_usage,
        total_cost: (!costs.is_empty()).then(|| costs.iter().sum()),
    })
}

fn failed(dataset: &str, kind: NoiseKind, level: f64, error: String) -> CellResult {
    CellResult {
        dataset: dataset.to_owned(),
        kind: kind.name().to_owned(),
        noise_level: level,
        status: CellStatus::Failed,
        metrics: None,
        median: None,
        valid_samples: None,
        usage: Usage::default(),
        cost: None,
        prompt_digest: None,
        error: Some(error),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_dataset_cells(
    cfg: &SweepConfig,
    dataset: &DatasetRef,
    label: &str,
    specs: &[(NoiseKind, f64)],
    base_dir: &Path,
    factory: &BackendFactory<'_>,
    prices: &CostTable,
) -> Vec<CellResult> {
    let fail_all = |e: String| specs.iter().map(|&(k, a)| failed(label, k, a, e.clone())).collect();

    let builtin = dataset.path.to_str().is_some_and(|p| p.starts_with("builtin:"));
    let path = if dataset.path.is_absolute() || builtin { dataset.path.clone() } else { base_dir.join(&dataset.path) };
    let (history, target) = match load_dataset(&path, &dataset.format)
        .and_then(|d| d.split(dataset.split).map_err(|e| BenchError::Config(e.to_string())))
    {
        Ok(split) => split,
        Err(e) => return fail_all(e.to_string()),
    };
    let codec = &cfg.settings.codec;
    let ctx = BackendContext {
        oracle_text: oracle_continuation(&history, target.values(), codec).ok(),
        horizon: target.len(),
        step_separator: codec.step_separator.clone(),
    };
    let backend = match factory(&ctx) {
        Ok(b) => b,
        Err(e) => return fail_all(e.to_string()),
    };

    let workers = backend.max_in_flight().clamp(1, MAX_CONCURRENT_CELLS).min(specs.len());
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<CellResult>>> = Mutex::new(vec![None; specs.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(kind, level)) = specs.get(i) else { break };
                let result = run_cell(cfg, label, &history, &target, kind, level, backend.as_ref(), prices);
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(result);
            });
        }
    });
    slots.into_inner().unwrap_or_else(|e| e.into_inner()).into_iter().map(|c| c.expect("every cell ran")).collect()
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    cfg: &SweepConfig,
    label: &str,
    history: &TimeSeries,
    target: &TimeSeries,
    kind: NoiseKind,
    level: f64,
    backend: &dyn Backend,
    prices: &CostTable,
) -> CellResult {
    let settings = JobSettings { noise: NoiseSpec::new(kind, level, cfg.settings.seed), ..cfg.settings.clone() };
    let job = ForecastJob::new(history.clone(), target.len(), settings);
    let prompt_digest = prepare_sample(&job, 0).ok().map(|p| {
        let text = serde_json::to_string(&p.prompt).expect("prompt serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    });
    let result = match run_nlts(&job, backend) {
        Ok(r) => r,
        Err(e) => return CellResult { prompt_digest, ..failed(label, kind, level, e.to_string()) },
    };
    let normalization = cfg.normalization.resolve(history.values(), target.values());
    let metrics = compute_metrics(&result.point.median, target.values(), &normalization);
    let cost = estimate_cost(&result.usage, &job.settings.params.model, prices);
    let (status, metrics, error) = match metrics {
        Ok(m) => (CellStatus::Ok, Some(m), None),
        Err(e) => (CellStatus::Failed, None, Some(e.to_string())),
    };
    CellResult {
        dataset: label.to_owned(),
        kind: kind.name().to_owned(),
        noise_level: level,
        status,
        metrics,
        median: Some(result.point.median),
        valid_samples: Some(result.valid_samples),
        usage: result.usage,
        cost,
        prompt_digest,
        error,
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

/// Table-shaped CSV: one row per noise level, four columns per
/// (dataset, kind): mse, mae, and their relative improvements.
pub fn render_results_csv(report: &SweepReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["noise_level".to_owned()];
    for c in &report.columns {
        for m in ["mse", "mae", "mse_rel_improvement", "mae_rel_improvement"] {
            header.push(format!("{}/{m}", c.key()));
        }
    }
    w.write_record(&header).expect("in-memory write");
    for row in &report.rows {
        let mut record = vec![row.label.clone()];
        for e in &row.entries {
            record.extend([e.mse, e.mae, e.mse_rel_improvement, e.mae_rel_improvement].map(fmt_opt));
        }
        w.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn render_summary(report: &SweepReport) -> String {
    let mut out = String::new();
    out.push_str("# Noise-level sweep\n\n");
    out.push_str(&format!(
        "- model: `{}`\n- samples per run: {}\n- seed: {}\n- normalization: {}\n- backend: `{}`\n\n",
        report.model,
        report.samples,
        report.seed,
        report.normalization.as_str(),
        serde_json::to_string(&report.backend).expect("serializable")
    ));
    for (ci, col) in report.columns.iter().enumerate() {
        out.push_str(&format!("## {} / {}\n\n", col.dataset, col.kind));
        out.push_str("| Noise level | MSE | MAE | MSE improvement | MAE improvement |\n");
        out.push_str("|---|---|---|---|---|\n");
        for row in &report.rows {
            let e = &row.entries[ci];
            let pct = |x: Option<f64>| x.map(|v| format!("{:.2}%", 100.0 * v)).unwrap_or_else(|| "-".into());
            let num = |x: Option<f64>| x.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "failed".into());
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} |\n",
                row.label,
                num(e.mse),
                num(e.mae),
                pct(e.mse_rel_improvement),
                pct(e.mae_rel_improvement)
            ));
        }
        out.push('\n');
    }
    let u = &report.total_usage;
    out.push_str(&format!(
        "Total usage: {} requests, {} prompt tokens, {} completion tokens.\n",
        u.requests, u.prompt_tokens, u.completion_tokens
    ));
    match report.total_cost {
        Some(c) => out.push_str(&format!("Estimated cost: ${c:.4}.\n")),
        None => out.push_str("Estimated cost: unknown model price.\n"),
    }
    let failures: Vec<&CellResult> = report.cells.iter().filter(|c| c.status == CellStatus::Failed).collect();
    if !failures.is_empty() {
        out.push_str("\n## Failed cells\n\n");
        for c in failures {
            out.push_str(&format!(
                "- {} / {} @ {}: {}\n",
                c.dataset,
                c.kind,
                c.noise_level,
                c.error.as_deref().unwrap_or("unknown error")
            ));
        }
    }
    out
}

/// Write `results.csv`, `results.json`, and `summary.md` into `out_dir`.
pub fn write_report(report: &SweepReport, out_dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    std::fs::create_dir_all(out_dir).map_err(io_error(out_dir))?;
    let json = serde_json::to_string_pretty(report).expect("serializable") + "\n";
    let contents = [render_results_csv(report), json, render_summary(report)];
    let mut written = Vec::new();
    for (name, body) in REPORT_FILES.iter().zip(contents) {
        let path = out_dir.join(name);
        std::fs::write(&path, body).map_err(io_error(&path))?;
        written.push(path);
    }
    Ok(written)
}
