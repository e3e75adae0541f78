use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::AppConfig;
use super::manifest::Manifest;
use crate::baselines::{copy_paste, poisson_blend_with};
use crate::error::{Error, Result};
use crate::harmonize::{compose_with, place, CompositionTask};
use crate::imagecore::{save_image, ImageGrid};
use crate::metrics::{bgd_abs, feature_stats, frechet_distance, global_descriptor, HarmonyScorer};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    CopyPaste,
    Poisson,
    Harmonidiff,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::CopyPaste, Method::Poisson, Method::Harmonidiff];

    pub fn name(self) -> &'static str {
        match self {
            Method::CopyPaste => "copy_paste",
            Method::Poisson => "poisson",
            Method::Harmonidiff => "harmonidiff",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown method `{s}` (expected copy_paste, poisson or harmonidiff)")))
    }
}

/// Parses a comma-separated method list, dropping repeats.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for part in list.split(',').filter(|p| !p.trim().is_empty()) {
        let m: Method = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no methods given".into()));
    }
    Ok(out)
}

/// A benchmark input: a loaded task, or the reason it could not be loaded.
#[derive(Debug, Clone)]
pub struct BenchTask {
    pub id: String,
    pub task: std::result::Result<CompositionTask, String>,
}

impl BenchTask {
    pub fn from_manifest(manifest: &Manifest) -> Vec<BenchTask> {
        manifest
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| BenchTask {
                id: task_id(i),
                task: e.load_task(&manifest.base_dir).map_err(|e| e.to_string()),
            })
            .collect()
    }
}

pub fn task_id(index: usize) -> String {
    format!("task_{index:04}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRow {
    pub task_id: String,
    pub method: Method,
    pub ok: bool,
    pub bgd: Option<f64>,
    pub harmony_score: Option<f64>,
    pub selected_depth: Option<usize>,
    pub runtime_ms: f64,
    pub composite: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub tasks_ok: usize,
    pub tasks_failed: usize,
    pub mean_bgd: Option<f64>,
    pub mean_harmony_score: Option<f64>,
    /// Against the reference set; needs at least two samples on each side.
    pub frechet: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub reference_set: String,
    pub seed: u64,
    pub bgd_width: usize,
    pub rows: Vec<TaskRow>,
    pub aggregates: Vec<AggregateRow>,
}

/// Fixed-width float formatting with six significant digits.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let mag = v.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        format!("{:.*}", (5 - mag).max(0) as usize, v)
    } else {
        format!("{v:.5e}")
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(format_sig6).unwrap_or_default()
}

pub const REPORT_HEADER: [&str; 8] = [
    "task_id",
    "method",
    "status",
    "bgd",
    "harmony_score",
    "selected_depth",
    "composite",
    "error",
];

pub const AGGREGATE_HEADER: [&str; 6] = [
    "method",
    "tasks_ok",
    "tasks_failed",
    "mean_bgd",
    "mean_harmony_score",
    "frechet_vs_reference",
];

fn csv_string(header: &[&str], records: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Format(format!("csv: {e}"));
    w.write_record(header).map_err(to_err)?;
    for r in records {
        w.write_record(&r).map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

impl BenchReport {
    /// Per-task rows. Runtimes are left out so the file is reproducible.
    pub fn rows_csv(&self) -> Result<String> {
        let records = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.task_id.clone(),
                    r.method.to_string(),
                    if r.ok { "ok" } else { "failed" }.into(),
                    opt_num(r.bgd),
                    opt_num(r.harmony_score),
                    r.selected_depth.map(|d| d.to_string()).unwrap_or_default(),
                    r.composite.clone().unwrap_or_default(),
                    r.error.clone().unwrap_or_default(),
                ]
            })
            .collect();
        csv_string(&REPORT_HEADER, records)
    }

    pub fn aggregates_csv(&self) -> Result<String> {
        let records = self
            .aggregates
            .iter()
            .map(|a| {
                vec![
                    a.method.to_string(),
                    a.tasks_ok.to_string(),
                    a.tasks_failed.to_string(),
                    opt_num(a.mean_bgd),
                    opt_num(a.mean_harmony_score),
                    opt_num(a.frechet),
                ]
            })
            .collect();
        csv_string(&AGGREGATE_HEADER, records)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Writes `report.csv`, `aggregates.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let put = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(p, e))
        };
        put("report.csv", self.rows_csv()?)?;
        put("aggregates.csv", self.aggregates_csv()?)?;
        put("report.json", self.to_json()?)
    }

    /// `true` when there were rows and none succeeded.
    pub fn all_failed(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| !r.ok)
    }

    pub fn aggregate(&self, method: Method) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|a| a.method == method)
    }
}

struct MethodOutput {
    image: ImageGrid,
    selected_depth: Option<usize>,
    /// Score already computed during selection.
    score: Option<f64>,
}

fn run_method(
    method: Method,
    task: &CompositionTask,
    cfg: &AppConfig,
    scorer: &HarmonyScorer,
    exec: Execution,
) -> Result<MethodOutput> {
    Ok(match method {
        Method::CopyPaste => MethodOutput {
            image: copy_paste(task)?,
            selected_depth: None,
            score: None,
        },
        Method::Poisson => MethodOutput {
            image: poisson_blend_with(task, &cfg.harmonize.poisson, exec)?,
            selected_depth: None,
            score: None,
        },
        Method::Harmonidiff => {
            let set = compose_with(task, &cfg.harmonize_config(), scorer, exec)?;
            let best = set.select_best()?;
            MethodOutput {
                image: best.image.clone(),
                selected_depth: Some(best.depth),
                score: Some(best.score),
            }
        }
    })
}

struct Cell {
    row: TaskRow,
    descriptor: Option<Vec<f64>>,
}

fn run_cell(
    id: &str,
    method: Method,
    task: &CompositionTask,
    cfg: &AppConfig,
    scorer: &HarmonyScorer,
    composites: &Path,
    exec: Execution,
) -> Result<(TaskRow, Vec<f64>)> {
    let start = Instant::now();
    let out = run_method(method, task, cfg, scorer, exec)?;
    let omega = place(task)?.omega;
    let bgd = bgd_abs(&out.image, &omega, cfg.metrics.bgd_width)?;
    let hs = match out.score {
        Some(s) => s,
        None => scorer.score(&out.image, &omega)?,
    };
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let name = format!("{id}_{method}.png");
    save_image(&out.image, composites.join(&name))?;
    let descriptor = global_descriptor(&out.image)?;
    Ok((
        TaskRow {
            task_id: id.to_string(),
            method,
            ok: true,
            bgd: Some(bgd),
            harmony_score: Some(hs),
            selected_depth: out.selected_depth,
            runtime_ms,
            composite: Some(format!("composites/{name}")),
            error: None,
        },
        descriptor,
    ))
}

fn failed_row(id: &str, method: Method, reason: String) -> TaskRow {
    TaskRow {
        task_id: id.to_string(),
        method,
        ok: false,
        bgd: None,
        harmony_score: None,
        selected_depth: None,
        runtime_ms: 0.0,
        composite: None,
        error: Some(reason),
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Runs every method on every task and writes composites plus reports to
/// `out_dir`. Per-task failures become failed rows.
pub fn run_tasks(
    tasks: &[BenchTask],
    methods: &[Method],
    cfg: &AppConfig,
    scorer: &HarmonyScorer,
    out_dir: &Path,
    exec: Execution,
) -> Result<BenchReport> {
    cfg.validate()?;
    let composites: PathBuf = out_dir.join("composites");
    std::fs::create_dir_all(&composites).map_err(|e| Error::io(&composites, e))?;
    // tasks fan out; each task runs its methods on the calling worker
    let inner = Execution::Sequential;
    let per_task: Vec<Vec<Cell>> = par::map(tasks, exec, |bt| {
        methods
            .iter()
            .map(|&m| match &bt.task {
                Err(reason) => Cell {
                    row: failed_row(&bt.id, m, reason.clone()),
                    descriptor: None,
                },
                Ok(task) => match run_cell(&bt.id, m, task, cfg, scorer, &composites, inner) {
                    Ok((row, d)) => Cell {
                        row,
                        descriptor: Some(d),
                    },
                    Err(e) => {
                        log::warn!("{} / {m} failed: {e}", bt.id);
                        Cell {
                            row: failed_row(&bt.id, m, e.to_string()),
                            descriptor: None,
                        }
                    }
                },
            })
            .collect()
    });
    let cells: Vec<Cell> = per_task.into_iter().flatten().collect();

    let reference: Vec<Vec<f64>> = tasks
        .iter()
        .filter_map(|t| t.task.as_ref().ok())
        .filter_map(|t| global_descriptor(&t.target).ok())
        .collect();
    let reference_stats = (reference.len() >= 2).then(|| feature_stats(&reference)).transpose()?;

    let aggregates = methods
        .iter()
        .map(|&m| {
            let mine: Vec<&Cell> = cells.iter().filter(|c| c.row.method == m).collect();
            let ok: Vec<&TaskRow> = mine.iter().map(|c| &c.row).filter(|r| r.ok).collect();
            let descriptors: Vec<Vec<f64>> = mine.iter().filter_map(|c| c.descriptor.clone()).collect();
            let frechet = match &reference_stats {
                Some(rs) if descriptors.len() >= 2 => Some(frechet_distance(&feature_stats(&descriptors)?, rs)?),
                _ => None,
            };
            Ok(AggregateRow {
                method: m,
                tasks_ok: ok.len(),
                tasks_failed: mine.len() - ok.len(),
                mean_bgd: mean(ok.iter().filter_map(|r| r.bgd)),
                mean_harmony_score: mean(ok.iter().filter_map(|r| r.harmony_score)),
                frechet,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let report = BenchReport {
        reference_set: "target images of the benchmark tasks".into(),
        seed: cfg.seed,
        bgd_width: cfg.metrics.bgd_width,
        rows: cells.into_iter().map(|c| c.row).collect(),
        aggregates,
    };
    report.write(out_dir)?;
    Ok(report)
}

pub fn run_benchmark(
    manifest: &Manifest,
    methods: &[Method],
    cfg: &AppConfig,
    scorer: &HarmonyScorer,
    out_dir: &Path,
    exec: Execution,
) -> Result<BenchReport> {
    run_tasks(&BenchTask::from_manifest(manifest), methods, cfg, scorer, out_dir, exec)
}
