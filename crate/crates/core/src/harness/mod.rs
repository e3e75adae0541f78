//! Configuration, manifests, benchmark runs, reports and contact sheets.

mod bench;
mod config;
mod data;
mod manifest;
mod sheet;
pub mod synthetic;

pub use bench::{
    format_sig6, parse_methods, run_benchmark, run_tasks, task_id, AggregateRow, BenchReport, BenchTask, Method,
    TaskRow, AGGREGATE_HEADER, REPORT_HEADER,
};
pub use config::{AppConfig, HarmonizeSection, MetricsSection};
pub use data::{gen_negatives, gen_synthetic, load_labeled_dir, obtain_scorer, train_synthetic_scorer};
pub use manifest::{load_manifest, parse_manifest, Manifest, ManifestEntry};
pub use sheet::{contact_sheet, sheet_layout, SheetEntry, SheetSidecar};
