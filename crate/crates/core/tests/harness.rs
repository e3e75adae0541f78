use std::path::Path;

use harmonidiff::harness::synthetic::SyntheticConfig;
use harmonidiff::harness::{
    gen_synthetic, load_manifest, run_benchmark, AppConfig, Method, AGGREGATE_HEADER, REPORT_HEADER,
};
use harmonidiff::metrics::HarmonyScorer;
use harmonidiff::par::Execution;

fn small() -> SyntheticConfig {
    SyntheticConfig {
        target_size: 40,
        source_size: 16,
        margin: 4,
        ..Default::default()
    }
}

fn quick_config() -> AppConfig {
    let mut cfg = AppConfig::default();
    cfg.harmonize.harmonious_depths = vec![7, 9];
    cfg
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn one_task_three_methods() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    gen_synthetic(&data, 1, 3, &small()).unwrap();
    let manifest = load_manifest(data.join("manifest.json")).unwrap();
    let out = dir.path().join("out");
    let report = run_benchmark(
        &manifest,
        &Method::ALL,
        &quick_config(),
        &HarmonyScorer::untrained(),
        &out,
        Execution::Parallel,
    )
    .unwrap();
    assert_eq!(report.rows.len(), 3);
    assert!(report.rows.iter().all(|r| r.ok));
    for m in Method::ALL {
        assert!(out.join(format!("composites/task_0000_{m}.png")).exists());
        let agg = report.aggregate(m).unwrap();
        assert_eq!((agg.tasks_ok, agg.tasks_failed), (1, 0));
        // one task is too few samples for a covariance
        assert!(agg.frechet.is_none());
    }
    assert_eq!(
        report.rows.iter().find(|r| r.method == Method::Harmonidiff).unwrap().selected_depth,
        Some(7)
    );
    assert_eq!(first_line(&out.join("report.csv")), REPORT_HEADER.join(","));
    assert_eq!(first_line(&out.join("aggregates.csv")), AGGREGATE_HEADER.join(","));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);
    assert!(json["reference_set"].as_str().unwrap().contains("target"));
}

#[test]
fn unreadable_source_becomes_a_failed_row() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    gen_synthetic(&data, 3, 4, &small()).unwrap();
    std::fs::write(data.join("task_0001_source.png"), b"not a png").unwrap();
    let manifest = load_manifest(data.join("manifest.json")).unwrap();
    let report = run_benchmark(
        &manifest,
        &[Method::CopyPaste],
        &quick_config(),
        &HarmonyScorer::untrained(),
        &dir.path().join("out"),
        Execution::Parallel,
    )
    .unwrap();
    let ok: Vec<bool> = report.rows.iter().map(|r| r.ok).collect();
    assert_eq!(ok, vec![true, false, true]);
    assert!(report.rows[1].error.as_ref().unwrap().contains("task_0001_source.png"));
    assert!(!report.all_failed());
    let agg = report.aggregate(Method::CopyPaste).unwrap();
    assert_eq!((agg.tasks_ok, agg.tasks_failed), (2, 1));
}

#[test]
fn every_task_failing_is_total_failure() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    gen_synthetic(&data, 2, 5, &small()).unwrap();
    for i in 0..2 {
        std::fs::remove_file(data.join(format!("task_000{i}_target.png"))).unwrap();
    }
    let manifest = load_manifest(data.join("manifest.json")).unwrap();
    let report = run_benchmark(
        &manifest,
        &[Method::CopyPaste, Method::Poisson],
        &quick_config(),
        &HarmonyScorer::untrained(),
        &dir.path().join("out"),
        Execution::Sequential,
    )
    .unwrap();
    assert_eq!(report.rows.len(), 4);
    assert!(report.all_failed());
}

#[test]
fn reports_are_byte_identical_across_runs_and_execution_modes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    gen_synthetic(&data, 3, 6, &small()).unwrap();
    let manifest = load_manifest(data.join("manifest.json")).unwrap();
    let cfg = quick_config();
    let scorer = HarmonyScorer::untrained();
    let mut csvs = Vec::new();
    for (i, exec) in [Execution::Parallel, Execution::Parallel, Execution::Sequential].into_iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        run_benchmark(&manifest, &Method::ALL, &cfg, &scorer, &out, exec).unwrap();
        csvs.push((
            std::fs::read(out.join("report.csv")).unwrap(),
            std::fs::read(out.join("aggregates.csv")).unwrap(),
        ));
    }
    assert!(csvs.windows(2).all(|w| w[0] == w[1]));
}
