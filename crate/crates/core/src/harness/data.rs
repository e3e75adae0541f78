use std::path::{Path, PathBuf};

use super::bench::task_id;
use super::config::AppConfig;
use super::manifest::{Manifest, ManifestEntry};
use super::synthetic::{SyntheticConfig, SyntheticSuite};
use crate::baselines::{copy_paste, poisson_blend, PoissonConfig};
use crate::error::{Error, Result};
use crate::harmonize::place;
use crate::imagecore::{load_image, load_mask, save_image, save_mask};
use crate::metrics::{train_scorer, HarmonyScorer, LabeledImage, TrainOptions, TrainingReport};

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "pgm", "ppm", "pnm"];
const MASK_SUFFIX: &str = "_mask";

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes copy-paste and Poisson composites for every manifest entry, each
/// with a `_mask.png` of the pasted region. Returns the number written.
pub fn gen_negatives(manifest: &Manifest, out_dir: &Path, poisson: &PoissonConfig) -> Result<usize> {
    create_dir(out_dir)?;
    let mut written = 0;
    for (i, entry) in manifest.entries.iter().enumerate() {
        let id = task_id(i);
        let task = match entry.load_task(&manifest.base_dir) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("{id}: skipped ({e})");
                continue;
            }
        };
        let omega = place(&task)?.omega;
        for (name, image) in [("copy_paste", copy_paste(&task)), ("poisson", poisson_blend(&task, poisson))] {
            match image {
                Ok(img) => {
                    save_image(&img, out_dir.join(format!("{id}_{name}.png")))?;
                    save_mask(&omega, out_dir.join(format!("{id}_{name}{MASK_SUFFIX}.png")))?;
                    written += 1;
                }
                Err(e) => log::warn!("{id}/{name}: skipped ({e})"),
            }
        }
    }
    Ok(written)
}

/// Loads every image in `dir` (sorted by name). An image `x.png` uses
/// `x_mask.png` as its region when present, otherwise a random rectangle
/// drawn from `seed`.
pub fn load_labeled_dir(dir: &Path, seed: u64) -> Result<Vec<LabeledImage>> {
    let read = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in read {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext_ok = p
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        let is_mask = p
            .file_stem()
            .and_then(|s| s.to_str())
            .is_some_and(|s| s.ends_with(MASK_SUFFIX));
        if ext_ok && !is_mask && p.is_file() {
            paths.push(p);
        }
    }
    paths.sort();
    let mut regions = SyntheticSuite::new(SyntheticConfig::default(), seed);
    paths
        .iter()
        .map(|p| {
            let image = load_image(p)?;
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let mask_path = p.with_file_name(format!("{stem}{MASK_SUFFIX}.png"));
            let omega = if mask_path.exists() {
                load_mask(&mask_path)?
            } else {
                regions.random_region(image.width(), image.height())
            };
            Ok(LabeledImage { image, omega })
        })
        .collect()
}

/// Trains a scorer on `samples` synthetic positives and as many negatives.
pub fn train_synthetic_scorer(
    samples: usize,
    poisson: &PoissonConfig,
    opts: &TrainOptions,
) -> Result<(HarmonyScorer, TrainingReport)> {
    let mut suite = SyntheticSuite::new(SyntheticConfig::default(), opts.seed);
    let pos = suite.positives(samples)?;
    let neg = suite.negatives(samples, poisson)?;
    train_scorer(&pos, &neg, opts)
}

/// The configured scorer file, or a freshly trained synthetic scorer.
pub fn obtain_scorer(cfg: &AppConfig) -> Result<HarmonyScorer> {
    match &cfg.metrics.scorer_path {
        Some(p) => HarmonyScorer::load(p),
        None => {
            log::info!(
                "no scorer configured; training one on {} synthetic samples per class",
                cfg.metrics.scorer_samples
            );
            Ok(train_synthetic_scorer(cfg.metrics.scorer_samples, &cfg.harmonize.poisson, &cfg.training_options())?.0)
        }
    }
}

/// Writes `count` synthetic tasks as PNGs plus `manifest.json` into `out_dir`.
pub fn gen_synthetic(out_dir: &Path, count: usize, seed: u64, cfg: &SyntheticConfig) -> Result<Manifest> {
    create_dir(out_dir)?;
    let mut suite = SyntheticSuite::new(*cfg, seed);
    let mut entries = Vec::with_capacity(count);
    for i in 0..count {
        let task = suite.task()?;
        let id = task_id(i);
        let (src, tar) = (format!("{id}_source.png"), format!("{id}_target.png"));
        save_image(&task.source, out_dir.join(&src))?;
        save_image(&task.target, out_dir.join(&tar))?;
        entries.push(ManifestEntry {
            source_path: src.into(),
            target_path: tar.into(),
            mask_path: None,
            paste_x: task.paste_origin.0,
            paste_y: task.paste_origin.1,
            src_gsd: task.src_gsd,
            tar_gsd: task.tar_gsd,
            source_label: None,
            target_country: None,
        });
    }
    let manifest = Manifest {
        entries,
        base_dir: out_dir.to_path_buf(),
    };
    let path = out_dir.join("manifest.json");
    std::fs::write(&path, manifest.to_json()).map_err(|e| Error::io(path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::load_manifest;

    fn small() -> SyntheticConfig {
        SyntheticConfig {
            target_size: 32,
            source_size: 12,
            margin: 4,
            ..Default::default()
        }
    }

    #[test]
    fn synthetic_manifest_round_trip_and_negatives() {
        let dir = tempfile::tempdir().unwrap();
        let m = gen_synthetic(dir.path(), 3, 5, &small()).unwrap();
        let loaded = load_manifest(dir.path().join("manifest.json")).unwrap();
        assert_eq!(loaded.entries, m.entries);
        let neg = dir.path().join("neg");
        assert_eq!(gen_negatives(&loaded, &neg, &PoissonConfig::default()).unwrap(), 6);
        let labeled = load_labeled_dir(&neg, 0).unwrap();
        assert_eq!(labeled.len(), 6);
        assert!(labeled.iter().all(|l| l.omega.count() == 144));
    }

    #[test]
    fn unmasked_images_get_seeded_regions() {
        let dir = tempfile::tempdir().unwrap();
        gen_synthetic(dir.path(), 2, 1, &small()).unwrap();
        let a = load_labeled_dir(dir.path(), 3).unwrap();
        let b = load_labeled_dir(dir.path(), 3).unwrap();
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.omega, y.omega);
            assert!(!x.omega.is_empty());
        }
    }
}
