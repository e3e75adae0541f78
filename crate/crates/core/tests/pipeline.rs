use harmonidiff::baselines::copy_paste;
use harmonidiff::harmonize::{
    compose, compose_with, CodecConfig, CompositionTask, HarmonizeConfig, PredictorConfig, PreparedComposition,
};
use harmonidiff::harness::synthetic::{SyntheticConfig, SyntheticSuite};
use harmonidiff::imagecore::{ImageGrid, RegionMask};
use harmonidiff::metrics::HarmonyScorer;
use harmonidiff::par::Execution;
use harmonidiff::scheduler::Conditioning;
use harmonidiff::Error;

fn small_suite() -> SyntheticConfig {
    SyntheticConfig {
        target_size: 48,
        source_size: 20,
        margin: 4,
        ..Default::default()
    }
}

/// Texture with period 4 in both axes: any 4-aligned crop has the scene mean.
fn periodic(w: usize, h: usize) -> ImageGrid {
    ImageGrid::from_fn(w, h, 3, |x, y, c| 0.3 + 0.1 * ((x % 4) as f64) + 0.05 * ((y + c) % 4) as f64).unwrap()
}

fn rel_err(a: &ImageGrid, b: &ImageGrid) -> f64 {
    a.l2_distance(b) / b.l2_norm()
}

#[test]
fn default_depths_give_nine_candidates_in_order() {
    let task = SyntheticSuite::new(small_suite(), 1).task().unwrap();
    let set = compose(&task, &HarmonizeConfig::default(), &HarmonyScorer::untrained()).unwrap();
    let depths: Vec<usize> = set.candidates.iter().map(|c| c.depth).collect();
    assert_eq!(depths, (7..=15).collect::<Vec<_>>());
    // untrained scorer ties everything, so the shallowest depth wins
    assert_eq!(set.select_best().unwrap().depth, 7);
}

#[test]
fn self_paste_with_matching_statistics_reproduces_target() {
    let target = periodic(32, 32);
    let crop = target.crop(8, 12, 12, 8).unwrap();
    let task = CompositionTask::new(crop, target.clone(), (8, 12), 1.0, 1.0);
    // the target prior keeps the target on-manifold, so inversion is exact;
    // a scalar-mean prior would add the inversion error on top
    let set = compose(&task, &HarmonizeConfig::default(), &HarmonyScorer::untrained()).unwrap();
    for c in &set.candidates {
        assert!(rel_err(&c.image, &target) < 1e-4, "depth {}", c.depth);
    }
}

#[test]
fn self_paste_shifts_by_the_scene_to_region_mean_gap() {
    // region mean differs from scene mean, so the shift moves the pasted
    // values even though the pixels came from the target itself
    let target = ImageGrid::from_fn(32, 32, 1, |x, _, _| 0.2 + 0.6 * x as f64 / 31.0).unwrap();
    let crop = target.crop(0, 8, 8, 8).unwrap();
    let task = CompositionTask::new(crop, target.clone(), (0, 8), 1.0, 1.0);
    let p = PreparedComposition::new(&task, &HarmonizeConfig::default()).unwrap();
    let aligned = p.aligned_paste().unwrap();
    let scene_mean = target.data().iter().sum::<f64>() / 1024.0;
    let region_mean = target.crop(0, 8, 8, 8).unwrap().data().iter().sum::<f64>() / 64.0;
    let want = scene_mean - region_mean;
    assert!((aligned.get(3, 10, 0) - target.get(3, 10, 0) - want).abs() < 1e-12);
    assert_eq!(aligned.get(20, 20, 0), target.get(20, 20, 0));
}

#[test]
fn uniform_gray_on_white_with_zero_predictor_takes_target_mean() {
    let target = ImageGrid::filled(24, 24, 3, 1.0).unwrap();
    let source = ImageGrid::filled(8, 8, 3, 0.5).unwrap();
    let task = CompositionTask::new(source, target, (8, 8), 1.0, 1.0);
    let cfg = HarmonizeConfig {
        predictor: PredictorConfig::Zero,
        ..Default::default()
    };
    let set = compose(&task, &cfg, &HarmonyScorer::untrained()).unwrap();
    let omega = RegionMask::rect(24, 24, 8, 8, 8, 8);
    for c in &set.candidates {
        for ch in 0..3 {
            let vals: Vec<f64> = (0..576)
                .filter(|&p| omega.bits()[p])
                .map(|p| c.image.plane(ch)[p])
                .collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((m - 1.0).abs() < 1e-12, "depth {} channel {ch}: {m}", c.depth);
        }
    }
}

#[test]
fn compose_is_deterministic_and_parallel_matches_sequential() {
    let task = SyntheticSuite::new(small_suite(), 2).task().unwrap();
    let cfg = HarmonizeConfig::default();
    let scorer = HarmonyScorer::untrained();
    let a = compose_with(&task, &cfg, &scorer, Execution::Sequential).unwrap();
    let b = compose_with(&task, &cfg, &scorer, Execution::Parallel).unwrap();
    let c = compose_with(&task, &cfg, &scorer, Execution::Parallel).unwrap();
    for ((x, y), z) in a.candidates.iter().zip(&b.candidates).zip(&c.candidates) {
        assert_eq!(x.image, y.image);
        assert_eq!(y.image, z.image);
        assert_eq!(x.score, y.score);
    }
}

#[test]
fn pixels_far_from_the_region_keep_the_target() {
    // the target-prior predictor keeps everything outside the edge ring on
    // the target trajectory, which inverts and samples back exactly
    let task = SyntheticSuite::new(small_suite(), 3).task().unwrap();
    let set = compose(&task, &HarmonizeConfig::default(), &HarmonyScorer::untrained()).unwrap();
    let (ox, oy) = task.paste_origin;
    for c in &set.candidates {
        for (x, y) in [(0, 0), (47, 47), (0, 47), (47, 0)] {
            let far = x + 6 < ox || y + 6 < oy || x > ox + 20 + 6 || y > oy + 20 + 6;
            if far {
                for ch in 0..3 {
                    assert!((c.image.get(x, y, ch) - task.target.get(x, y, ch)).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn patch_average_codec_and_guidance_run() {
    let task = SyntheticSuite::new(small_suite(), 4)
        .task()
        .unwrap()
        .with_conditioning(Conditioning::from_text("A satellite image of a port in Japan"));
    let cfg = HarmonizeConfig {
        codec: CodecConfig::PatchAverage { factor: 4 },
        harmonious_depths: vec![7, 11],
        ..Default::default()
    };
    let set = compose(&task, &cfg, &HarmonyScorer::untrained()).unwrap();
    assert_eq!(set.candidates.len(), 2);
    for c in &set.candidates {
        assert_eq!((c.image.width(), c.image.height()), (48, 48));
        assert!(c.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn aligned_reference_distance_grows_with_depth() {
    let cfg = HarmonizeConfig::default();
    for task in SyntheticSuite::new(small_suite(), 5).tasks(5).unwrap() {
        let p = PreparedComposition::new(&task, &cfg).unwrap();
        let reference = p.aligned_paste().unwrap();
        let d: Vec<f64> = p
            .depths()
            .iter()
            .map(|&h| p.candidate_image(h).unwrap().l2_distance(&reference))
            .collect();
        assert!(d.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{d:?}");
    }
}

#[test]
fn placement_and_config_errors_surface() {
    let target = ImageGrid::filled(16, 16, 3, 0.5).unwrap();
    let source = ImageGrid::filled(10, 10, 3, 0.1).unwrap();
    let scorer = HarmonyScorer::untrained();
    let off = CompositionTask::new(source.clone(), target.clone(), (8, 8), 1.0, 1.0);
    assert!(matches!(
        compose(&off, &HarmonizeConfig::default(), &scorer),
        Err(Error::Placement(_))
    ));
    let ok = CompositionTask::new(source, target, (2, 2), 1.0, 1.0);
    let bad = HarmonizeConfig {
        preservation_depth: 10,
        ..Default::default()
    };
    assert!(matches!(compose(&ok, &bad, &scorer), Err(Error::Config(_))));
}

#[test]
fn copy_paste_differs_from_candidates_only_near_the_region() {
    let task = SyntheticSuite::new(small_suite(), 6).task().unwrap();
    let cp = copy_paste(&task).unwrap();
    let set = compose(&task, &HarmonizeConfig::default(), &HarmonyScorer::untrained()).unwrap();
    assert!(set.candidates.iter().all(|c| c.image != cp));
}
