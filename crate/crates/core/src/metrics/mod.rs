//! Boundary Gradient Difference, Fréchet distance and the harmony scorer.

mod bgd;
mod features;
mod frechet;
mod scorer;

pub use bgd::{bgd_abs, boundary_rings, BoundaryRings, DEFAULT_BGD_WIDTH};
pub use features::{boundary_features, FEATURE_LEN, FEATURE_WIDTHS};
pub use frechet::{feature_stats, frechet_distance, global_descriptor, FeatureStats, DESCRIPTOR_LEN};
pub use scorer::{
    harmony_score, roc_auc, train_on_features, train_scorer, HarmonyScorer, LabeledImage, TrainOptions,
    TrainingReport, SCORER_VERSION, SCORE_MASK_MARGIN,
};
