use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{FeatureContext, FEATURE_LEN, FEATURE_WIDTHS};
use crate::error::{ensure, Error, Result};
use crate::imagecore::{dilate, erode, ImageGrid, RegionMask};

pub const SCORER_VERSION: u32 = 1;

/// Dilation/erosion amount for the three-mask score.
pub const SCORE_MASK_MARGIN: usize = 2;

const FEATURE_SPEC_NAME: &str = "boundary-rings";
const LOGIT_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub widths: Vec<usize>,
    pub len: usize,
}

impl FeatureSpec {
    fn current() -> Self {
        Self {
            name: FEATURE_SPEC_NAME.into(),
            widths: FEATURE_WIDTHS.to_vec(),
            len: FEATURE_LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Logistic model over standardized boundary features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonyScorer {
    pub version: u32,
    pub feature_spec: FeatureSpec,
    pub standardization: Standardization,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Default for HarmonyScorer {
    fn default() -> Self {
        Self::untrained()
    }
}

impl HarmonyScorer {
    /// Zero weights: every input scores 0.5.
    pub fn untrained() -> Self {
        Self {
            version: SCORER_VERSION,
            feature_spec: FeatureSpec::current(),
            standardization: Standardization {
                mean: vec![0.0; FEATURE_LEN],
                std: vec![1.0; FEATURE_LEN],
            },
            weights: vec![0.0; FEATURE_LEN],
            bias: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.version != SCORER_VERSION {
            return Err(Error::Format(format!(
                "scorer version {} is not supported (expected {SCORER_VERSION})",
                self.version
            )));
        }
        if self.feature_spec != FeatureSpec::current() {
            return Err(Error::Format(format!("unknown feature spec {:?}", self.feature_spec)));
        }
        let k = FEATURE_LEN;
        if self.weights.len() != k || self.standardization.mean.len() != k || self.standardization.std.len() != k {
            return Err(Error::Format(format!("scorer vectors must have length {k}")));
        }
        let finite = self
            .weights
            .iter()
            .chain(&self.standardization.mean)
            .chain(&self.standardization.std)
            .chain(std::iter::once(&self.bias))
            .all(|v| v.is_finite());
        if !finite || self.standardization.std.iter().any(|s| *s <= 0.0) {
            return Err(Error::Format("scorer parameters must be finite with positive std".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let version = value.get("version").and_then(|v| v.as_u64());
        if version != Some(SCORER_VERSION as u64) {
            return Err(Error::Format(format!(
                "scorer version {version:?} is not supported (expected {SCORER_VERSION})"
            )));
        }
        let scorer: HarmonyScorer = serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))?;
        scorer.validate()?;
        Ok(scorer)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Probability that a raw feature vector is harmonious.
    pub fn predict_features(&self, features: &[f64]) -> Result<f64> {
        ensure!(
            features.len() == FEATURE_LEN,
            "expected {FEATURE_LEN} features, got {}",
            features.len()
        );
        let st = &self.standardization;
        let logit = self.bias
            + features
                .iter()
                .zip(&self.weights)
                .zip(st.mean.iter().zip(&st.std))
                .map(|((f, w), (m, s))| w * (f - m) / s)
                .sum::<f64>();
        Ok(sigmoid(logit.clamp(-LOGIT_LIMIT, LOGIT_LIMIT)))
    }

    /// Single-mask probability.
    pub fn predict(&self, img: &ImageGrid, omega: &RegionMask) -> Result<f64> {
        self.predict_features(&FeatureContext::new(img)?.features(omega)?)
    }

    /// Three-mask harmony score, see [`harmony_score`].
    pub fn score(&self, img: &ImageGrid, omega: &RegionMask) -> Result<f64> {
        harmony_score(self, img, omega)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mean of the scorer's outputs on `omega`, `dilate(omega, 2)` and
/// `erode(omega, 2)`.
///
/// A variant mask whose rings are degenerate (erosion emptied the region, or
/// dilation swallowed the whole grid) is replaced by `omega` itself, so the
/// average always has three terms.
pub fn harmony_score(scorer: &HarmonyScorer, img: &ImageGrid, omega: &RegionMask) -> Result<f64> {
    let ctx = FeatureContext::new(img)?;
    let base = scorer.predict_features(&ctx.features(omega)?)?;
    let variant = |m: RegionMask| -> Result<f64> {
        if m.is_empty() {
            return Ok(base);
        }
        match ctx.features(&m) {
            Ok(f) => scorer.predict_features(&f),
            Err(Error::MetricUndefined(_)) => Ok(base),
            Err(e) => Err(e),
        }
    };
    let dilated = variant(dilate(omega, SCORE_MASK_MARGIN))?;
    let eroded = variant(erode(omega, SCORE_MASK_MARGIN))?;
    Ok((base + dilated + eroded) / 3.0)
}

/// An image with the region whose boundary is judged.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub image: ImageGrid,
    pub omega: RegionMask,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.1,
            batch_size: 32,
            l2: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingReport {
    pub accuracy: f64,
    pub loss: f64,
    pub samples: usize,
}

fn standardization(rows: &[Vec<f64>]) -> Standardization {
    let k = FEATURE_LEN;
    let n = rows.len() as f64;
    let mut mean = vec![0.0; k];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut std = vec![0.0; k];
    for r in rows {
        for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
            *s += (v - m).powi(2) / n;
        }
    }
    let std = std.into_iter().map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 }).collect();
    Standardization { mean, std }
}

/// Logistic regression by seeded mini-batch gradient descent on
/// precomputed feature vectors.
pub fn train_on_features(
    features: &[Vec<f64>],
    labels: &[bool],
    opts: &TrainOptions,
) -> Result<(HarmonyScorer, TrainingReport)> {
    ensure!(features.len() == labels.len(), "features and labels differ in length");
    ensure!(
        labels.iter().any(|l| *l) && labels.iter().any(|l| !*l),
        "training data needs both positive and negative samples"
    );
    for (i, f) in features.iter().enumerate() {
        ensure!(f.len() == FEATURE_LEN, "feature vector {i} has length {}", f.len());
        ensure!(f.iter().all(|v| v.is_finite()), "feature vector {i} is not finite");
    }
    ensure!(opts.batch_size >= 1, "batch_size must be >= 1");
    ensure!(
        opts.learning_rate.is_finite() && opts.learning_rate > 0.0,
        "learning_rate must be > 0"
    );
    let st = standardization(features);
    let x: Vec<Vec<f64>> = features
        .iter()
        .map(|f| f.iter().zip(st.mean.iter().zip(&st.std)).map(|(v, (m, s))| (v - m) / s).collect())
        .collect();
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let mut w = vec![0.0; FEATURE_LEN];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(opts.batch_size) {
            let mut gw = vec![0.0; FEATURE_LEN];
            let mut gb = 0.0;
            for &i in batch {
                let z = b + x[i].iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
                let err = sigmoid(z) - y[i];
                for (g, xi) in gw.iter_mut().zip(&x[i]) {
                    *g += err * xi;
                }
                gb += err;
            }
            let scale = opts.learning_rate / batch.len() as f64;
            for (wi, g) in w.iter_mut().zip(&gw) {
                *wi -= scale * g + opts.learning_rate * opts.l2 * *wi;
            }
            b -= scale * gb;
        }
    }
    let scorer = HarmonyScorer {
        version: SCORER_VERSION,
        feature_spec: FeatureSpec::current(),
        standardization: st,
        weights: w,
        bias: b,
    };
    let mut correct = 0usize;
    let mut loss = 0.0;
    for (f, &l) in features.iter().zip(labels) {
        let p = scorer.predict_features(f)?;
        if (p >= 0.5) == l {
            correct += 1;
        }
        let p = p.clamp(1e-12, 1.0 - 1e-12);
        loss -= if l { p.ln() } else { (1.0 - p).ln() };
    }
    let n = features.len();
    let report = TrainingReport {
        accuracy: correct as f64 / n as f64,
        loss: loss / n as f64,
        samples: n,
    };
    log::info!(
        "trained harmony scorer on {n} samples: accuracy {:.4}, loss {:.4}",
        report.accuracy,
        report.loss
    );
    Ok((scorer, report))
}

/// Extracts single-mask boundary features from both classes and trains.
pub fn train_scorer(
    positives: &[LabeledImage],
    negatives: &[LabeledImage],
    opts: &TrainOptions,
) -> Result<(HarmonyScorer, TrainingReport)> {
    ensure!(
        !positives.is_empty() && !negatives.is_empty(),
        "training needs both positives ({}) and negatives ({})",
        positives.len(),
        negatives.len()
    );
    let mut features = Vec::with_capacity(positives.len() + negatives.len());
    let mut labels = Vec::with_capacity(features.capacity());
    for (set, label) in [(positives, true), (negatives, false)] {
        for s in set {
            features.push(FeatureContext::new(&s.image)?.features(&s.omega)?);
            labels.push(label);
        }
    }
    train_on_features(&features, &labels, opts)
}

/// Area under the ROC curve: probability that a random positive outscores a
/// random negative, ties counted half.
pub fn roc_auc(positive_scores: &[f64], negative_scores: &[f64]) -> Result<f64> {
    ensure!(
        !positive_scores.is_empty() && !negative_scores.is_empty(),
        "AUC needs both classes"
    );
    let mut wins = 0.0;
    for p in positive_scores {
        for n in negative_scores {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    Ok(wins / (positive_scores.len() * negative_scores.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let label = i % 2 == 0;
            let mut f: Vec<f64> = (0..FEATURE_LEN).map(|_| rng.random_range(-1.0..1.0)).collect();
            f[0] = if label { rng.random_range(0.5..2.0) } else { rng.random_range(-2.0..-0.5) };
            xs.push(f);
            ys.push(label);
        }
        (xs, ys)
    }

    #[test]
    fn zero_epochs_scores_one_half() {
        let (xs, ys) = separable(20, 1);
        let opts = TrainOptions {
            epochs: 0,
            ..Default::default()
        };
        let (s, _) = train_on_features(&xs, &ys, &opts).unwrap();
        assert!(s.weights.iter().all(|w| *w == 0.0) && s.bias == 0.0);
        for f in &xs {
            assert_eq!(s.predict_features(f).unwrap(), 0.5);
        }
        let img = ImageGrid::from_fn(12, 12, 3, |x, y, c| ((x + y + c) % 4) as f64 / 4.0).unwrap();
        let omega = RegionMask::rect(12, 12, 3, 3, 6, 6);
        assert_eq!(HarmonyScorer::untrained().score(&img, &omega).unwrap(), 0.5);
    }

    #[test]
    fn separable_data_is_learned() {
        let (xs, ys) = separable(400, 2);
        let (_, report) = train_on_features(&xs, &ys, &TrainOptions::default()).unwrap();
        assert!(report.accuracy >= 0.99, "{report:?}");
    }

    #[test]
    fn flipped_labels_mirror_the_scorer() {
        let (xs, ys) = separable(200, 3);
        // noisy labels so the model stays away from saturation
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ys: Vec<bool> = ys.iter().map(|l| if rng.random_bool(0.2) { !l } else { *l }).collect();
        let flipped: Vec<bool> = ys.iter().map(|l| !l).collect();
        let opts = TrainOptions::default();
        let (a, _) = train_on_features(&xs, &ys, &opts).unwrap();
        let (b, _) = train_on_features(&xs, &flipped, &opts).unwrap();
        let (held_out, _) = separable(50, 4);
        for f in &held_out {
            let (pa, pb) = (a.predict_features(f).unwrap(), b.predict_features(f).unwrap());
            assert!((pa - (1.0 - pb)).abs() < 0.05);
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let (xs, _) = separable(4, 5);
        assert!(train_on_features(&xs, &[true; 4], &TrainOptions::default()).is_err());
    }

    #[test]
    fn json_roundtrip_and_version_check() {
        let (xs, ys) = separable(40, 6);
        let (s, _) = train_on_features(&xs, &ys, &TrainOptions::default()).unwrap();
        let back = HarmonyScorer::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        let mut v: serde_json::Value = serde_json::from_str(&s.to_json().unwrap()).unwrap();
        v["version"] = serde_json::json!(SCORER_VERSION + 1);
        assert!(matches!(HarmonyScorer::from_json(&v.to_string()), Err(Error::Format(_))));
        assert!(matches!(HarmonyScorer::from_json("{"), Err(Error::Parse { .. })));
    }

    #[test]
    fn three_mask_average_is_exact_mean() {
        let (xs, ys) = separable(40, 7);
        let (s, _) = train_on_features(&xs, &ys, &TrainOptions::default()).unwrap();
        let img = ImageGrid::from_fn(24, 24, 3, |x, y, c| ((x * 3 + y * 7 + c) % 9) as f64 / 9.0).unwrap();
        let omega = RegionMask::rect(24, 24, 6, 6, 10, 10);
        let parts = [
            s.predict(&img, &omega).unwrap(),
            s.predict(&img, &dilate(&omega, 2)).unwrap(),
            s.predict(&img, &erode(&omega, 2)).unwrap(),
        ];
        let want = (parts[0] + parts[1] + parts[2]) / 3.0;
        let got = harmony_score(&s, &img, &omega).unwrap();
        assert_eq!(got, want);
        assert!(got > 0.0 && got < 1.0);
    }

    #[test]
    fn thin_region_falls_back_to_itself_when_eroded_away() {
        let (xs, ys) = separable(40, 8);
        let (s, _) = train_on_features(&xs, &ys, &TrainOptions::default()).unwrap();
        let img = ImageGrid::from_fn(20, 20, 1, |x, y, _| ((x * y) % 5) as f64 / 5.0).unwrap();
        let omega = RegionMask::rect(20, 20, 5, 8, 10, 3);
        let base = s.predict(&img, &omega).unwrap();
        let dil = s.predict(&img, &dilate(&omega, 2)).unwrap();
        let got = harmony_score(&s, &img, &omega).unwrap();
        assert!((got - (2.0 * base + dil) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn auc_hand_values() {
        assert_eq!(roc_auc(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.1], &[0.9]).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.5], &[0.5]).unwrap(), 0.5);
    }
}
