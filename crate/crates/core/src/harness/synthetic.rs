//! Seeded synthetic scenes: smooth target textures with rougher,
//! contrasting source patches.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::baselines::{copy_paste, poisson_blend, PoissonConfig};
use crate::error::Result;
use crate::harmonize::CompositionTask;
use crate::imagecore::{ImageGrid, RegionMask};
use crate::metrics::LabeledImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub target_size: usize,
    pub source_size: usize,
    pub channels: usize,
    pub target_amplitude: f64,
    pub target_blur: f64,
    pub source_amplitude: f64,
    pub source_blur: f64,
    /// Range of the per-channel base-color gap between source and target.
    pub contrast: (f64, f64),
    /// Minimum distance between the pasted patch and the target border.
    pub margin: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            target_size: 96,
            source_size: 40,
            channels: 3,
            target_amplitude: 0.05,
            target_blur: 2.0,
            source_amplitude: 0.12,
            source_blur: 0.8,
            contrast: (0.2, 0.3),
            margin: 8,
        }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let r = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

fn blur_plane(plane: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let at = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(j, kv)| kv * plane[y * w + at(x as isize + j as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(j, kv)| kv * tmp[at(y as isize + j as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

/// Blurred Gaussian noise normalized to standard deviation `amplitude`
/// around `base`, clamped to `[0, 1]`.
pub fn texture(
    w: usize,
    h: usize,
    base: &[f64],
    amplitude: f64,
    blur: f64,
    rng: &mut impl Rng,
) -> Result<ImageGrid> {
    let mut data = Vec::with_capacity(w * h * base.len());
    for &b in base {
        let noise: Vec<f64> = (0..w * h).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let smooth = blur_plane(&noise, w, h, blur);
        let mean = smooth.iter().sum::<f64>() / smooth.len() as f64;
        let sd = (smooth.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / smooth.len() as f64).sqrt();
        let sd = if sd > 0.0 { sd } else { 1.0 };
        data.extend(smooth.iter().map(|v| (b + amplitude * (v - mean) / sd).clamp(0.0, 1.0)));
    }
    ImageGrid::new(w, h, base.len(), data)
}

/// Generator for tasks and scorer training data, fully determined by its seed.
pub struct SyntheticSuite {
    cfg: SyntheticConfig,
    rng: ChaCha8Rng,
}

impl SyntheticSuite {
    pub fn new(cfg: SyntheticConfig, seed: u64) -> Self {
        Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.cfg
    }

    fn target_base(&mut self) -> Vec<f64> {
        (0..self.cfg.channels).map(|_| self.rng.random_range(0.3..0.7)).collect()
    }

    pub fn target(&mut self) -> Result<ImageGrid> {
        let base = self.target_base();
        let n = self.cfg.target_size;
        texture(n, n, &base, self.cfg.target_amplitude, self.cfg.target_blur, &mut self.rng)
    }

    /// A source patch whose base color is pushed away from `target_base`.
    fn source_for(&mut self, target_base: &[f64]) -> Result<ImageGrid> {
        let (lo, hi) = self.cfg.contrast;
        let base: Vec<f64> = target_base
            .iter()
            .map(|&t| {
                let gap = self.rng.random_range(lo..=hi);
                if t < 0.5 {
                    t + gap
                } else {
                    t - gap
                }
            })
            .collect();
        let n = self.cfg.source_size;
        texture(n, n, &base, self.cfg.source_amplitude, self.cfg.source_blur, &mut self.rng)
    }

    fn origin(&mut self) -> (usize, usize) {
        let hi = self.cfg.target_size - self.cfg.source_size - self.cfg.margin;
        let lo = self.cfg.margin.min(hi);
        (self.rng.random_range(lo..=hi), self.rng.random_range(lo..=hi))
    }

    pub fn task(&mut self) -> Result<CompositionTask> {
        let base = self.target_base();
        let n = self.cfg.target_size;
        let target = texture(n, n, &base, self.cfg.target_amplitude, self.cfg.target_blur, &mut self.rng)?;
        let source = self.source_for(&base)?;
        let origin = self.origin();
        Ok(CompositionTask::new(source, target, origin, 1.0, 1.0))
    }

    pub fn tasks(&mut self, count: usize) -> Result<Vec<CompositionTask>> {
        (0..count).map(|_| self.task()).collect()
    }

    /// Random rectangle covering 25-50% of each side, away from the border.
    pub fn random_region(&mut self, w: usize, h: usize) -> RegionMask {
        let rw = self.rng.random_range(w / 4..=w / 2).max(1);
        let rh = self.rng.random_range(h / 4..=h / 2).max(1);
        let mut offset = |free: usize| {
            let lo = free.min(2);
            let hi = free.saturating_sub(2).max(lo);
            self.rng.random_range(lo..=hi)
        };
        let x0 = offset(w - rw);
        let y0 = offset(h - rh);
        RegionMask::rect(w, h, x0, y0, rw, rh)
    }

    /// Untouched scenes with a random region to judge.
    pub fn positives(&mut self, count: usize) -> Result<Vec<LabeledImage>> {
        (0..count)
            .map(|_| {
                let image = self.target()?;
                let omega = self.random_region(image.width(), image.height());
                Ok(LabeledImage { image, omega })
            })
            .collect()
    }

    /// Alternating copy-paste and Poisson composites.
    pub fn negatives(&mut self, count: usize, poisson: &PoissonConfig) -> Result<Vec<LabeledImage>> {
        (0..count)
            .map(|i| {
                let task = self.task()?;
                let omega = crate::harmonize::place(&task)?.omega;
                let image = if i % 2 == 0 {
                    copy_paste(&task)?
                } else {
                    poisson_blend(&task, poisson)?
                };
                Ok(LabeledImage { image, omega })
            })
            .collect()
    }
}
