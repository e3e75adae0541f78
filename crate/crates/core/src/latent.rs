//! Latent tensors and the encoder/decoder boundary.
//!
//! Two codecs ship: [`IdentityCodec`] (the latent *is* the image) and
//! [`PatchAverageCodec`], which keeps one mean per `f`x`f` block and decodes by
//! bilinear upsampling. The latter is deliberately lossy: everything above the
//! block frequency is gone after a round trip, the way a compressed
//! autoencoder loses fine texture.

use crate::error::{ensure, Result};
use crate::imagecore::resample::axis_weights;
use crate::imagecore::{ImageGrid, RegionMask};

/// `channels` x `height` x `width` grid of reals, planar.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl LatentTensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        ensure!(
            channels >= 1 && height >= 1 && width >= 1,
            "latent dims must be >= 1, got {channels}x{height}x{width}"
        );
        ensure!(
            data.len() == channels * height * width,
            "latent data length {} does not match {channels}x{height}x{width}",
            data.len()
        );
        ensure!(data.iter().all(|v| v.is_finite()), "latent contains non-finite values");
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(channels, height, width, vec![value; channels * height * width])
    }

    pub fn zeros_like(other: &LatentTensor) -> Self {
        Self {
            data: vec![0.0; other.data.len()],
            ..*other
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.width * self.height;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn same_shape(&self, other: &LatentTensor) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn check_same_shape(&self, other: &LatentTensor, what: &str) -> Result<()> {
        ensure!(
            self.same_shape(other),
            "{what}: latent shapes differ, {:?} vs {:?}",
            self.shape(),
            other.shape()
        );
        Ok(())
    }

    /// `a * self + b * other`, elementwise.
    pub fn lincomb(&self, a: f64, other: &LatentTensor, b: f64) -> Result<LatentTensor> {
        self.check_same_shape(other, "lincomb")?;
        Ok(self.zip_map(other, |x, y| a * x + b * y))
    }

    pub(crate) fn zip_map(&self, other: &LatentTensor, f: impl Fn(f64, f64) -> f64) -> LatentTensor {
        LatentTensor {
            data: self.data.iter().zip(&other.data).map(|(x, y)| f(*x, *y)).collect(),
            ..*self
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> LatentTensor {
        LatentTensor {
            data: self.data.iter().map(|x| f(*x)).collect(),
            ..*self
        }
    }

    pub fn max_abs_diff(&self, other: &LatentTensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn l2_distance(&self, other: &LatentTensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Encoder/decoder pair standing between pixel space and latent space.
pub trait LatentCodec: Send + Sync {
    /// Spatial compression factor `f`.
    fn downsample_factor(&self) -> usize;

    fn latent_channels(&self) -> usize;

    fn encode(&self, img: &ImageGrid) -> Result<LatentTensor>;

    /// Decodes to a `(height*f) x (width*f)` image with values clamped to `[0, 1]`.
    fn decode(&self, z: &LatentTensor) -> Result<ImageGrid>;

    /// Decodes and crops away the right/bottom padding added by `encode`.
    fn decode_to(&self, z: &LatentTensor, width: usize, height: usize) -> Result<ImageGrid> {
        let img = self.decode(z)?;
        if img.width() == width && img.height() == height {
            return Ok(img);
        }
        img.crop(0, 0, width, height)
    }

    /// Latent grid size for an image of the given size.
    fn latent_dims(&self, width: usize, height: usize) -> (usize, usize) {
        let f = self.downsample_factor();
        (width.div_ceil(f), height.div_ceil(f))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityCodec {
    channels: usize,
}

impl IdentityCodec {
    pub fn new(channels: usize) -> Self {
        Self { channels }
    }
}

impl LatentCodec for IdentityCodec {
    fn downsample_factor(&self) -> usize {
        1
    }

    fn latent_channels(&self) -> usize {
        self.channels
    }

    fn encode(&self, img: &ImageGrid) -> Result<LatentTensor> {
        ensure!(
            img.channels() == self.channels,
            "codec expects {} channels, image has {}",
            self.channels,
            img.channels()
        );
        LatentTensor::new(img.channels(), img.height(), img.width(), img.data().to_vec())
    }

    fn decode(&self, z: &LatentTensor) -> Result<ImageGrid> {
        ensure!(
            z.channels() == self.channels,
            "codec expects {} latent channels, got {}",
            self.channels,
            z.channels()
        );
        let data = z.data().iter().map(|v| v.clamp(0.0, 1.0)).collect();
        ImageGrid::new(z.width(), z.height(), z.channels(), data)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PatchAverageCodec {
    factor: usize,
    channels: usize,
}

impl PatchAverageCodec {
    pub const DEFAULT_FACTOR: usize = 8;

    pub fn new(factor: usize, channels: usize) -> Result<Self> {
        ensure!(factor >= 1, "downsample factor must be >= 1");
        Ok(Self { factor, channels })
    }

    /// Block means before any clamping, exposed for conservation checks.
    pub fn decode_unclamped(&self, z: &LatentTensor) -> Result<Vec<f64>> {
        ensure!(
            z.channels() == self.channels,
            "codec expects {} latent channels, got {}",
            self.channels,
            z.channels()
        );
        let f = self.factor;
        let (w, h) = (z.width() * f, z.height() * f);
        let xs = axis_weights(z.width(), w);
        let ys = axis_weights(z.height(), h);
        let mut out = Vec::with_capacity(w * h * z.channels());
        for c in 0..z.channels() {
            for &(y0, y1, fy) in &ys {
                for &(x0, x1, fx) in &xs {
                    let top = z.get(c, y0, x0) * (1.0 - fx) + z.get(c, y0, x1) * fx;
                    let bot = z.get(c, y1, x0) * (1.0 - fx) + z.get(c, y1, x1) * fx;
                    out.push(top * (1.0 - fy) + bot * fy);
                }
            }
        }
        Ok(out)
    }
}

impl LatentCodec for PatchAverageCodec {
    fn downsample_factor(&self) -> usize {
        self.factor
    }

    fn latent_channels(&self) -> usize {
        self.channels
    }

    fn encode(&self, img: &ImageGrid) -> Result<LatentTensor> {
        ensure!(
            img.channels() == self.channels,
            "codec expects {} channels, image has {}",
            self.channels,
            img.channels()
        );
        let f = self.factor;
        let (lw, lh) = self.latent_dims(img.width(), img.height());
        let norm = 1.0 / (f * f) as f64;
        let mut data = Vec::with_capacity(lw * lh * img.channels());
        for c in 0..img.channels() {
            for by in 0..lh {
                for bx in 0..lw {
                    let mut sum = 0.0;
                    for dy in 0..f {
                        // replicate-pad right/bottom
                        let y = (by * f + dy).min(img.height() - 1);
                        for dx in 0..f {
                            let x = (bx * f + dx).min(img.width() - 1);
                            sum += img.get(x, y, c);
                        }
                    }
                    data.push(sum * norm);
                }
            }
        }
        LatentTensor::new(img.channels(), lh, lw, data)
    }

    fn decode(&self, z: &LatentTensor) -> Result<ImageGrid> {
        let data = self.decode_unclamped(z)?;
        let f = self.factor;
        ImageGrid::new(z.width() * f, z.height() * f, z.channels(), data).map(ImageGrid::clamped)
    }
}

/// Majority downscale: a latent cell is set when at least half of its
/// `f`x`f` block is set. Blocks hanging over the right/bottom edge count only
/// their in-grid pixels.
pub fn downscale_mask(mask: &RegionMask, f: usize) -> Result<RegionMask> {
    ensure!(f >= 1, "downscale factor must be >= 1");
    if f == 1 {
        return Ok(mask.clone());
    }
    let (lw, lh) = (mask.width().div_ceil(f), mask.height().div_ceil(f));
    Ok(RegionMask::from_fn(lw, lh, |bx, by| {
        let (mut ones, mut total) = (0usize, 0usize);
        for y in by * f..((by + 1) * f).min(mask.height()) {
            for x in bx * f..((bx + 1) * f).min(mask.width()) {
                ones += mask.get(x, y) as usize;
                total += 1;
            }
        }
        2 * ones >= total
    }))
}
