//! Pixel-domain primitives.
//!
//! Images are stored planar: `data[c * width * height + y * width + x]`.

mod filter;
mod io;
mod morphology;
pub(crate) mod resample;

pub use filter::{sobel_gradient_magnitude, to_grayscale, LUMA_WEIGHTS};
pub use io::{load_image, load_mask, save_image, save_mask};
pub use morphology::{dilate, erode};
pub use resample::{rescale_by_gsd, rescale_mask_by_gsd, resize_bilinear, resize_mask_nearest, scaled_dims};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        ensure!(width >= 1 && height >= 1, "image dims must be >= 1, got {width}x{height}");
        ensure!(channels == 1 || channels == 3, "image channels must be 1 or 3, got {channels}");
        ensure!(
            data.len() == width * height * channels,
            "data length {} does not match {width}x{height}x{channels}",
            data.len()
        );
        ensure!(
            data.iter().all(|v| v.is_finite()),
            "image data contains non-finite values"
        );
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image from a per-pixel function returning one value per channel.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[c * self.width * self.height + y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let idx = c * self.width * self.height + y * self.width + x;
        self.data[idx] = v;
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.width * self.height;
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Clamps every value into `[0, 1]`.
    pub fn clamped(mut self) -> Self {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }

    /// Returns a copy with exactly `channels` channels (gray is replicated to RGB;
    /// RGB is reduced to luma).
    pub fn with_channels(&self, channels: usize) -> Result<Self> {
        match (self.channels, channels) {
            (a, b) if a == b => Ok(self.clone()),
            (1, 3) => {
                let mut data = Vec::with_capacity(self.data.len() * 3);
                for _ in 0..3 {
                    data.extend_from_slice(&self.data);
                }
                Self::new(self.width, self.height, 3, data)
            }
            (3, 1) => {
                let gray = to_grayscale(self)?;
                Self::new(self.width, self.height, 1, gray.data)
            }
            (a, b) => Err(crate::Error::contract(format!(
                "cannot convert {a} channels to {b}"
            ))),
        }
    }

    /// Copies the `w`x`h` window starting at `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        ensure!(
            x0 + w <= self.width && y0 + h <= self.height,
            "crop window {w}x{h}+{x0}+{y0} exceeds {}x{}",
            self.width,
            self.height
        );
        Self::from_fn(w, h, self.channels, |x, y, c| self.get(x0 + x, y0 + y, c))
    }

    pub fn max_abs_diff(&self, other: &ImageGrid) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn l2_distance(&self, other: &ImageGrid) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Binary mask over a `width`x`height` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl RegionMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        ensure!(width >= 1 && height >= 1, "mask dims must be >= 1, got {width}x{height}");
        ensure!(
            bits.len() == width * height,
            "mask length {} does not match {width}x{height}",
            bits.len()
        );
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    /// Axis-aligned filled rectangle `[x0, x0+w) x [y0, y0+h)`, clipped to the grid.
    pub fn rect(width: usize, height: usize, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Self::from_fn(width, height, |x, y| {
            x >= x0 && x < x0 + w && y >= y0 && y < y0 + h
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn same_extent(&self, other: &RegionMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// `self \ other`.
    pub fn difference(&self, other: &RegionMask) -> Result<Self> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn intersection(&self, other: &RegionMask) -> Result<Self> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn union(&self, other: &RegionMask) -> Result<Self> {
        self.zip_with(other, |a, b| a || b)
    }

    /// `true` when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.same_extent(other) && self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }

    fn zip_with(&self, other: &RegionMask, f: impl Fn(bool, bool) -> bool) -> Result<Self> {
        ensure!(
            self.same_extent(other),
            "mask extents differ: {}x{} vs {}x{}",
            self.width,
            self.height,
            other.width,
            other.height
        );
        Ok(Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    /// Bounding box `(x0, y0, w, h)` of the set pixels, if any.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        (x0 != usize::MAX).then(|| (x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }
}

/// Single-channel real grid (grayscale intensities, gradient magnitudes).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        ensure!(width >= 1 && height >= 1, "grid dims must be >= 1, got {width}x{height}");
        ensure!(
            data.len() == width * height,
            "data length {} does not match {width}x{height}",
            data.len()
        );
        ensure!(data.iter().all(|v| v.is_finite()), "grid contains non-finite values");
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Mean over the set pixels of `mask`, `None` when the mask is empty.
    pub fn masked_mean(&self, mask: &RegionMask) -> Option<f64> {
        let (sum, n) = self
            .data
            .iter()
            .zip(mask.bits())
            .filter(|(_, m)| **m)
            .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}
