use super::bgd::{boundary_rings, ring_gap};
use crate::error::{Error, Result};
use crate::imagecore::{sobel_gradient_magnitude, to_grayscale, ImageGrid, RegionMask, ScalarGrid};

/// Ring widths the feature vector is computed at, in order.
pub const FEATURE_WIDTHS: [usize; 3] = [1, 3, 5];

/// `FEATURE_WIDTHS.len() * (1 + 3 + 1) + 1`
pub const FEATURE_LEN: usize = 16;

const VARIANCE_EPS: f64 = 1e-6;

/// Per-image data shared by all masks evaluated on the same image.
pub(crate) struct FeatureContext {
    rgb: ImageGrid,
    gray: ScalarGrid,
    grad: ScalarGrid,
}

impl FeatureContext {
    pub(crate) fn new(img: &ImageGrid) -> Result<Self> {
        let gray = to_grayscale(img)?;
        let grad = sobel_gradient_magnitude(&gray);
        Ok(Self {
            rgb: img.with_channels(3)?,
            gray,
            grad,
        })
    }

    fn check(&self, omega: &RegionMask) -> Result<()> {
        if omega.width() != self.rgb.width() || omega.height() != self.rgb.height() {
            return Err(Error::contract(format!(
                "mask {}x{} does not match image {}x{}",
                omega.width(),
                omega.height(),
                self.rgb.width(),
                self.rgb.height()
            )));
        }
        Ok(())
    }

    fn mean_color(&self, mask: &RegionMask) -> Option<[f64; 3]> {
        let n = mask.count();
        if n == 0 {
            return None;
        }
        let mut out = [0.0; 3];
        for (c, o) in out.iter_mut().enumerate() {
            let s: f64 = self
                .rgb
                .plane(c)
                .iter()
                .zip(mask.bits())
                .filter(|(_, m)| **m)
                .map(|(v, _)| v)
                .sum();
            *o = s / n as f64;
        }
        Some(out)
    }

    fn gray_variance(&self, mask: &RegionMask) -> Option<f64> {
        let mean = self.gray.masked_mean(mask)?;
        let n = mask.count() as f64;
        let ss: f64 = self
            .gray
            .data()
            .iter()
            .zip(mask.bits())
            .filter(|(_, m)| **m)
            .map(|(v, _)| (v - mean).powi(2))
            .sum();
        Some(ss / n)
    }

    pub(crate) fn features(&self, omega: &RegionMask) -> Result<Vec<f64>> {
        self.check(omega)?;
        let mut out = Vec::with_capacity(FEATURE_LEN);
        for &w in &FEATURE_WIDTHS {
            let rings = boundary_rings(omega, w)?;
            out.push(ring_gap(&self.grad, &rings)?);
            // ring_gap already rejected empty rings
            let ci = self.mean_color(&rings.inner).unwrap();
            let co = self.mean_color(&rings.outer).unwrap();
            out.extend((0..3).map(|c| (ci[c] - co[c]).abs()));
            let vi = self.gray_variance(&rings.inner).unwrap();
            let vo = self.gray_variance(&rings.outer).unwrap();
            out.push(((vi + VARIANCE_EPS) / (vo + VARIANCE_EPS)).ln().abs());
        }
        let outside = omega.complement();
        let (Some(ci), Some(co)) = (self.mean_color(omega), self.mean_color(&outside)) else {
            return Err(Error::MetricUndefined("region or its complement is empty".into()));
        };
        out.push((0..3).map(|c| (ci[c] - co[c]).powi(2)).sum::<f64>().sqrt());
        debug_assert_eq!(out.len(), FEATURE_LEN);
        Ok(out)
    }
}

/// Fixed-order boundary statistics of `img` around `omega`.
///
/// For each width in [`FEATURE_WIDTHS`]: ring BGD, absolute inner/outer mean
/// difference per color channel, and `|ln|` of the inner/outer luma variance
/// ratio. The last component is the L2 distance between the mean colors
/// inside and outside `omega`. Gray images are treated as equal-channel RGB.
pub fn boundary_features(img: &ImageGrid, omega: &RegionMask) -> Result<Vec<f64>> {
    FeatureContext::new(img)?.features(omega)
}
