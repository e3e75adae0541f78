use crate::error::{Error, Result};
use crate::imagecore::{dilate, erode, sobel_gradient_magnitude, to_grayscale, ImageGrid, RegionMask, ScalarGrid};

/// Ring width used for reported BGD values.
pub const DEFAULT_BGD_WIDTH: usize = 3;

/// Inner and outer boundary rings of a region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryRings {
    /// `omega \ erode(omega, w)`
    pub inner: RegionMask,
    /// `dilate(omega, w) \ omega`, clipped to the grid
    pub outer: RegionMask,
    pub margin: usize,
}

pub fn boundary_rings(omega: &RegionMask, w: usize) -> Result<BoundaryRings> {
    if w == 0 {
        return Err(Error::contract("ring width must be >= 1"));
    }
    let inner = omega.difference(&erode(omega, w))?;
    let outer = dilate(omega, w).difference(omega)?;
    Ok(BoundaryRings { inner, outer, margin: w })
}

/// `|mean_in(G) - mean_out(G)|` for a precomputed gradient magnitude `G`.
pub(crate) fn ring_gap(grad: &ScalarGrid, rings: &BoundaryRings) -> Result<f64> {
    let undefined = |which: &str| Error::MetricUndefined(format!("{which} ring is empty at w={}", rings.margin));
    let inner = grad.masked_mean(&rings.inner).ok_or_else(|| undefined("inner"))?;
    let outer = grad.masked_mean(&rings.outer).ok_or_else(|| undefined("outer"))?;
    Ok((inner - outer).abs())
}

/// Boundary Gradient Difference on the luma channel of `img`.
pub fn bgd_abs(img: &ImageGrid, omega: &RegionMask, w: usize) -> Result<f64> {
    if omega.width() != img.width() || omega.height() != img.height() {
        return Err(Error::contract(format!(
            "mask {}x{} does not match image {}x{}",
            omega.width(),
            omega.height(),
            img.width(),
            img.height()
        )));
    }
    let rings = boundary_rings(omega, w)?;
    let grad = sobel_gradient_magnitude(&to_grayscale(img)?);
    ring_gap(&grad, &rings)
}
