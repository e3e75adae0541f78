use super::{ImageGrid, RegionMask};
use crate::error::{ensure, Result};

/// `max(1, round(dim * ratio))` for both axes.
pub fn scaled_dims(width: usize, height: usize, ratio: f64) -> (usize, usize) {
    let s = |d: usize| ((d as f64 * ratio).round() as usize).max(1);
    (s(width), s(height))
}

fn check_gsd(src_gsd: f64, tar_gsd: f64) -> Result<f64> {
    ensure!(
        src_gsd.is_finite() && tar_gsd.is_finite() && src_gsd > 0.0 && tar_gsd > 0.0,
        "GSD values must be positive, got src {src_gsd}, tar {tar_gsd}"
    );
    Ok(src_gsd / tar_gsd)
}

/// Resamples a source patch so one of its pixels covers `tar_gsd` meters.
pub fn rescale_by_gsd(img: &ImageGrid, src_gsd: f64, tar_gsd: f64) -> Result<ImageGrid> {
    let ratio = check_gsd(src_gsd, tar_gsd)?;
    let (w, h) = scaled_dims(img.width(), img.height(), ratio);
    resize_bilinear(img, w, h)
}

/// Mask counterpart of [`rescale_by_gsd`], nearest-neighbour so the output stays binary.
pub fn rescale_mask_by_gsd(mask: &RegionMask, src_gsd: f64, tar_gsd: f64) -> Result<RegionMask> {
    let ratio = check_gsd(src_gsd, tar_gsd)?;
    let (w, h) = scaled_dims(mask.width(), mask.height(), ratio);
    Ok(resize_mask_nearest(mask, w, h))
}

/// Bilinear resize with pixel-centre alignment and clamped borders.
pub fn resize_bilinear(img: &ImageGrid, out_w: usize, out_h: usize) -> Result<ImageGrid> {
    ensure!(out_w >= 1 && out_h >= 1, "output dims must be >= 1");
    if out_w == img.width() && out_h == img.height() {
        return Ok(img.clone());
    }
    let xs = axis_weights(img.width(), out_w);
    let ys = axis_weights(img.height(), out_h);
    ImageGrid::from_fn(out_w, out_h, img.channels(), |x, y, c| {
        let (x0, x1, fx) = xs[x];
        let (y0, y1, fy) = ys[y];
        let top = img.get(x0, y0, c) * (1.0 - fx) + img.get(x1, y0, c) * fx;
        let bot = img.get(x0, y1, c) * (1.0 - fx) + img.get(x1, y1, c) * fx;
        top * (1.0 - fy) + bot * fy
    })
}

pub fn resize_mask_nearest(mask: &RegionMask, out_w: usize, out_h: usize) -> RegionMask {
    let sx = mask.width() as f64 / out_w as f64;
    let sy = mask.height() as f64 / out_h as f64;
    RegionMask::from_fn(out_w, out_h, |x, y| {
        let xs = (((x as f64 + 0.5) * sx) as usize).min(mask.width() - 1);
        let ys = (((y as f64 + 0.5) * sy) as usize).min(mask.height() - 1);
        mask.get(xs, ys)
    })
}

/// For each output index: the two source taps and the weight of the second.
pub(crate) fn axis_weights(in_len: usize, out_len: usize) -> Vec<(usize, usize, f64)> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (in_len - 1) as f64);
            let i0 = pos.floor() as usize;
            let i1 = (i0 + 1).min(in_len - 1);
            (i0, i1, pos - i0 as f64)
        })
        .collect()
}
