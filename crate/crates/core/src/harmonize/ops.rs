//! Latent-space building blocks of the harmonization loop.

use crate::error::{ensure, Result};
use crate::imagecore::{dilate, erode, RegionMask};
use crate::latent::LatentTensor;

/// Default fraction of the shorter source side used as the fusion edge width.
pub const EDGE_WIDTH_FRACTION: f64 = 0.1;

/// Per-channel mean over all spatial positions.
pub fn channel_means(z: &LatentTensor) -> Vec<f64> {
    let n = (z.width() * z.height()) as f64;
    (0..z.channels()).map(|c| z.plane(c).iter().sum::<f64>() / n).collect()
}

fn masked_channel_means(z: &LatentTensor, omega: &RegionMask) -> Vec<f64> {
    let n = omega.count() as f64;
    (0..z.channels())
        .map(|c| {
            z.plane(c)
                .iter()
                .zip(omega.bits())
                .filter(|(_, m)| **m)
                .map(|(v, _)| v)
                .sum::<f64>()
                / n
        })
        .collect()
}

fn check_mask(z: &LatentTensor, mask: &RegionMask, what: &str) -> Result<()> {
    ensure!(
        mask.width() == z.width() && mask.height() == z.height(),
        "{what}: mask is {}x{} but latent is {}x{}",
        mask.width(),
        mask.height(),
        z.width(),
        z.height()
    );
    Ok(())
}

/// Pastes `src_t` into `tar_t` over `omega` after shifting each source channel
/// by `mean(tar_t) - mean(src_t over omega)`.
///
/// `src_t` lives in the target frame; only its values inside `omega` are read.
/// Outside `omega` the output is `tar_t`, bit for bit.
pub fn latent_mean_shift(src_t: &LatentTensor, tar_t: &LatentTensor, omega: &RegionMask) -> Result<LatentTensor> {
    src_t.check_same_shape(tar_t, "latent_mean_shift")?;
    check_mask(tar_t, omega, "latent_mean_shift")?;
    let mut out = tar_t.clone();
    if omega.is_empty() {
        return Ok(out);
    }
    let tar_means = channel_means(tar_t);
    let src_means = masked_channel_means(src_t, omega);
    for c in 0..out.channels() {
        let delta = tar_means[c] - src_means[c];
        let src = src_t.plane(c);
        for ((o, s), m) in out.plane_mut(c).iter_mut().zip(src).zip(omega.bits()) {
            if *m {
                *o = s + delta;
            }
        }
    }
    Ok(out)
}

/// `max(1, round(0.1 * min(src_w, src_h)))`, in latent pixels.
///
/// The target width is accepted for signature parity with the composition
/// inputs but does not enter the width.
pub fn edge_width(src_w: usize, src_h: usize, _tar_w: usize) -> usize {
    edge_width_with_fraction(src_w, src_h, EDGE_WIDTH_FRACTION)
}

pub fn edge_width_with_fraction(src_w: usize, src_h: usize, fraction: f64) -> usize {
    ((fraction * src_w.min(src_h) as f64).round() as usize).max(1)
}

/// Ring straddling the boundary of `omega`: `dilate(omega, w) \ erode(omega, w)`.
pub fn edge_mask(omega: &RegionMask, w: usize) -> RegionMask {
    let outer = dilate(omega, w);
    let inner = erode(omega, w);
    outer
        .difference(&inner)
        .expect("dilate/erode preserve extent")
}

/// `m * z_edge + (1 - m) * z_p` for a binary mask, i.e. a per-cell selection.
pub fn fuse_step(z_edge: &LatentTensor, z_p: &LatentTensor, m_edge: &RegionMask) -> Result<LatentTensor> {
    z_edge.check_same_shape(z_p, "fuse_step")?;
    check_mask(z_edge, m_edge, "fuse_step")?;
    let mut out = z_p.clone();
    for c in 0..out.channels() {
        let edge = z_edge.plane(c);
        for ((o, e), m) in out.plane_mut(c).iter_mut().zip(edge).zip(m_edge.bits()) {
            if *m {
                *o = *e;
            }
        }
    }
    Ok(out)
}
