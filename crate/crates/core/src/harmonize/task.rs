use crate::error::{ensure, Error, Result};
use crate::imagecore::{rescale_by_gsd, rescale_mask_by_gsd, ImageGrid, RegionMask};
use crate::scheduler::Conditioning;

/// One composition request: paste `source` into `target` at `paste_origin`.
#[derive(Debug, Clone)]
pub struct CompositionTask {
    pub source: ImageGrid,
    pub target: ImageGrid,
    /// Top-left corner of the rescaled source in target pixels, `(x, y)`.
    pub paste_origin: (usize, usize),
    /// Region of the source to paste, in source pixels. `None` pastes all of it.
    pub source_mask: Option<RegionMask>,
    /// Meters per pixel of the source.
    pub src_gsd: f64,
    /// Meters per pixel of the target.
    pub tar_gsd: f64,
    pub conditioning: Conditioning,
}

impl CompositionTask {
    pub fn new(source: ImageGrid, target: ImageGrid, paste_origin: (usize, usize), src_gsd: f64, tar_gsd: f64) -> Self {
        Self {
            source,
            target,
            paste_origin,
            source_mask: None,
            src_gsd,
            tar_gsd,
            conditioning: Conditioning::default(),
        }
    }

    pub fn with_mask(mut self, mask: RegionMask) -> Self {
        self.source_mask = Some(mask);
        self
    }

    pub fn with_conditioning(mut self, cond: Conditioning) -> Self {
        self.conditioning = cond;
        self
    }
}

/// A task resolved into the target frame.
#[derive(Debug, Clone)]
pub struct Placement {
    /// GSD-rescaled source with the target's channel count.
    pub source: ImageGrid,
    /// Source mask after rescaling, in source pixels.
    pub source_mask: RegionMask,
    pub origin: (usize, usize),
    /// Pasted footprint in target pixels.
    pub omega: RegionMask,
    /// Target with the source written over `omega`.
    pub composite: ImageGrid,
}

impl Placement {
    /// Target-sized image holding the source, replicated outward from its
    /// border, so every target pixel has a source value.
    pub fn source_extended(&self, target_w: usize, target_h: usize) -> Result<ImageGrid> {
        let (ox, oy) = (self.origin.0 as isize, self.origin.1 as isize);
        let (sw, sh) = (self.source.width() as isize, self.source.height() as isize);
        ImageGrid::from_fn(target_w, target_h, self.source.channels(), |x, y, c| {
            let sx = (x as isize - ox).clamp(0, sw - 1) as usize;
            let sy = (y as isize - oy).clamp(0, sh - 1) as usize;
            self.source.get(sx, sy, c)
        })
    }
}

/// Rescales the source by GSD and places it into the target frame.
pub fn place(task: &CompositionTask) -> Result<Placement> {
    let target = &task.target;
    if let Some(m) = &task.source_mask {
        ensure!(
            m.width() == task.source.width() && m.height() == task.source.height(),
            "source mask is {}x{} but source is {}x{}",
            m.width(),
            m.height(),
            task.source.width(),
            task.source.height()
        );
    }
    let source = rescale_by_gsd(&task.source, task.src_gsd, task.tar_gsd)?.with_channels(target.channels())?;
    let source_mask = match &task.source_mask {
        Some(m) => rescale_mask_by_gsd(m, task.src_gsd, task.tar_gsd)?,
        None => RegionMask::full(source.width(), source.height()),
    };
    let (ox, oy) = task.paste_origin;
    if ox + source.width() > target.width() || oy + source.height() > target.height() {
        return Err(Error::Placement(format!(
            "rescaled source {}x{} at ({ox},{oy}) does not fit target {}x{}",
            source.width(),
            source.height(),
            target.width(),
            target.height()
        )));
    }
    let omega = RegionMask::from_fn(target.width(), target.height(), |x, y| {
        x >= ox
            && y >= oy
            && x < ox + source.width()
            && y < oy + source.height()
            && source_mask.get(x - ox, y - oy)
    });
    let mut composite = target.clone();
    for c in 0..target.channels() {
        for y in 0..source.height() {
            for x in 0..source.width() {
                if source_mask.get(x, y) {
                    composite.set(ox + x, oy + y, c, source.get(x, y, c));
                }
            }
        }
    }
    Ok(Placement {
        source,
        source_mask,
        origin: (ox, oy),
        omega,
        composite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn footprint_and_composite() {
        let target = ImageGrid::filled(8, 8, 3, 1.0).unwrap();
        let source = ImageGrid::filled(4, 4, 3, 0.0).unwrap();
        let p = place(&CompositionTask::new(source, target, (0, 0), 1.0, 1.0)).unwrap();
        assert_eq!(p.omega, RegionMask::rect(8, 8, 0, 0, 4, 4));
        let black = (0..64).filter(|i| p.composite.plane(0)[*i] == 0.0).count();
        assert_eq!(black, 16);
    }

    #[test]
    fn gsd_rescaling_applies_before_fit_check() {
        let target = ImageGrid::filled(10, 10, 1, 0.5).unwrap();
        let source = ImageGrid::filled(8, 8, 1, 0.1).unwrap();
        // 0.5 m source on a 1 m target halves the patch to 4x4
        let p = place(&CompositionTask::new(source.clone(), target.clone(), (6, 6), 0.5, 1.0)).unwrap();
        assert_eq!((p.source.width(), p.source.height()), (4, 4));
        assert!(matches!(
            place(&CompositionTask::new(source, target, (6, 6), 1.0, 1.0)),
            Err(Error::Placement(_))
        ));
    }

    #[test]
    fn gray_source_is_matched_to_rgb_target() {
        let target = ImageGrid::filled(6, 6, 3, 0.5).unwrap();
        let source = ImageGrid::filled(2, 2, 1, 0.2).unwrap();
        let p = place(&CompositionTask::new(source, target, (1, 1), 1.0, 1.0)).unwrap();
        assert_eq!(p.source.channels(), 3);
        assert!((p.composite.get(1, 1, 2) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn mask_size_must_match_source() {
        let target = ImageGrid::filled(6, 6, 1, 0.5).unwrap();
        let source = ImageGrid::filled(2, 2, 1, 0.2).unwrap();
        let task = CompositionTask::new(source, target, (1, 1), 1.0, 1.0).with_mask(RegionMask::full(3, 3));
        assert!(matches!(place(&task), Err(Error::Contract(_))));
    }
}
