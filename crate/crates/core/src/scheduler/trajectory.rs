use super::ddim::ddim_invert_step;
use super::predictor::{Conditioning, NoisePredictor};
use super::NoiseSchedule;
use crate::error::{ensure, Result};
use crate::latent::LatentTensor;

/// Inverted latents `z_start, z_start+1, ..., z_start+k` of one image.
///
/// Once built, any depth in range is a lookup; [`LatentTrajectory::extend_to`]
/// only computes the steps that are missing.
#[derive(Debug, Clone)]
pub struct LatentTrajectory {
    start_depth: usize,
    latents: Vec<LatentTensor>,
}

impl LatentTrajectory {
    pub fn new(z: LatentTensor, start_depth: usize) -> Self {
        Self {
            start_depth,
            latents: vec![z],
        }
    }

    pub fn start_depth(&self) -> usize {
        self.start_depth
    }

    pub fn max_depth(&self) -> usize {
        self.start_depth + self.latents.len() - 1
    }

    pub fn len(&self) -> usize {
        self.latents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latents.is_empty()
    }

    pub fn latents(&self) -> &[LatentTensor] {
        &self.latents
    }

    /// Latent at an absolute depth.
    pub fn at(&self, depth: usize) -> Option<&LatentTensor> {
        depth.checked_sub(self.start_depth).and_then(|i| self.latents.get(i))
    }

    pub fn extend_to(
        &mut self,
        depth: usize,
        predictor: &dyn NoisePredictor,
        sched: &NoiseSchedule,
        cond: Option<&Conditioning>,
    ) -> Result<()> {
        ensure!(
            depth <= sched.deepest(),
            "trajectory depth {depth} exceeds deepest position {}",
            sched.deepest()
        );
        while self.max_depth() < depth {
            let d = self.max_depth();
            let next = ddim_invert_step(&self.latents[d - self.start_depth], d, predictor, sched, cond)?;
            self.latents.push(next);
        }
        Ok(())
    }
}

/// Inverts a clean latent `depth` steps: entry `k` is `k` applications of
/// [`ddim_invert_step`](super::ddim_invert_step) starting from depth 0.
pub fn invert_trajectory(
    z0: &LatentTensor,
    depth: usize,
    predictor: &dyn NoisePredictor,
    sched: &NoiseSchedule,
    cond: Option<&Conditioning>,
) -> Result<LatentTrajectory> {
    let mut traj = LatentTrajectory::new(z0.clone(), 0);
    traj.extend_to(depth, predictor, sched, cond)?;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::{build_schedule, AnalyticGaussianPredictor, ScheduleConfig, ZeroPredictor};

    #[test]
    fn zero_depth_is_just_the_input() {
        let s = build_schedule(&ScheduleConfig::default()).unwrap();
        let z = LatentTensor::filled(2, 3, 3, 0.4).unwrap();
        let t = invert_trajectory(&z, 0, &ZeroPredictor, &s, None).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.at(0), Some(&z));
    }

    #[test]
    fn zero_predictor_composes_rescalings() {
        let s = build_schedule(&ScheduleConfig::default()).unwrap();
        let z = LatentTensor::new(1, 1, 2, vec![0.5, -1.5]).unwrap();
        let p = 3;
        let mut t = LatentTrajectory::new(z.map(|v| v * s.alpha_bar_at(p).sqrt()), p);
        t.extend_to(p + 2, &ZeroPredictor, &s, None).unwrap();
        let factor = (s.alpha_bar_at(p + 2) / s.alpha_bar_at(p)).sqrt();
        let expect = t.at(p).unwrap().map(|v| v * factor);
        assert!(t.at(p + 2).unwrap().max_abs_diff(&expect) < 1e-14);
        assert_eq!(t.at(p - 1), None);
    }

    #[test]
    fn length_is_depth_plus_one_and_extension_reuses_prefix() {
        let s = build_schedule(&ScheduleConfig::default()).unwrap();
        let z = LatentTensor::new(1, 2, 2, vec![0.1, 0.9, 0.4, 0.6]).unwrap();
        let p = AnalyticGaussianPredictor::new(LatentTensor::filled(1, 2, 2, 0.5).unwrap(), 0.2).unwrap();
        for d in [0, 1, 7, 20] {
            assert_eq!(invert_trajectory(&z, d, &p, &s, None).unwrap().len(), d + 1);
        }
        let mut short = invert_trajectory(&z, 5, &p, &s, None).unwrap();
        short.extend_to(12, &p, &s, None).unwrap();
        let long = invert_trajectory(&z, 12, &p, &s, None).unwrap();
        for d in 0..=12 {
            assert_eq!(short.at(d), long.at(d));
        }
        assert!(invert_trajectory(&z, 21, &p, &s, None).is_err());
    }
}
