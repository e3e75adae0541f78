//! Deterministic DDIM machinery.
//!
//! Positions along the inference grid are *depths*: `0` is the clean latent
//! (`alpha_bar = 1`), `N` the deepest noise level. A sampling step moves from
//! depth `d` to `d - 1`, an inversion step from `d` to `d + 1`.

mod ddim;
mod predictor;
mod trajectory;

pub use ddim::{cfg_eps, ddim_invert_step, ddim_step, ddim_transfer, predict_x0, Guidance};
pub use predictor::{
    analytic_gaussian_predictor, AnalyticGaussianPredictor, Conditioning, ConstantPredictor, NoisePredictor, StepContext, ZeroPredictor,
};
pub use trajectory::{invert_trajectory, LatentTrajectory};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub train_steps: usize,
    pub inference_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            train_steps: 1000,
            inference_steps: 20,
            beta_start: 8.5e-4,
            beta_end: 1.2e-2,
        }
    }
}

/// Cumulative noise coefficients over the subsampled inference grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    train_steps: usize,
    /// Training timestep for depth `i + 1`.
    timesteps: Vec<usize>,
    /// `alpha_bar` for depth `i + 1`.
    alpha_bar: Vec<f64>,
}

/// Scaled-linear betas (`sqrt(beta)` linear in the training index), cumulative
/// products, and a trailing grid of `N` evenly strided training timesteps that
/// always includes the deepest one.
pub fn build_schedule(cfg: &ScheduleConfig) -> Result<NoiseSchedule> {
    let ScheduleConfig {
        train_steps: t,
        inference_steps: n,
        beta_start,
        beta_end,
    } = *cfg;
    ensure!(n >= 1 && n <= t, "need 1 <= inference_steps <= train_steps, got {n} and {t}");
    ensure!(
        beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
        "need 0 < beta_start <= beta_end < 1, got {beta_start} and {beta_end}"
    );
    let (s0, s1) = (beta_start.sqrt(), beta_end.sqrt());
    let mut cumulative = Vec::with_capacity(t);
    let mut prod = 1.0;
    for i in 0..t {
        let frac = if t == 1 { 0.0 } else { i as f64 / (t - 1) as f64 };
        let beta = (s0 + frac * (s1 - s0)).powi(2);
        prod *= 1.0 - beta;
        cumulative.push(prod);
    }
    let stride = t / n;
    let timesteps: Vec<usize> = (0..n).map(|i| t - 1 - (n - 1 - i) * stride).collect();
    let alpha_bar = timesteps.iter().map(|&ts| cumulative[ts]).collect();
    Ok(NoiseSchedule {
        train_steps: t,
        timesteps,
        alpha_bar,
    })
}

impl NoiseSchedule {
    pub fn train_steps(&self) -> usize {
        self.train_steps
    }

    /// Number of inference steps `N`, which is also the deepest depth.
    pub fn inference_steps(&self) -> usize {
        self.alpha_bar.len()
    }

    pub fn deepest(&self) -> usize {
        self.alpha_bar.len()
    }

    /// `alpha_bar` per inference position (depth 1..=N).
    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub fn timesteps(&self) -> &[usize] {
        &self.timesteps
    }

    /// `alpha_bar` at a depth; depth 0 is the clean latent.
    pub fn alpha_bar_at(&self, depth: usize) -> f64 {
        if depth == 0 {
            1.0
        } else {
            self.alpha_bar[depth - 1]
        }
    }

    pub fn timestep_at(&self, depth: usize) -> Option<usize> {
        depth.checked_sub(1).and_then(|i| self.timesteps.get(i).copied())
    }

    pub fn context(&self, depth: usize) -> StepContext {
        StepContext {
            depth,
            timestep: self.timestep_at(depth),
            alpha_bar: self.alpha_bar_at(depth),
        }
    }

    pub(crate) fn check_depth(&self, depth: usize) -> Result<()> {
        ensure!(
            depth <= self.deepest(),
            "depth {depth} outside 0..={}",
            self.deepest()
        );
        Ok(())
    }
}
