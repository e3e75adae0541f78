use super::predictor::{Conditioning, NoisePredictor};
use super::NoiseSchedule;
use crate::error::{ensure, Result};
use crate::latent::LatentTensor;

/// Classifier-free guidance settings for sampling steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Guidance {
    pub scale: f64,
    pub conditioning: Option<Conditioning>,
}

/// `(z_t - sqrt(1 - a) * eps) / sqrt(a)` with `a = alpha_bar` at `depth`.
pub fn predict_x0(z_t: &LatentTensor, eps: &LatentTensor, depth: usize, sched: &NoiseSchedule) -> Result<LatentTensor> {
    sched.check_depth(depth)?;
    z_t.check_same_shape(eps, "predict_x0")?;
    let a = sched.alpha_bar_at(depth);
    Ok(x0_from(z_t, eps, a))
}

fn x0_from(z_t: &LatentTensor, eps: &LatentTensor, a: f64) -> LatentTensor {
    let (inv_sa, s1a) = (1.0 / a.sqrt(), (1.0 - a).sqrt());
    z_t.zip_map(eps, |z, e| (z - s1a * e) * inv_sa)
}

/// Moves `z` from noise level `from_ab` to `to_ab` along the deterministic DDIM
/// path defined by `eps`: `sqrt(to) * x0 + sqrt(1 - to) * eps`.
pub fn ddim_transfer(z: &LatentTensor, eps: &LatentTensor, from_ab: f64, to_ab: f64) -> Result<LatentTensor> {
    z.check_same_shape(eps, "ddim_transfer")?;
    let x0 = x0_from(z, eps, from_ab);
    Ok(x0.zip_map(eps, |x, e| to_ab.sqrt() * x + (1.0 - to_ab).sqrt() * e))
}

/// `eps_uncond + scale * (eps_cond - eps_uncond)`.
pub fn cfg_eps(eps_cond: &LatentTensor, eps_uncond: &LatentTensor, scale: f64) -> Result<LatentTensor> {
    eps_cond.check_same_shape(eps_uncond, "cfg_eps")?;
    Ok(eps_uncond.zip_map(eps_cond, |u, c| u + scale * (c - u)))
}

fn guided_eps(
    z: &LatentTensor,
    depth: usize,
    predictor: &dyn NoisePredictor,
    sched: &NoiseSchedule,
    guidance: Option<&Guidance>,
) -> Result<LatentTensor> {
    let ctx = sched.context(depth);
    match guidance {
        Some(Guidance {
            scale,
            conditioning: Some(cond),
        }) => {
            let cond_eps = predictor.predict(z, &ctx, Some(cond))?;
            let uncond_eps = predictor.predict(z, &ctx, None)?;
            cfg_eps(&cond_eps, &uncond_eps, *scale)
        }
        _ => predictor.predict(z, &ctx, None),
    }
}

/// One sampling step from `depth` to `depth - 1`.
pub fn ddim_step(
    z_t: &LatentTensor,
    depth: usize,
    predictor: &dyn NoisePredictor,
    sched: &NoiseSchedule,
    guidance: Option<&Guidance>,
) -> Result<LatentTensor> {
    ensure!(depth > 0, "ddim_step needs depth > 0");
    sched.check_depth(depth)?;
    let eps = guided_eps(z_t, depth, predictor, sched, guidance)?;
    ddim_transfer(z_t, &eps, sched.alpha_bar_at(depth), sched.alpha_bar_at(depth - 1))
}

/// One inversion step from `depth` to `depth + 1`, unguided.
pub fn ddim_invert_step(
    z_t: &LatentTensor,
    depth: usize,
    predictor: &dyn NoisePredictor,
    sched: &NoiseSchedule,
    cond: Option<&Conditioning>,
) -> Result<LatentTensor> {
    ensure!(
        depth < sched.deepest(),
        "ddim_invert_step needs depth < {}, got {depth}",
        sched.deepest()
    );
    let eps = predictor.predict(z_t, &sched.context(depth), cond)?;
    ddim_transfer(z_t, &eps, sched.alpha_bar_at(depth), sched.alpha_bar_at(depth + 1))
}
