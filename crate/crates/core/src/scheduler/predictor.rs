use crate::error::{ensure, Result};
use crate::latent::LatentTensor;

/// Opaque conditioning payload handed through to the predictor untouched.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Conditioning(Vec<u8>);

impl Conditioning {
    pub fn new(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn from_text(text: &str) -> Self {
        Self(text.as_bytes().to_vec())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// The payload as UTF-8 text, when it is text.
    pub fn as_text(&self) -> Option<&str> {
        std::str::from_utf8(&self.0).ok()
    }
}

/// Where on the schedule a prediction is requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext {
    pub depth: usize,
    /// Training timestep, `None` at depth 0.
    pub timestep: Option<usize>,
    pub alpha_bar: f64,
}

/// Noise prediction `eps(z, t)`. Implementations must be deterministic.
pub trait NoisePredictor: Send + Sync {
    fn predict(&self, z: &LatentTensor, ctx: &StepContext, cond: Option<&Conditioning>) -> Result<LatentTensor>;
}

impl<P: NoisePredictor + ?Sized> NoisePredictor for Box<P> {
    fn predict(&self, z: &LatentTensor, ctx: &StepContext, cond: Option<&Conditioning>) -> Result<LatentTensor> {
        (**self).predict(z, ctx, cond)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPredictor;

impl NoisePredictor for ZeroPredictor {
    fn predict(&self, z: &LatentTensor, _: &StepContext, _: Option<&Conditioning>) -> Result<LatentTensor> {
        Ok(LatentTensor::zeros_like(z))
    }
}

/// `eps == value` everywhere, independent of the latent.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPredictor {
    pub value: f64,
}

impl NoisePredictor for ConstantPredictor {
    fn predict(&self, z: &LatentTensor, _: &StepContext, _: Option<&Conditioning>) -> Result<LatentTensor> {
        Ok(z.map(|_| self.value))
    }
}

/// Exact posterior noise for data drawn from `Normal(mean, variance * I)`:
///
/// `eps(z) = sqrt(1 - a) * (z - sqrt(a) * mean) / (a * variance + 1 - a)`
///
/// with `a = alpha_bar` at the current depth. The mean is per element, so a
/// predictor centred on an encoded scene pulls anything off that scene back
/// towards it, more strongly the deeper the latent sits.
#[derive(Debug, Clone)]
pub struct AnalyticGaussianPredictor {
    mean: LatentTensor,
    variance: f64,
}

pub fn analytic_gaussian_predictor(mean: LatentTensor, variance: f64) -> Result<AnalyticGaussianPredictor> {
    AnalyticGaussianPredictor::new(mean, variance)
}

impl AnalyticGaussianPredictor {
    pub fn new(mean: LatentTensor, variance: f64) -> Result<Self> {
        ensure!(variance.is_finite() && variance > 0.0, "variance must be positive, got {variance}");
        Ok(Self { mean, variance })
    }

    pub fn mean(&self) -> &LatentTensor {
        &self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

impl NoisePredictor for AnalyticGaussianPredictor {
    fn predict(&self, z: &LatentTensor, ctx: &StepContext, _: Option<&Conditioning>) -> Result<LatentTensor> {
        z.check_same_shape(&self.mean, "gaussian predictor")?;
        let a = ctx.alpha_bar;
        let (sa, s1a) = (a.sqrt(), (1.0 - a).sqrt());
        let denom = a * self.variance + 1.0 - a;
        Ok(z.zip_map(&self.mean, |zv, m| s1a * (zv - sa * m) / denom))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(a: f64) -> StepContext {
        StepContext {
            depth: 1,
            timestep: Some(0),
            alpha_bar: a,
        }
    }

    #[test]
    fn on_manifold_point_needs_no_correction() {
        let mean = LatentTensor::new(1, 1, 3, vec![0.2, -0.4, 1.5]).unwrap();
        let p = AnalyticGaussianPredictor::new(mean.clone(), 0.3).unwrap();
        let a: f64 = 0.37;
        let z = mean.map(|m| a.sqrt() * m);
        let eps = p.predict(&z, &ctx(a), None).unwrap();
        assert!(eps.data().iter().all(|e| e.abs() < 1e-15));
    }

    #[test]
    fn vanishing_variance_closed_form() {
        let p = AnalyticGaussianPredictor::new(LatentTensor::filled(1, 1, 1, 0.0).unwrap(), 1e-12).unwrap();
        let eps = p.predict(&LatentTensor::filled(1, 1, 1, 1.0).unwrap(), &ctx(0.5), None).unwrap();
        assert!((eps.data()[0] - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn non_positive_variance_is_rejected() {
        let m = LatentTensor::filled(1, 1, 1, 0.0).unwrap();
        assert!(AnalyticGaussianPredictor::new(m.clone(), 0.0).is_err());
        assert!(AnalyticGaussianPredictor::new(m, -1.0).is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let p = AnalyticGaussianPredictor::new(LatentTensor::filled(1, 2, 2, 0.0).unwrap(), 1.0).unwrap();
        assert!(p.predict(&LatentTensor::filled(1, 3, 2, 0.0).unwrap(), &ctx(0.5), None).is_err());
    }
}
