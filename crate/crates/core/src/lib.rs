//! Training-free composition of satellite imagery in a diffusion latent space.
//!
//! The pipeline inverts a target scene and a pasted source patch with
//! deterministic DDIM, aligns the source to the target with a per-channel
//! latent mean shift, re-samples each candidate depth while fusing a freely
//! denoised edge ring with the identity-preserving trajectory, and finally
//! picks the candidate a boundary-feature harmony scorer likes best.
//!
//! Module map:
//!
//! * [`imagecore`]: image and mask containers, PNG/PNM I/O, Sobel, morphology, resampling.
//! * [`latent`]: latent tensors and the encoder/decoder boundary.
//! * [`scheduler`]: noise schedule, DDIM step/inversion, guidance, reference predictors.
//! * [`harmonize`]: latent mean shift, edge masks, timestep-wise fusion, candidate selection.
//! * [`baselines`]: copy-paste and Poisson blending.
//! * [`metrics`]: boundary gradient difference, Fréchet distance, harmony scorer.
//! * [`harness`]: configuration, manifests, benchmark reports, contact sheets, synthetic suites.

pub mod baselines;
pub mod error;
pub mod harmonize;
pub mod harness;
pub mod imagecore;
pub mod latent;
pub mod metrics;
pub mod par;
pub mod scheduler;

pub use error::{Error, Result};
