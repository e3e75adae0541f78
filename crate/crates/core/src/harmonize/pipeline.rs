use serde::{Deserialize, Serialize};

use super::ops::{edge_mask, edge_width_with_fraction, fuse_step, latent_mean_shift, EDGE_WIDTH_FRACTION};
use super::task::{place, CompositionTask, Placement};
use crate::error::{ensure, Error, Result};
use crate::imagecore::{ImageGrid, RegionMask};
use crate::latent::{downscale_mask, IdentityCodec, LatentCodec, LatentTensor, PatchAverageCodec};
use crate::metrics::HarmonyScorer;
use crate::par::{self, Execution};
use crate::scheduler::{
    build_schedule, ddim_step, invert_trajectory, AnalyticGaussianPredictor, Conditioning, ConstantPredictor,
    Guidance, LatentTrajectory, NoisePredictor, NoiseSchedule, ScheduleConfig, ZeroPredictor,
};

/// Score used for a candidate whose harmony score cannot be computed.
pub const FALLBACK_SCORE: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CodecConfig {
    #[default]
    Identity,
    PatchAverage {
        #[serde(default = "default_factor")]
        factor: usize,
    },
}

fn default_factor() -> usize {
    PatchAverageCodec::DEFAULT_FACTOR
}

impl CodecConfig {
    pub fn build(&self, channels: usize) -> Result<Box<dyn LatentCodec>> {
        Ok(match *self {
            CodecConfig::Identity => Box::new(IdentityCodec::new(channels)),
            CodecConfig::PatchAverage { factor } => Box::new(PatchAverageCodec::new(factor, channels)?),
        })
    }
}

/// Which stand-in noise predictor drives inversion and sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PredictorConfig {
    /// Gaussian prior centred on the encoded target scene.
    TargetPrior {
        #[serde(default = "default_prior_variance")]
        variance: f64,
    },
    /// Gaussian prior with one scalar mean for every element.
    Gaussian { mean: f64, variance: f64 },
    Zero,
    Constant { value: f64 },
}

fn default_prior_variance() -> f64 {
    0.1
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig::TargetPrior {
            variance: default_prior_variance(),
        }
    }
}

impl PredictorConfig {
    /// Builds the predictor for a scene whose clean target latent is `target_latent`.
    pub fn build(&self, target_latent: &LatentTensor) -> Result<Box<dyn NoisePredictor>> {
        Ok(match *self {
            PredictorConfig::TargetPrior { variance } => {
                Box::new(AnalyticGaussianPredictor::new(target_latent.clone(), variance)?)
            }
            PredictorConfig::Gaussian { mean, variance } => {
                let (c, h, w) = target_latent.shape();
                Box::new(AnalyticGaussianPredictor::new(LatentTensor::filled(c, h, w, mean)?, variance)?)
            }
            PredictorConfig::Zero => Box::new(ZeroPredictor),
            PredictorConfig::Constant { value } => {
                ensure!(value.is_finite(), "constant predictor value must be finite");
                Box::new(ConstantPredictor { value })
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarmonizeConfig {
    pub schedule: ScheduleConfig,
    pub codec: CodecConfig,
    pub predictor: PredictorConfig,
    /// Candidate start depths, `1..=inference_steps`.
    pub harmonious_depths: Vec<usize>,
    /// Depth below which edge fusion runs.
    pub preservation_depth: usize,
    pub edge_width_fraction: f64,
    pub guidance_scale: f64,
    /// Pass the conditioning to the predictor during inversion as well.
    pub condition_inversion: bool,
}

impl Default for HarmonizeConfig {
    fn default() -> Self {
        Self {
            schedule: ScheduleConfig::default(),
            codec: CodecConfig::default(),
            predictor: PredictorConfig::default(),
            harmonious_depths: (7..=15).collect(),
            preservation_depth: 5,
            edge_width_fraction: EDGE_WIDTH_FRACTION,
            guidance_scale: 3.5,
            condition_inversion: false,
        }
    }
}

impl HarmonizeConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        build_schedule(&self.schedule)?;
        let n = self.schedule.inference_steps;
        let Some(&lo) = self.harmonious_depths.iter().min() else {
            return cfg_err("harmonious_depths must not be empty".into());
        };
        let hi = *self.harmonious_depths.iter().max().unwrap();
        let mut sorted = self.harmonious_depths.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.harmonious_depths.len() {
            return cfg_err("harmonious_depths contains duplicates".into());
        }
        if hi > n {
            return cfg_err(format!("harmonious depth {hi} exceeds inference_steps {n}"));
        }
        if self.preservation_depth >= lo {
            return cfg_err(format!(
                "preservation_depth {} must be below every harmonious depth (min {lo})",
                self.preservation_depth
            ));
        }
        if !(self.edge_width_fraction > 0.0 && self.edge_width_fraction < 1.0) {
            return cfg_err(format!("edge_width_fraction {} outside (0, 1)", self.edge_width_fraction));
        }
        if !self.guidance_scale.is_finite() {
            return cfg_err("guidance_scale must be finite".into());
        }
        if let PredictorConfig::TargetPrior { variance } | PredictorConfig::Gaussian { variance, .. } = self.predictor {
            if !(variance.is_finite() && variance >= 0.0) {
                return cfg_err(format!("predictor variance {variance} must be finite and >= 0"));
            }
        }
        if let CodecConfig::PatchAverage { factor: 0 } = self.codec {
            return cfg_err("codec factor must be >= 1".into());
        }
        Ok(())
    }

    fn sorted_depths(&self) -> Vec<usize> {
        let mut d = self.harmonious_depths.clone();
        d.sort_unstable();
        d
    }
}

/// Everything candidate generation needs, with both inversions cached up to
/// the deepest harmonious depth.
pub struct PreparedComposition {
    placement: Placement,
    target_size: (usize, usize),
    codec: Box<dyn LatentCodec>,
    predictor: Box<dyn NoisePredictor>,
    schedule: NoiseSchedule,
    omega_latent: RegionMask,
    edge: RegionMask,
    edge_width: usize,
    target_traj: LatentTrajectory,
    source_traj: LatentTrajectory,
    guidance: Option<Guidance>,
    preservation_depth: usize,
    depths: Vec<usize>,
}

impl PreparedComposition {
    pub fn new(task: &CompositionTask, cfg: &HarmonizeConfig) -> Result<Self> {
        cfg.validate()?;
        let placement = place(task)?;
        let target = &task.target;
        let schedule = build_schedule(&cfg.schedule)?;
        let codec = cfg.codec.build(target.channels())?;
        let z_tar = codec.encode(target)?;
        let z_src = codec.encode(&placement.composite)?;
        let predictor = cfg.predictor.build(&z_tar)?;
        let omega_latent = downscale_mask(&placement.omega, codec.downsample_factor())?;
        let (lw, lh) = codec.latent_dims(placement.source.width(), placement.source.height());
        let edge_width = edge_width_with_fraction(lw, lh, cfg.edge_width_fraction);
        let edge = edge_mask(&omega_latent, edge_width);

        let cond = (!task.conditioning.as_bytes().is_empty()).then(|| task.conditioning.clone());
        let inv_cond: Option<&Conditioning> = if cfg.condition_inversion { cond.as_ref() } else { None };
        let depths = cfg.sorted_depths();
        let deepest = *depths.last().unwrap();
        let target_traj = invert_trajectory(&z_tar, deepest, predictor.as_ref(), &schedule, inv_cond)?;
        let source_traj = invert_trajectory(&z_src, deepest, predictor.as_ref(), &schedule, inv_cond)?;
        let guidance = cond.map(|c| Guidance {
            scale: cfg.guidance_scale,
            conditioning: Some(c),
        });
        log::debug!(
            "prepared composition: latent {}x{}, |omega|={}, edge width {edge_width}, depths {:?}",
            z_tar.width(),
            z_tar.height(),
            omega_latent.count(),
            depths
        );
        Ok(Self {
            placement,
            target_size: (target.width(), target.height()),
            codec,
            predictor,
            schedule,
            omega_latent,
            edge,
            edge_width,
            target_traj,
            source_traj,
            guidance,
            preservation_depth: cfg.preservation_depth,
            depths,
        })
    }

    pub fn placement(&self) -> &Placement {
        &self.placement
    }

    pub fn omega(&self) -> &RegionMask {
        &self.placement.omega
    }

    pub fn omega_latent(&self) -> &RegionMask {
        &self.omega_latent
    }

    pub fn edge_mask(&self) -> &RegionMask {
        &self.edge
    }

    pub fn edge_width(&self) -> usize {
        self.edge_width
    }

    pub fn depths(&self) -> &[usize] {
        &self.depths
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    fn aligned_at(&self, depth: usize) -> Result<LatentTensor> {
        let missing = || Error::contract(format!("depth {depth} was not inverted"));
        let s = self.source_traj.at(depth).ok_or_else(missing)?;
        let t = self.target_traj.at(depth).ok_or_else(missing)?;
        latent_mean_shift(s, t, &self.omega_latent)
    }

    /// Final latent of the candidate started at `depth`.
    pub fn candidate_latent(&self, depth: usize) -> Result<LatentTensor> {
        ensure!(
            depth > self.preservation_depth && depth <= self.target_traj.max_depth(),
            "candidate depth {depth} outside ({}, {}]",
            self.preservation_depth,
            self.target_traj.max_depth()
        );
        let pred = self.predictor.as_ref();
        let guidance = self.guidance.as_ref();
        let mut z = self.aligned_at(depth)?;
        for k in (self.preservation_depth + 1..=depth).rev() {
            z = ddim_step(&z, k, pred, &self.schedule, guidance)?;
        }
        for k in (1..=self.preservation_depth).rev() {
            let z_edge = ddim_step(&z, k, pred, &self.schedule, guidance)?;
            let z_p = self.aligned_at(k - 1)?;
            z = fuse_step(&z_edge, &z_p, &self.edge)?;
        }
        Ok(z)
    }

    pub fn decode(&self, z: &LatentTensor) -> Result<ImageGrid> {
        self.codec.decode_to(z, self.target_size.0, self.target_size.1)
    }

    pub fn candidate_image(&self, depth: usize) -> Result<ImageGrid> {
        self.decode(&self.candidate_latent(depth)?)
    }

    /// The mean-aligned paste without any re-sampling: the depth-0 latent
    /// mean shift, decoded.
    pub fn aligned_paste(&self) -> Result<ImageGrid> {
        self.decode(&self.aligned_at(0)?)
    }
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub depth: usize,
    pub image: ImageGrid,
    pub score: f64,
}

/// Candidates in ascending depth order.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    /// Highest-scoring candidate; ties go to the smallest depth.
    pub fn select_best(&self) -> Result<&Candidate> {
        select_best(&self.candidates)
    }
}

pub fn select_best(candidates: &[Candidate]) -> Result<&Candidate> {
    let mut best: Option<&Candidate> = None;
    for c in candidates {
        match best {
            // written with negations so that NaN never beats a number
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            Some(b) if !(c.score > b.score) && !(b.score.is_nan() && !c.score.is_nan()) => {}
            _ => best = Some(c),
        }
    }
    best.ok_or_else(|| Error::contract("no candidates to select from"))
}

/// Runs the full loop: one candidate per harmonious depth, each scored.
pub fn compose(task: &CompositionTask, cfg: &HarmonizeConfig, scorer: &HarmonyScorer) -> Result<CandidateSet> {
    compose_with(task, cfg, scorer, Execution::default())
}

pub fn compose_with(
    task: &CompositionTask,
    cfg: &HarmonizeConfig,
    scorer: &HarmonyScorer,
    exec: Execution,
) -> Result<CandidateSet> {
    let prepared = PreparedComposition::new(task, cfg)?;
    let omega = prepared.omega().clone();
    let results = par::map(prepared.depths(), exec, |&depth| -> Result<Candidate> {
        let image = prepared.candidate_image(depth)?;
        let score = match scorer.score(&image, &omega) {
            Ok(s) => s,
            Err(e) => {
                log::warn!("scoring candidate at depth {depth} failed ({e}); using {FALLBACK_SCORE}");
                FALLBACK_SCORE
            }
        };
        Ok(Candidate { depth, image, score })
    });
    let candidates = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(CandidateSet { candidates })
}
