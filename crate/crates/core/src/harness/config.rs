use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::PoissonConfig;
use crate::error::{Error, Result};
use crate::harmonize::{CodecConfig, HarmonizeConfig, PredictorConfig};
use crate::metrics::{TrainOptions, DEFAULT_BGD_WIDTH};
use crate::scheduler::ScheduleConfig;

/// `harmonize` section of the config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarmonizeSection {
    pub harmonious_depths: Vec<usize>,
    pub preservation_depth: usize,
    pub edge_width_fraction: f64,
    pub guidance_scale: f64,
    pub condition_inversion: bool,
    pub poisson: PoissonConfig,
}

impl Default for HarmonizeSection {
    fn default() -> Self {
        let h = HarmonizeConfig::default();
        Self {
            harmonious_depths: h.harmonious_depths,
            preservation_depth: h.preservation_depth,
            edge_width_fraction: h.edge_width_fraction,
            guidance_scale: h.guidance_scale,
            condition_inversion: h.condition_inversion,
            poisson: PoissonConfig::default(),
        }
    }
}

/// `metrics` section of the config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub bgd_width: usize,
    /// Trained scorer JSON. Relative paths resolve against the config file.
    pub scorer_path: Option<PathBuf>,
    /// Samples per class when a scorer has to be trained on the fly.
    pub scorer_samples: usize,
    pub training: TrainOptions,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            bgd_width: DEFAULT_BGD_WIDTH,
            scorer_path: None,
            scorer_samples: 250,
            training: TrainOptions::default(),
        }
    }
}

/// The whole config document. Every field has a default, so `{}` is valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub schedule: ScheduleConfig,
    pub codec: CodecConfig,
    pub predictor: PredictorConfig,
    pub harmonize: HarmonizeSection,
    pub metrics: MetricsSection,
    pub seed: u64,
}

impl AppConfig {
    pub fn harmonize_config(&self) -> HarmonizeConfig {
        HarmonizeConfig {
            schedule: self.schedule,
            codec: self.codec,
            predictor: self.predictor,
            harmonious_depths: self.harmonize.harmonious_depths.clone(),
            preservation_depth: self.harmonize.preservation_depth,
            edge_width_fraction: self.harmonize.edge_width_fraction,
            guidance_scale: self.harmonize.guidance_scale,
            condition_inversion: self.harmonize.condition_inversion,
        }
    }

    /// Scorer training options with the global seed applied.
    pub fn training_options(&self) -> TrainOptions {
        TrainOptions {
            seed: self.seed,
            ..self.metrics.training
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.harmonize_config().validate().map_err(as_config_error)?;
        self.harmonize.poisson.validate()?;
        if self.metrics.bgd_width == 0 {
            return Err(Error::Config("metrics.bgd_width must be >= 1".into()));
        }
        if self.metrics.scorer_samples == 0 {
            return Err(Error::Config("metrics.scorer_samples must be >= 1".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: AppConfig = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file; relative scorer paths are resolved
    /// against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(p) = &cfg.metrics.scorer_path {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                cfg.metrics.scorer_path = Some(base.join(p));
            }
        }
        Ok(cfg)
    }
}

fn as_config_error(e: Error) -> Error {
    match e {
        Error::Contract(m) => Error::Config(m),
        other => other,
    }
}
