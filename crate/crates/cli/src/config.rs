//! The declarative config file shared by every subcommand.
//!
//! Values are resolved as command-line flag, then config file, then built-in
//! default. The file path comes from `--config` or, failing that, from the
//! `SACKIT_CONFIG` environment variable.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sackit::detection::DetectionParams;
use sackit::eval::SweepConfig;
use sackit::experiment::ExperimentConfig;
use sackit::model::{AdaptParams, DenoiseParams, ModelParams};
use sackit::shear::ShearFitParams;
use sackit::synth::SynthConfig;
use serde::{Deserialize, Serialize};

pub const CONFIG_ENV: &str = "SACKIT_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptSection {
    /// Fewest target saccades for an amplitude to contribute a shear point.
    pub min_target_count: usize,
}

impl Default for AdaptSection {
    fn default() -> Self {
        Self { min_target_count: AdaptParams::default().min_target_count }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub detection: DetectionParams,
    pub model: ModelParams,
    pub shear: ShearFitParams,
    pub denoise: DenoiseParams,
    pub adapt: AdaptSection,
    pub synth: SynthConfig,
    pub sweep: SweepConfig,
    pub experiment: ExperimentConfig,
}

impl Config {
    /// Reads `explicit`, or the file named by `SACKIT_CONFIG`, or returns the
    /// defaults when neither is given.
    pub fn load(explicit: Option<&Path>) -> Result<Self> {
        let path = match explicit {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from),
        };
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg = Self::parse(&text).with_context(|| format!("in config {}", path.display()))?;
        log::debug!("config loaded from {}", path.display());
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.detection.validate()?;
        self.model.validate()?;
        self.shear.validate()?;
        self.denoise.validate()?;
        self.synth.validate()?;
        validate_sweep(&self.sweep)?;
        validate_sweep(&self.experiment.sweep)?;
        if self.adapt.min_target_count == 0 {
            bail!("adapt.min_target_count must be at least 1");
        }
        let e = &self.experiment;
        if e.saccades == 0 || e.test_size == 0 || e.pool_size == 0 || e.calibration == 0 {
            bail!("experiment sizes must be positive");
        }
        if !(e.vertical_gamma.is_finite() && e.vertical_gamma > 0.0) {
            bail!("experiment.vertical_gamma must be positive");
        }
        if !(0.0..=1.0).contains(&e.vertical_weight) {
            bail!("experiment.vertical_weight must lie in [0, 1]");
        }
        if !e.bias_ms.is_finite() {
            bail!("experiment.bias_ms must be finite");
        }
        Ok(())
    }

    pub fn adapt_params(&self) -> AdaptParams {
        AdaptParams {
            model: self.model.clone(),
            denoise: self.denoise,
            fit: self.shear,
            min_target_count: self.adapt.min_target_count,
        }
    }
}

fn validate_sweep(s: &SweepConfig) -> Result<()> {
    if s.reps == 0 {
        bail!("sweep.reps must be at least 1");
    }
    if s.n_values.is_empty() || s.n_values.contains(&0) {
        bail!("sweep.n_values must be a non-empty list of positive sizes");
    }
    Ok(())
}
