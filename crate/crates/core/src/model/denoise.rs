//! Median-then-Gaussian smoothing of displacement profiles.
//!
//! Both filters extend the signal past its ends by point reflection
//! (`2·d[0] − d[k]`), which continues straight lines exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::SaccadeProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DenoiseParams {
    /// Median window in samples (odd).
    pub median_window: usize,
    /// Gaussian kernel length in samples (odd).
    pub gaussian_window: usize,
    /// Gaussian standard deviation in samples.
    pub gaussian_sigma: f64,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        Self { median_window: 15, gaussian_window: 5, gaussian_sigma: 1.0 }
    }
}

impl DenoiseParams {
    pub fn validate(&self) -> Result<()> {
        if self.median_window == 0 || self.gaussian_window == 0 {
            return Err(Error::InvalidParameter("denoise windows must hold at least one sample".into()));
        }
        if !(self.gaussian_sigma.is_finite() && self.gaussian_sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gaussian sigma must be positive, got {}",
                self.gaussian_sigma
            )));
        }
        Ok(())
    }
}

/// Value at a possibly out-of-range index, extended by point reflection.
fn reflected(values: &[f64], i: isize) -> f64 {
    let n = values.len() as isize;
    if i < 0 {
        2.0 * values[0] - values[(-i).min(n - 1) as usize]
    } else if i >= n {
        let j = (2 * (n - 1) - i).max(0);
        2.0 * values[n as usize - 1] - values[j as usize]
    } else {
        values[i as usize]
    }
}

/// Largest odd window not longer than `len`, capped at `window`.
fn clamp_window(window: usize, len: usize) -> usize {
    let w = window.min(len).max(1);
    if w.is_multiple_of(2) {
        w - 1
    } else {
        w
    }
}

pub fn median_filter(values: &[f64], window: usize) -> Vec<f64> {
    let w = clamp_window(window, values.len());
    let half = (w / 2) as isize;
    let mut buf = vec![0.0; w];
    (0..values.len() as isize)
        .map(|i| {
            for (k, slot) in buf.iter_mut().enumerate() {
                *slot = reflected(values, i - half + k as isize);
            }
            buf.sort_by(f64::total_cmp);
            buf[w / 2]
        })
        .collect()
}

pub fn gaussian_filter(values: &[f64], window: usize, sigma: f64) -> Vec<f64> {
    let w = clamp_window(window, values.len());
    let half = (w / 2) as isize;
    let mut kernel: Vec<f64> = (-half..=half).map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp()).collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);
    (0..values.len() as isize)
        .map(|i| kernel.iter().enumerate().map(|(k, c)| c * reflected(values, i - half + k as isize)).sum())
        .collect()
}

/// Median then Gaussian filter, with the origin and amplitude restored.
pub fn denoise_values(values: &[f64], params: DenoiseParams) -> Vec<f64> {
    if values.len() < 3 {
        return values.to_vec();
    }
    let mut out =
        gaussian_filter(&median_filter(values, params.median_window), params.gaussian_window, params.gaussian_sigma);
    let last = values.len() - 1;
    out[0] = values[0];
    out[last] = values[last];
    out
}

pub fn denoise_profile(profile: &SaccadeProfile) -> Result<SaccadeProfile> {
    denoise_profile_with(profile, DenoiseParams::default())
}

pub fn denoise_profile_with(profile: &SaccadeProfile, params: DenoiseParams) -> Result<SaccadeProfile> {
    if (profile.dt() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "denoising windows are defined for 1 ms sampling, got {} ms",
            profile.dt()
        )));
    }
    let d = denoise_values(profile.displacement(), params);
    let mut out = SaccadeProfile::with_lead(profile.dt(), d, profile.lead().to_vec(), profile.category.clone())?;
    out.outlier = profile.outlier;
    Ok(out)
}
