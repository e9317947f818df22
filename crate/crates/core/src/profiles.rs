//! Category selection, mean profiles and the envelope dissimilarity measure.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::interp::held;
use crate::types::{CategoryLabel, Factor, MeanProfile, SaccadeDataset, SaccadeProfile};

pub use crate::interp::resample;

/// Amplitudes within `halfwidth` of `center` (inclusive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeWindow {
    pub center: f64,
    pub halfwidth: f64,
}

impl AmplitudeWindow {
    pub fn new(center: f64, halfwidth: f64) -> Result<Self> {
        if !(halfwidth > 0.0) || !center.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "amplitude window needs a finite center and positive halfwidth, got {center} ± {halfwidth}"
            )));
        }
        Ok(Self { center, halfwidth })
    }

    /// The ±1° window.
    pub fn around(center: f64) -> Self {
        Self { center, halfwidth: 1.0 }
    }

    pub fn contains(&self, amplitude: f64) -> bool {
        // A small slack keeps amplitudes like 9.0000000001 inside a [9, 11] window.
        (amplitude - self.center).abs() <= self.halfwidth + 1e-9
    }
}

/// Non-outlier profiles matching `label` whose amplitude falls in `window`.
pub fn select<'a>(
    dataset: &'a SaccadeDataset,
    label: &CategoryLabel,
    window: AmplitudeWindow,
) -> Vec<&'a SaccadeProfile> {
    select_from(dataset.profiles(), label, window)
}

pub fn select_from<'a>(
    profiles: &'a [SaccadeProfile],
    label: &CategoryLabel,
    window: AmplitudeWindow,
) -> Vec<&'a SaccadeProfile> {
    profiles.iter().filter(|p| !p.outlier && label.matches(&p.category) && window.contains(p.amplitude())).collect()
}

/// Per-timestamp mean and population standard deviation.
///
/// Profiles that end early contribute their amplitude at later timestamps.
/// The result ends at the mean endpoint time, where the mean equals the mean
/// amplitude.
pub fn mean_profile<P: AsRef<SaccadeProfile>>(profiles: &[P]) -> Result<MeanProfile> {
    let first = profiles.first().ok_or(Error::EmptyInput("mean profile needs at least one profile"))?.as_ref();
    let dt = first.dt();
    for p in profiles {
        if (p.as_ref().dt() - dt).abs() > 1e-12 {
            return Err(Error::IntervalMismatch(p.as_ref().dt(), dt));
        }
    }
    let k = profiles.len() as f64;
    let mean_end = profiles.iter().map(|p| p.as_ref().duration()).sum::<f64>() / k;
    let last = ((mean_end / dt).round() as usize).max(1);

    let mut mean = Vec::with_capacity(last + 1);
    let mut std = Vec::with_capacity(last + 1);
    let mut count = Vec::with_capacity(last + 1);
    for l in 0..=last {
        let column = profiles.iter().map(|p| held(p.as_ref().displacement(), l));
        let (m, s) = mean_std(column, k);
        mean.push(m);
        std.push(s);
        count.push(profiles.iter().filter(|p| p.as_ref().len() > l).count().max(1) as u32);
    }
    let (amp_mean, amp_std) = mean_std(profiles.iter().map(|p| p.as_ref().amplitude()), k);
    mean[last] = amp_mean;
    std[last] = amp_std;
    mean[0] = 0.0;
    MeanProfile::new(dt, mean, std, count, profiles.len(), first.category.clone())
}

fn mean_std(values: impl Iterator<Item = f64> + Clone, n: f64) -> (f64, f64) {
    let m = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    (m, var.max(0.0).sqrt())
}

/// Envelope area between the mean profiles, normalized per timestamp by the
/// largest standard deviation.
pub fn dissimilarity(means: &[MeanProfile]) -> Result<f64> {
    if means.len() < 2 {
        return Err(Error::EmptyInput("dissimilarity needs at least two mean profiles"));
    }
    let dt = means[0].dt();
    if let Some(m) = means.iter().find(|m| (m.dt() - dt).abs() > 1e-12) {
        return Err(Error::IntervalMismatch(m.dt(), dt));
    }
    let n = means.iter().map(|m| m.len()).min().expect("non-empty");
    let mut total = 0.0;
    for l in 0..n {
        let (mut lo, mut hi, mut sigma) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        for m in means {
            lo = lo.min(m.mean()[l]);
            hi = hi.max(m.mean()[l]);
            sigma = sigma.max(m.std()[l]);
        }
        let width = hi - lo;
        if width == 0.0 {
            continue;
        }
        if sigma == 0.0 {
            return Err(Error::DegenerateVariance { index: l, width });
        }
        total += width / sigma;
    }
    Ok(total)
}

/// Mean profile of every category of `factor` present in the dataset, using
/// profiles inside `window`. Categories with no profiles in the window are skipped.
pub fn category_means(dataset: &SaccadeDataset, factor: Factor, window: AmplitudeWindow) -> Result<Vec<MeanProfile>> {
    let labels: BTreeSet<CategoryLabel> =
        dataset.profiles().iter().filter(|p| p.category.factor() == factor).map(|p| p.category.clone()).collect();
    let labels: Vec<CategoryLabel> =
        if factor == Factor::None { vec![CategoryLabel::none()] } else { labels.into_iter().collect() };
    let mut out = Vec::new();
    for label in labels {
        let chosen = select(dataset, &label, window);
        if chosen.is_empty() {
            continue;
        }
        let mut m = mean_profile(&chosen)?;
        m.category = label;
        out.push(m);
    }
    Ok(out)
}
