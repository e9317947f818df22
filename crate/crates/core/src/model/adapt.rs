//! Adapting a model to a target category: shear the data it is built from,
//! or shear the model's own rows.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::denoise::{denoise_values, DenoiseParams};
use crate::model::{ModelParams, PredictionModel};
use crate::profiles::{mean_profile, select_from, AmplitudeWindow};
use crate::shear::{
    feasible_range, fit_shear_curve, fit_shear_with, shear_profile, shear_values, Interpolation, ShearCurve,
    ShearFitParams, ShearPoint,
};
use crate::types::{CategoryLabel, MeanProfile, SaccadeDataset, SaccadeProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptParams {
    /// Amplitude grid and window used to pair source and target means.
    pub model: ModelParams,
    pub denoise: DenoiseParams,
    pub fit: ShearFitParams,
    /// Fewest target saccades for an amplitude to contribute a shear point.
    pub min_target_count: usize,
}

impl Default for AdaptParams {
    fn default() -> Self {
        Self {
            model: ModelParams::default(),
            denoise: DenoiseParams::default(),
            fit: ShearFitParams::default(),
            min_target_count: 1,
        }
    }
}

/// A target mean profile and the amplitude it stands for.
#[derive(Debug, Clone, PartialEq)]
pub struct ShearTarget {
    pub alpha: f64,
    pub profile: MeanProfile,
}

impl ShearTarget {
    /// Uses the mean's own amplitude as its position on the amplitude axis.
    pub fn from_mean(profile: MeanProfile) -> Self {
        Self { alpha: profile.amplitude(), profile }
    }
}

/// Target means on the amplitude grid from a calibration sample: one per grid
/// amplitude whose window holds at least `min_count` profiles.
pub fn targets_from_sample(
    sample: &[SaccadeProfile],
    params: &ModelParams,
    min_count: usize,
) -> Result<Vec<ShearTarget>> {
    params.validate()?;
    let mut out = Vec::new();
    for alpha in params.grid() {
        let window = AmplitudeWindow { center: alpha, halfwidth: params.halfwidth };
        let chosen = select_from(sample, &CategoryLabel::none(), window);
        if !chosen.is_empty() && chosen.len() >= min_count {
            out.push(ShearTarget { alpha, profile: mean_profile(&chosen)? });
        }
    }
    Ok(out)
}

/// Clamps λ into the range where shearing `values` stays invertible.
fn feasible_lambda(values: &[f64], dt: f64, lambda: f64) -> f64 {
    let probe = SaccadeProfile::new(dt, values.to_vec(), CategoryLabel::none());
    let Ok(probe) = probe else { return lambda };
    let (lo, hi) = feasible_range(&probe);
    if lambda < lo || lambda > hi {
        log::warn!("shear factor {lambda:.4} outside the invertible range [{lo:.4}, {hi:.4}]; clamped");
    }
    lambda.clamp(lo, hi)
}

/// Shears the model's rows toward the targets.
///
/// Rows and targets are denoised alike to fit one shear factor per target
/// amplitude, a line f(α) is fitted through those factors (weighted by target
/// size), and each original row is sheared by f at its amplitude. Returns the new model and
/// the fitted curve.
pub fn model_shear(
    model: &PredictionModel,
    targets: &[ShearTarget],
    params: &AdaptParams,
) -> Result<(PredictionModel, ShearCurve)> {
    let (lo, hi) = (model.alpha_min(), model.alpha_max());
    let usable: Vec<&ShearTarget> = targets.iter().filter(|t| t.alpha >= lo - 1e-9 && t.alpha <= hi + 1e-9).collect();
    if usable.len() < targets.len() {
        log::warn!(
            "{} targets lie outside the model range {lo}..{hi} deg and are ignored",
            targets.len() - usable.len()
        );
    }
    let denoised: Vec<Vec<f64>> = model.rows().iter().map(|r| denoise_values(r, params.denoise)).collect();
    let dt = model.dt();

    let points = usable
        .par_iter()
        .map(|target| {
            let pos = ((target.alpha - lo) / model.alpha_step()).clamp(0.0, (model.row_count() - 1) as f64);
            let i0 = (pos.floor() as usize).min(model.row_count() - 1);
            let i1 = (i0 + 1).min(model.row_count() - 1);
            let w = pos - i0 as f64;
            let row: Vec<f64> = denoised[i0].iter().zip(&denoised[i1]).map(|(a, b)| (1.0 - w) * a + w * b).collect();
            let recovered = SaccadeProfile::new(dt, row, CategoryLabel::none())?;
            let smoothed =
                SaccadeProfile::new(dt, denoise_values(target.profile.mean(), params.denoise), CategoryLabel::none())?;
            let fit = fit_shear_with(&recovered, &smoothed, params.fit)?;
            Ok(ShearPoint { alpha: target.alpha, lambda: fit.lambda, count: target.profile.source_count.max(1) })
        })
        .collect::<Result<Vec<_>>>()?;
    let curve = fit_shear_curve(&points)?;

    let mut rows = Vec::with_capacity(model.row_count());
    let mut durations = Vec::with_capacity(model.row_count());
    for (i, row) in model.rows().iter().enumerate() {
        let lambda = feasible_lambda(row, dt, curve.eval(model.alpha(i)));
        let duration = model.durations()[i];
        let end_value = model.value(i, duration);
        rows.push(shear_values(row, dt, lambda, Interpolation::CubicSpline)?);
        durations.push((duration + lambda * end_value).max(dt));
    }
    let adapted = PredictionModel::from_rows(dt, lo, model.alpha_step(), rows, durations)?;
    Ok((adapted, curve))
}

/// One shear point per grid amplitude holding both dataset and target
/// profiles: Λ from the mean of all dataset profiles in the window to the
/// target mean, weighted by the number of target profiles.
pub fn data_shear_points(
    dataset: &SaccadeDataset,
    targets: &[SaccadeProfile],
    params: &AdaptParams,
) -> Result<Vec<ShearPoint>> {
    params.model.validate()?;
    let any = CategoryLabel::none();
    let points = params
        .model
        .grid()
        .par_iter()
        .map(|&alpha| {
            let window = AmplitudeWindow { center: alpha, halfwidth: params.model.halfwidth };
            let target = select_from(targets, &any, window);
            let all = select_from(dataset.profiles(), &any, window);
            if target.is_empty() || target.len() < params.min_target_count || all.is_empty() {
                return Ok(None);
            }
            let fit = fit_shear_with(&mean_profile(&all)?, &mean_profile(&target)?, params.fit)?;
            Ok(Some(ShearPoint { alpha, lambda: fit.lambda, count: target.len() }))
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<ShearPoint> = points.into_iter().flatten().collect();
    if points.is_empty() {
        return Err(Error::DegenerateFit("no amplitude holds both dataset and target profiles".into()));
    }
    Ok(points)
}

/// One shear point per target mean, fitted against the original mean nearest
/// in amplitude. Targets with no original within `max_distance` degrees are
/// skipped. The point sits at the original's amplitude and is weighted by the
/// number of profiles behind the target.
pub fn mean_shear_points(
    original: &[MeanProfile],
    targets: &[MeanProfile],
    max_distance: f64,
    fit: ShearFitParams,
) -> Result<Vec<ShearPoint>> {
    if original.is_empty() || targets.is_empty() {
        return Err(Error::EmptyInput("shear points need original and target means"));
    }
    let mut points = Vec::new();
    for target in targets {
        let nearest = original
            .iter()
            .min_by(|a, b| {
                let da = (a.amplitude() - target.amplitude()).abs();
                let db = (b.amplitude() - target.amplitude()).abs();
                da.total_cmp(&db)
            })
            .expect("non-empty");
        if (nearest.amplitude() - target.amplitude()).abs() > max_distance {
            log::warn!("no original mean near amplitude {:.2}; target skipped", target.amplitude());
            continue;
        }
        let lambda = fit_shear_with(nearest, target, fit)?.lambda;
        points.push(ShearPoint { alpha: nearest.amplitude(), lambda, count: target.source_count.max(1) });
    }
    if points.is_empty() {
        return Err(Error::DegenerateFit("no target mean pairs with an original mean".into()));
    }
    Ok(points)
}

/// Shears every profile of `dataset` toward the profiles in `targets`.
///
/// The line f(α) fitted through [`data_shear_points`] is applied to each
/// profile at its own amplitude. Labels are kept.
pub fn data_shear_with_targets(
    dataset: &SaccadeDataset,
    targets: &[SaccadeProfile],
    params: &AdaptParams,
) -> Result<(SaccadeDataset, ShearCurve)> {
    let points = data_shear_points(dataset, targets, params)?;
    let curve = fit_shear_curve(&points)?;
    let sheared = dataset
        .profiles()
        .par_iter()
        .map(|p| {
            let lambda = feasible_lambda(p.displacement(), p.dt(), curve.eval(p.amplitude()));
            shear_profile(p, lambda)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((SaccadeDataset::from_profiles(dataset.metadata.clone(), sheared)?, curve))
}

/// Data shear toward the dataset's own profiles carrying `target_label`.
pub fn data_shear(
    dataset: &SaccadeDataset,
    target_label: &CategoryLabel,
    params: &AdaptParams,
) -> Result<(SaccadeDataset, ShearCurve)> {
    let targets: Vec<SaccadeProfile> =
        dataset.profiles().iter().filter(|p| !p.outlier && target_label.matches(&p.category)).cloned().collect();
    if targets.is_empty() {
        return Err(Error::EmptyInput("no profiles carry the target label"));
    }
    data_shear_with_targets(dataset, &targets, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::DatasetMetadata;

    fn ramp(amp: f64, dur: f64) -> Vec<f64> {
        let n = dur.ceil() as usize;
        (0..=n)
            .map(|i| {
                let x = (i as f64 / dur).min(1.0);
                amp * x * x * (3.0 - 2.0 * x)
            })
            .collect()
    }

    fn profile(amp: f64, gamma: f64, label: CategoryLabel) -> SaccadeProfile {
        SaccadeProfile::new(1.0, ramp(amp, gamma * (2.2 * amp + 21.0)), label).unwrap()
    }

    fn corpus() -> SaccadeDataset {
        let mut profiles = Vec::new();
        for a in 5..=30 {
            for k in 0..3 {
                let amp = a as f64 + 0.3 * k as f64 - 0.3;
                profiles.push(profile(amp, 1.0, CategoryLabel::horizontal()));
                profiles.push(profile(amp, 1.1, CategoryLabel::vertical()));
            }
        }
        SaccadeDataset::from_profiles(DatasetMetadata::default(), profiles).unwrap()
    }

    fn params() -> AdaptParams {
        AdaptParams {
            model: ModelParams { alpha_max: 30.0, min_bin_count: 1, ..ModelParams::default() },
            ..AdaptParams::default()
        }
    }

    #[test]
    fn data_shear_toward_everything_is_identity() {
        let ds = corpus();
        let (out, curve) = data_shear(&ds, &CategoryLabel::none(), &params()).unwrap();
        assert!(curve.points.iter().all(|p| p.lambda.abs() < 1e-4), "{curve:?}");
        for (a, b) in ds.profiles().iter().zip(out.profiles()) {
            assert!((a.amplitude() - b.amplitude()).abs() <= 1e-6);
            assert_eq!(a.category, b.category);
        }
    }

    #[test]
    fn data_shear_slows_toward_dilated_targets() {
        let ds = corpus();
        let (out, curve) = data_shear(&ds, &CategoryLabel::vertical(), &params()).unwrap();
        assert!(curve.points.iter().all(|p| p.lambda > 0.0));
        for (a, b) in ds.profiles().iter().zip(out.profiles()) {
            assert!((a.amplitude() - b.amplitude()).abs() <= 1e-6);
        }
    }

    #[test]
    fn model_shear_with_own_rows_is_identity() {
        let model = PredictionModel::build(&corpus(), &params().model).unwrap();
        let targets: Vec<ShearTarget> = model
            .recover_profiles()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let n = p.len();
                let mean = MeanProfile::new(
                    p.dt(),
                    p.displacement().to_vec(),
                    vec![0.0; n],
                    vec![1; n],
                    1,
                    CategoryLabel::none(),
                )
                .unwrap();
                ShearTarget { alpha: model.alpha(i), profile: mean }
            })
            .collect();
        let (out, curve) = model_shear(&model, &targets, &params()).unwrap();
        for alpha in model.alphas() {
            assert!(curve.eval(alpha).abs() <= 1e-3, "f({alpha}) = {}", curve.eval(alpha));
        }
        assert_eq!(out.row_count(), model.row_count());
        for (a, b) in out.rows().iter().zip(model.rows()) {
            let worst = (0..a.len().max(b.len()))
                .map(|t| (crate::interp::held(a, t) - crate::interp::held(b, t)).abs())
                .fold(0.0, f64::max);
            assert!(worst <= 1e-3, "row differs by {worst}");
        }
    }

    #[test]
    fn model_shear_needs_two_amplitudes() {
        let model = PredictionModel::build(&corpus(), &params().model).unwrap();
        let sample = vec![profile(10.0, 1.1, CategoryLabel::vertical()); 3];
        let targets = vec![ShearTarget::from_mean(mean_profile(&sample).unwrap())];
        assert!(matches!(model_shear(&model, &targets, &params()), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn mean_shear_points_pair_by_amplitude() {
        let means = |gamma: f64| -> Vec<MeanProfile> {
            [10.0, 20.0]
                .iter()
                .map(|&a| mean_profile(&vec![profile(a, gamma, CategoryLabel::none()); 4]).unwrap())
                .collect()
        };
        let fit = ShearFitParams::default();
        let same = mean_shear_points(&means(1.0), &means(1.0), 1.0, fit).unwrap();
        assert_eq!(same.len(), 2);
        assert!(same.iter().all(|p| p.lambda.abs() < 1e-6 && p.count == 4));
        let slow = mean_shear_points(&means(1.0), &means(1.1), 1.0, fit).unwrap();
        assert_eq!(slow.iter().map(|p| p.alpha).collect::<Vec<_>>(), vec![10.0, 20.0]);
        assert!(slow.iter().all(|p| p.lambda > 0.0));
        let far = vec![mean_profile(&[profile(40.0, 1.0, CategoryLabel::none())]).unwrap()];
        assert!(matches!(mean_shear_points(&means(1.0), &far, 1.0, fit), Err(Error::DegenerateFit(_))));
    }
}
