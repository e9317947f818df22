//! The shear Ψ: every sample (t, d) moves to (t + λ·d, d), then the curve is
//! resampled back onto the original time grid.
//!
//! Time is in ms and displacement in degrees, so λ = 0.5 delays a sample at
//! 10° by 5 ms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{CubicSpline, Linear};
use crate::types::{Curve, MeanProfile, SaccadeProfile};

/// How sheared samples are resampled back onto the uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Piecewise linear. Composing two shears drifts by a few hundredths of a
    /// degree on fast profiles.
    Linear,
    /// Natural cubic spline through the sheared samples.
    #[default]
    CubicSpline,
}

pub fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.abs() <= 1.0) {
        return Err(Error::InvalidParameter(format!("shear factor must lie in [-1, 1], got {lambda}")));
    }
    Ok(())
}

/// Sheared sample times; fails if they stop increasing strictly.
fn sheared_times(values: &[f64], dt: f64, lambda: f64) -> Result<Vec<f64>> {
    let times: Vec<f64> = values.iter().enumerate().map(|(k, d)| k as f64 * dt + lambda * d).collect();
    if let Some(k) = times.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NonInvertibleShear { lambda, index: k + 1 });
    }
    Ok(times)
}

/// Output grid: 0, dt, ... up to the first grid point at or beyond the sheared
/// end time. Points past the end are clamped to it, so the final value is the
/// amplitude.
fn output_grid(end: f64, dt: f64) -> impl Iterator<Item = f64> {
    let n = ((end / dt) - 1e-9).ceil().max(1.0) as usize;
    (0..=n).map(move |l| (l as f64 * dt).min(end))
}

/// Shears a uniformly sampled curve. `λ = 0` returns the input unchanged.
pub fn shear_values(values: &[f64], dt: f64, lambda: f64, interp: Interpolation) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    if values.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: values.len() });
    }
    if lambda == 0.0 {
        return Ok(values.to_vec());
    }
    let times = sheared_times(values, dt, lambda)?;
    let end = times[times.len() - 1];
    let out = match interp {
        Interpolation::CubicSpline => {
            let spline = CubicSpline::natural(&times, values)?;
            output_grid(end, dt).map(|t| spline.eval(t)).collect()
        }
        Interpolation::Linear => {
            let lin = Linear::new(&times, values)?;
            output_grid(end, dt).map(|t| lin.eval(t)).collect()
        }
    };
    Ok(out)
}

/// Ψ(S, λ) for a profile. Category, outlier flag and pre-anchor context are kept.
pub fn shear_profile(profile: &SaccadeProfile, lambda: f64) -> Result<SaccadeProfile> {
    shear_profile_with(profile, lambda, Interpolation::default())
}

pub fn shear_profile_with(profile: &SaccadeProfile, lambda: f64, interp: Interpolation) -> Result<SaccadeProfile> {
    let mut d = shear_values(profile.displacement(), profile.dt(), lambda, interp)?;
    d[0] = 0.0;
    let mut out = SaccadeProfile::with_lead(profile.dt(), d, profile.lead().to_vec(), profile.category.clone())?;
    out.outlier = profile.outlier;
    Ok(out)
}

/// Ψ(S, λ) for a mean profile. The mean is sheared like a profile; standard
/// deviations follow the same time mapping (linearly) and counts are taken
/// from the nearest sheared sample.
pub fn shear_mean(mean: &MeanProfile, lambda: f64) -> Result<MeanProfile> {
    let dt = mean.dt();
    let mut d = shear_values(mean.mean(), dt, lambda, Interpolation::default())?;
    d[0] = 0.0;
    if lambda == 0.0 {
        return Ok(mean.clone());
    }
    let times = sheared_times(mean.mean(), dt, lambda)?;
    let end = times[times.len() - 1];
    let sigma = Linear::new(&times, mean.std())?;
    let grid: Vec<f64> = output_grid(end, dt).collect();
    let std = grid.iter().map(|&t| sigma.eval(t).max(0.0)).collect();
    let count = grid
        .iter()
        .map(|&t| {
            let k = times.partition_point(|&v| v <= t).clamp(1, times.len() - 1);
            let nearest = if t - times[k - 1] <= times[k] - t { k - 1 } else { k };
            mean.counts()[nearest]
        })
        .collect();
    MeanProfile::new(dt, d, std, count, mean.source_count, mean.category.clone())
}

/// Range of λ (within [-1, 1]) for which Ψ keeps the curve's times increasing.
pub fn feasible_range<C: Curve + ?Sized>(curve: &C) -> (f64, f64) {
    let dt = curve.dt();
    let (mut rise, mut fall) = (0.0f64, 0.0f64);
    for w in curve.values().windows(2) {
        let step = w[1] - w[0];
        rise = rise.max(step);
        fall = fall.max(-step);
    }
    // Stay a hair inside the bound so the spline knots never coincide.
    let margin = 1.0 - 1e-6;
    let lo = if rise > 0.0 { (-dt / rise * margin).max(-1.0) } else { -1.0 };
    let hi = if fall > 0.0 { (dt / fall * margin).min(1.0) } else { 1.0 };
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::CategoryLabel;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Smootherstep: zero first and second derivatives at both ends.
    fn smooth(amp: f64, len: usize) -> Vec<f64> {
        let n = (len - 1) as f64;
        (0..len)
            .map(|i| {
                let x = i as f64 / n;
                amp * x * x * x * (x * (6.0 * x - 15.0) + 10.0)
            })
            .collect()
    }

    #[test]
    fn zero_shear_is_identity() {
        let d = smooth(12.0, 60);
        let p = SaccadeProfile::new(1.0, d.clone(), CategoryLabel::none()).unwrap();
        assert_eq!(shear_profile(&p, 0.0).unwrap(), p);
        for interp in [Interpolation::Linear, Interpolation::CubicSpline] {
            assert_eq!(shear_values(&d, 1.0, 0.0, interp).unwrap(), d);
        }
    }

    #[test]
    fn line_shear_has_closed_form() {
        let d: Vec<f64> = (0..=30).map(|i| i as f64).collect();
        for interp in [Interpolation::Linear, Interpolation::CubicSpline] {
            let out = shear_values(&d, 1.0, 0.5, interp).unwrap();
            assert_eq!(out.len(), 46);
            for (l, v) in out.iter().enumerate() {
                assert_abs_diff_eq!(*v, l as f64 / 1.5, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn folding_times_are_rejected() {
        let d = [0.0, 0.5, 3.0, 3.5];
        assert!(matches!(
            shear_values(&d, 1.0, -0.5, Interpolation::CubicSpline),
            Err(Error::NonInvertibleShear { index: 2, .. })
        ));
        assert!(shear_values(&d, 1.0, 1.5, Interpolation::CubicSpline).is_err());
        let (lo, hi) = feasible_range(&SaccadeProfile::new(1.0, d.to_vec(), CategoryLabel::none()).unwrap());
        assert!((lo + 0.4).abs() < 1e-6 && hi == 1.0);
    }

    #[test]
    fn mean_shear_carries_statistics() {
        let m = MeanProfile::new(
            1.0,
            (0..=20).map(|i| i as f64 * 0.5).collect(),
            (0..=20).map(|i| i as f64 * 0.1).collect(),
            (0..=20).map(|i| 30 - i as u32).collect(),
            30,
            CategoryLabel::vertical(),
        )
        .unwrap();
        let s = shear_mean(&m, 1.0).unwrap();
        // Times stretch by 1.5 along d = t/2.
        assert_eq!(s.len(), 31);
        assert_abs_diff_eq!(s.mean()[15], 5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.std()[15], 1.0, epsilon = 1e-9);
        assert_eq!(s.counts()[15], 20);
        assert_eq!(s.source_count, 30);
        assert_eq!(s.amplitude(), m.amplitude());
    }

    proptest! {
        #[test]
        fn shear_keeps_amplitude(amp in 1.0f64..40.0, len in 20usize..120, lambda in -0.4f64..1.0) {
            let d = smooth(amp, len);
            let p = SaccadeProfile::new(1.0, d, CategoryLabel::none()).unwrap();
            let (lo, _) = feasible_range(&p);
            prop_assume!(lambda > lo);
            let s = shear_profile(&p, lambda).unwrap();
            prop_assert!((s.amplitude() - amp).abs() <= 1e-6);
            prop_assert_eq!(s.displacement()[0], 0.0);
        }

        #[test]
        fn shears_compose_additively(amp in 5.0f64..40.0, len in 40usize..120, l in -0.4f64..0.4, m in -0.4f64..0.4) {
            let d = smooth(amp, len);
            let (lo, _) = feasible_range(&SaccadeProfile::new(1.0, d.clone(), CategoryLabel::none()).unwrap());
            // Keep every sheared step at least half a sample apart.
            prop_assume!(l > lo / 2.0 && l + m > lo / 2.0);
            let once = shear_values(&d, 1.0, l, Interpolation::CubicSpline).unwrap();
            prop_assume!(m > feasible_range(&SaccadeProfile::new(1.0, once.clone(), CategoryLabel::none()).unwrap()).0 / 2.0);
            let twice = shear_values(&once, 1.0, m, Interpolation::CubicSpline).unwrap();
            let direct = shear_values(&d, 1.0, l + m, Interpolation::CubicSpline).unwrap();
            let n = twice.len().max(direct.len());
            for i in 0..n {
                let a = crate::interp::held(&twice, i);
                let b = crate::interp::held(&direct, i);
                prop_assert!((a - b).abs() <= 1e-3, "index {} differs: {} vs {}", i, a, b);
            }
        }
    }
}
