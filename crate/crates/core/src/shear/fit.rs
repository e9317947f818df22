//! Λ: the shear factor that best maps one profile onto another.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::held;
use crate::shear::transform::{feasible_range, shear_values, Interpolation};
use crate::types::Curve;

/// Number of points of the coarse scan that brackets the minimum.
const COARSE_POINTS: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShearFitParams {
    /// Width of the final bracket around the minimizer.
    pub tolerance: f64,
    pub interpolation: Interpolation,
}

impl Default for ShearFitParams {
    fn default() -> Self {
        Self { tolerance: 1e-7, interpolation: Interpolation::default() }
    }
}

impl ShearFitParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!("shear tolerance must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShearFit {
    pub lambda: f64,
    /// Σ|d* − d²| at `lambda`.
    pub objective: f64,
    /// Set when the objective did not vary over the searched interval; `lambda` is then 0.
    pub flat: bool,
}

/// Σ_l |Ψ(source, λ)_l − target_l| over the union of both supports, holding
/// the shorter curve at its final value.
pub fn shear_objective<A: Curve + ?Sized, B: Curve + ?Sized>(
    source: &A,
    target: &B,
    lambda: f64,
    interp: Interpolation,
) -> Result<f64> {
    let sheared = shear_values(source.values(), source.dt(), lambda, interp)?;
    Ok(l1_distance(&sheared, target.values()))
}

fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n).map(|i| (held(a, i) - held(b, i)).abs()).sum()
}

/// Finds λ ∈ [-1, 1] minimizing the shear objective.
///
/// A coarse scan over the feasible interval locates the best bracket, which
/// golden-section search then narrows to `tolerance`.
pub fn fit_shear<A: Curve + ?Sized, B: Curve + ?Sized>(source: &A, target: &B) -> Result<ShearFit> {
    fit_shear_with(source, target, ShearFitParams::default())
}

pub fn fit_shear_with<A: Curve + ?Sized, B: Curve + ?Sized>(
    source: &A,
    target: &B,
    params: ShearFitParams,
) -> Result<ShearFit> {
    if (source.dt() - target.dt()).abs() > 1e-12 {
        return Err(Error::IntervalMismatch(source.dt(), target.dt()));
    }
    if source.values().first() != Some(&0.0) || target.values().first() != Some(&0.0) {
        return Err(Error::InvalidProfile("both curves must start at the origin".into()));
    }
    let f = |lambda: f64| -> Result<f64> {
        let v = shear_objective(source, target, lambda, params.interpolation)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteObjective)
        }
    };

    let (lo, hi) = feasible_range(source);
    let step = (hi - lo) / (COARSE_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..COARSE_POINTS).map(|i| lo + step * i as f64).collect();
    let values = grid.iter().map(|&l| f(l)).collect::<Result<Vec<_>>>()?;

    let (vmin, vmax) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if vmax - vmin <= 1e-12 * vmax.max(1.0) {
        log::warn!("shear objective is flat over [{lo:.4}, {hi:.4}]; returning 0");
        return Ok(ShearFit { lambda: 0.0, objective: f(0.0_f64.clamp(lo, hi))?, flat: true });
    }

    let best = values.iter().enumerate().fold(0, |best, (i, v)| if *v < values[best] { i } else { best });
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(COARSE_POINTS - 1)];
    let (mut lambda, mut objective) = golden_section(&f, a, b, params.tolerance)?;
    if values[best] < objective {
        lambda = grid[best];
        objective = values[best];
    }
    // Prefer exact zero when it is as good, so identical curves give λ = 0.
    if lambda.abs() < params.tolerance && lo <= 0.0 && hi >= 0.0 {
        let at_zero = f(0.0)?;
        if at_zero <= objective {
            lambda = 0.0;
            objective = at_zero;
        }
    }
    Ok(ShearFit { lambda, objective, flat: false })
}

/// Golden-section minimization on [a, b]; returns the best point seen.
fn golden_section(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
            if fd < best.1 {
                best = (d, fd);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shear::transform::shear_profile;
    use crate::types::{CategoryLabel, SaccadeProfile};

    fn sigmoid(amp: f64, dur: usize) -> SaccadeProfile {
        let d = (0..=dur)
            .map(|i| {
                let x = i as f64 / dur as f64;
                amp * x * x * (3.0 - 2.0 * x)
            })
            .collect();
        SaccadeProfile::new(1.0, d, CategoryLabel::none()).unwrap()
    }

    #[test]
    fn identical_curves_give_zero() {
        let s = sigmoid(15.0, 50);
        let fit = fit_shear(&s, &s).unwrap();
        assert!(fit.lambda.abs() <= 1e-4, "{fit:?}");
        assert!(!fit.flat);
    }

    #[test]
    fn recovers_known_shear() {
        let s = sigmoid(15.0, 50);
        for lambda in [-0.5, -0.2, 0.2, 0.3, 0.5] {
            let target = shear_profile(&s, lambda).unwrap();
            let fit = fit_shear(&s, &target).unwrap();
            assert!((fit.lambda - lambda).abs() <= 1e-3, "λ={lambda}: {fit:?}");
        }
    }

    #[test]
    fn sign_follows_dilation() {
        // Oracle: brute-force scan of the objective at 1e-3 resolution.
        let s = sigmoid(12.0, 40);
        for (target, positive) in [(sigmoid(12.0, 48), true), (sigmoid(12.0, 34), false)] {
            let (lo, hi) = feasible_range(&s);
            let mut best = (f64::INFINITY, 0.0);
            let mut l = -1.0;
            while l <= 1.0 {
                if l > lo && l < hi {
                    let v = shear_objective(&s, &target, l, Interpolation::CubicSpline).unwrap();
                    if v < best.0 {
                        best = (v, l);
                    }
                }
                l += 1e-3;
            }
            let fit = fit_shear(&s, &target).unwrap();
            assert_eq!(fit.lambda > 0.0, positive);
            assert_eq!(best.1 > 0.0, positive);
            assert!((fit.lambda - best.1).abs() < 2e-3);
            assert!(fit.objective <= best.0 + 1e-9);
        }
    }

    #[test]
    fn flat_objective_reports_zero() {
        // Displacements too small for any λ to move a sample.
        let s = SaccadeProfile::new(1.0, vec![0.0, 1e-300], CategoryLabel::none()).unwrap();
        let fit = fit_shear(&s, &s).unwrap();
        assert!(fit.flat);
        assert_eq!(fit.lambda, 0.0);
    }

    #[test]
    fn mismatched_intervals_fail() {
        let a = sigmoid(10.0, 20);
        let b = SaccadeProfile::new(0.5, a.displacement().to_vec(), CategoryLabel::none()).unwrap();
        assert!(matches!(fit_shear(&a, &b), Err(Error::IntervalMismatch(..))));
    }
}
