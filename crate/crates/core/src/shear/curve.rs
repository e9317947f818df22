//! The amplitude-dependent shear curve f(α) = a·α + b.
//!
//! Fitted under the count-weighted L1 objective Σ |f(αᵢ) − λᵢ| / nᵢ, where nᵢ
//! is the number of target saccades behind λᵢ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShearPoint {
    pub alpha: f64,
    pub lambda: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShearCurve {
    pub a: f64,
    pub b: f64,
    pub points: Vec<ShearPoint>,
}

impl ShearCurve {
    /// The zero curve, under which every shear is the identity.
    pub fn identity() -> Self {
        Self { a: 0.0, b: 0.0, points: Vec::new() }
    }

    /// f(α), clamped to [-1, 1].
    pub fn eval(&self, alpha: f64) -> f64 {
        (self.a * alpha + self.b).clamp(-1.0, 1.0)
    }

    pub fn objective(&self) -> f64 {
        l1_objective(&self.points, self.a, self.b)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveFitParams {
    /// Convergence tolerance on (a, b) between IRLS iterations.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CurveFitParams {
    fn default() -> Self {
        Self { tolerance: 1e-6, max_iterations: 500 }
    }
}

/// Σ |a·αᵢ + b − λᵢ| / nᵢ.
pub fn l1_objective(points: &[ShearPoint], a: f64, b: f64) -> f64 {
    points.iter().map(|p| (a * p.alpha + b - p.lambda).abs() / p.count as f64).sum()
}

pub fn fit_shear_curve(points: &[ShearPoint]) -> Result<ShearCurve> {
    fit_shear_curve_with(points, CurveFitParams::default())
}

/// Weighted L1 line fit.
///
/// Iteratively reweighted least squares gives a starting line. Since an L1
/// optimum passes through two of the points, the result is then polished by
/// trying the lines through pairs of points and keeping the best.
pub fn fit_shear_curve_with(points: &[ShearPoint], params: CurveFitParams) -> Result<ShearCurve> {
    validate(points)?;
    let (a0, b0, converged) = irls(points, params);
    let (mut a, mut b) = (a0, b0);
    if !converged {
        log::warn!("IRLS did not converge in {} iterations; refining by grid search", params.max_iterations);
        (a, b) = grid_search(points, a, b);
    }
    let mut best = l1_objective(points, a, b);

    let candidates: Vec<usize> = if points.len() <= 64 {
        (0..points.len()).collect()
    } else {
        // Only lines through the points nearest the current fit are plausible.
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&i, &j| {
            let r = |k: usize| (a * points[k].alpha + b - points[k].lambda).abs();
            r(i).total_cmp(&r(j)).then(i.cmp(&j))
        });
        order.truncate(12);
        order.sort_unstable();
        order
    };
    for (x, &i) in candidates.iter().enumerate() {
        for &j in &candidates[x + 1..] {
            let (p, q) = (points[i], points[j]);
            if p.alpha == q.alpha {
                continue;
            }
            let slope = (q.lambda - p.lambda) / (q.alpha - p.alpha);
            let icpt = p.lambda - slope * p.alpha;
            let obj = l1_objective(points, slope, icpt);
            if obj < best - 1e-15 {
                (a, b, best) = (slope, icpt, obj);
            }
        }
    }
    Ok(ShearCurve { a, b, points: points.to_vec() })
}

fn validate(points: &[ShearPoint]) -> Result<()> {
    if let Some(p) = points.iter().find(|p| !p.alpha.is_finite() || !p.lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite shear point {p:?}")));
    }
    if points.iter().any(|p| p.count == 0) {
        return Err(Error::InvalidParameter("shear point with zero saccades".into()));
    }
    let first = points.first().ok_or_else(|| Error::DegenerateFit("no shear points".into()))?;
    if points.iter().all(|p| p.alpha == first.alpha) {
        return Err(Error::DegenerateFit(format!(
            "all {} points share amplitude {}; a line needs two distinct amplitudes",
            points.len(),
            first.alpha
        )));
    }
    Ok(())
}

/// Weighted least squares line for weights `w`.
fn wls(points: &[ShearPoint], w: &[f64]) -> Option<(f64, f64)> {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, &wi) in points.iter().zip(w) {
        sw += wi;
        sx += wi * p.alpha;
        sy += wi * p.lambda;
        sxx += wi * p.alpha * p.alpha;
        sxy += wi * p.alpha * p.lambda;
    }
    let det = sw * sxx - sx * sx;
    if !(det.abs() > 1e-300) {
        return None;
    }
    let a = (sw * sxy - sx * sy) / det;
    let b = (sy - a * sx) / sw;
    (a.is_finite() && b.is_finite()).then_some((a, b))
}

fn irls(points: &[ShearPoint], params: CurveFitParams) -> (f64, f64, bool) {
    let base: Vec<f64> = points.iter().map(|p| 1.0 / p.count as f64).collect();
    let Some((mut a, mut b)) = wls(points, &base) else {
        return (0.0, 0.0, false);
    };
    for _ in 0..params.max_iterations {
        let w: Vec<f64> =
            points.iter().zip(&base).map(|(p, wi)| wi / (a * p.alpha + b - p.lambda).abs().max(1e-9)).collect();
        let Some((na, nb)) = wls(points, &w) else {
            return (a, b, false);
        };
        let change = (na - a).abs().max((nb - b).abs());
        (a, b) = (na, nb);
        if change < params.tolerance {
            return (a, b, true);
        }
    }
    (a, b, false)
}

/// Dense search over (a, b) around a starting line, refined over a few levels.
fn grid_search(points: &[ShearPoint], a0: f64, b0: f64) -> (f64, f64) {
    let (amin, amax) =
        points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.alpha), hi.max(p.alpha)));
    let mut span_a = 2.0 / (amax - amin);
    let mut span_b = 2.0 + span_a * amax.abs().max(amin.abs());
    let (mut a, mut b) = (a0, b0);
    let mut best = l1_objective(points, a, b);
    for _ in 0..12 {
        let (ca, cb) = (a, b);
        for i in -20..=20 {
            for j in -20..=20 {
                let ta = ca + span_a * i as f64 / 20.0;
                let tb = cb + span_b * j as f64 / 20.0;
                let obj = l1_objective(points, ta, tb);
                if obj < best {
                    (a, b, best) = (ta, tb, obj);
                }
            }
        }
        span_a /= 10.0;
        span_b /= 10.0;
    }
    (a, b)
}
