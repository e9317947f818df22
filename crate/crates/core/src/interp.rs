//! Interpolation primitives over strictly increasing knots.

use crate::error::{Error, Result};

/// Linear interpolation on a uniform grid, holding the end values outside it.
pub fn sample_held(values: &[f64], dt: f64, t: f64) -> f64 {
    debug_assert!(!values.is_empty());
    if t <= 0.0 {
        return values[0];
    }
    let pos = t / dt;
    let i = pos.floor() as usize;
    if i + 1 >= values.len() {
        return values[values.len() - 1];
    }
    let frac = pos - i as f64;
    values[i] + frac * (values[i + 1] - values[i])
}

/// Value at index `i`, holding the last value past the end.
#[inline]
pub fn held(values: &[f64], i: usize) -> f64 {
    values[i.min(values.len() - 1)]
}

fn check_knots(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidParameter("knot arrays differ in length".into()));
    }
    if xs.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: xs.len() });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite knot".into()));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("knots are not strictly increasing".into()));
    }
    Ok(())
}

/// Piecewise-linear interpolant through strictly increasing knots.
#[derive(Debug, Clone)]
pub struct Linear<'a> {
    xs: &'a [f64],
    ys: &'a [f64],
}

impl<'a> Linear<'a> {
    pub fn new(xs: &'a [f64], ys: &'a [f64]) -> Result<Self> {
        check_knots(xs, ys)?;
        Ok(Self { xs, ys })
    }

    /// Evaluates at `x`; outside the knots the end segment is extrapolated.
    pub fn eval(&self, x: f64) -> f64 {
        let k = segment(self.xs, x);
        let (x0, x1) = (self.xs[k], self.xs[k + 1]);
        let (y0, y1) = (self.ys[k], self.ys[k + 1]);
        y0 + (x - x0) * (y1 - y0) / (x1 - x0)
    }
}

/// Natural cubic spline (zero second derivative at both ends).
#[derive(Debug, Clone)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(xs: &[f64], ys: &[f64]) -> Result<Self> {
        check_knots(xs, ys)?;
        let n = xs.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives (Thomas algorithm).
            let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
            let size = n - 2;
            let mut diag = vec![0.0; size];
            let mut upper = vec![0.0; size];
            let mut rhs = vec![0.0; size];
            for i in 0..size {
                let k = i + 1;
                diag[i] = 2.0 * (h[k - 1] + h[k]);
                upper[i] = h[k];
                rhs[i] = 6.0 * ((ys[k + 1] - ys[k]) / h[k] - (ys[k] - ys[k - 1]) / h[k - 1]);
            }
            for i in 1..size {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[size] = rhs[size - 1] / diag[size - 1];
            for i in (0..size - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self { xs: xs.to_vec(), ys: ys.to_vec(), m })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = segment(&self.xs, x);
        let h = self.xs[k + 1] - self.xs[k];
        let a = (self.xs[k + 1] - x) / h;
        let b = (x - self.xs[k]) / h;
        a * self.ys[k]
            + b * self.ys[k + 1]
            + ((a * a * a - a) * self.m[k] + (b * b * b - b) * self.m[k + 1]) * h * h / 6.0
    }
}

/// Index of the segment [xs[k], xs[k+1]] used to evaluate at `x`.
fn segment(xs: &[f64], x: f64) -> usize {
    let last = xs.len() - 2;
    match xs.partition_point(|&v| v <= x) {
        0 => 0,
        p => (p - 1).min(last),
    }
}

/// Linear resampling of (t, d) points onto t = 0, dt, 2dt, ... up to the last
/// original time (truncated).
pub fn resample(points: &[(f64, f64)], dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("sampling interval must be positive, got {dt}")));
    }
    if points.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: points.len() });
    }
    if points[0].0 != 0.0 {
        return Err(Error::InvalidParameter(format!("first time must be 0, got {}", points[0].0)));
    }
    let (ts, ds): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let lin = Linear::new(&ts, &ds)?;
    let last = ts[ts.len() - 1];
    // Tolerate float noise so that a point at exactly k*dt is not dropped.
    let n = (last / dt + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|l| {
            let t = l as f64 * dt;
            if l == n && (t - last).abs() <= 1e-9 * dt.max(1.0) {
                ds[ds.len() - 1]
            } else {
                lin.eval(t)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn resample_examples() {
        assert_eq!(resample(&[(0.0, 0.0), (2.0, 2.0)], 1.0).unwrap(), vec![0.0, 1.0, 2.0]);
        let out = resample(&[(0.0, 0.0), (3.0, 6.0), (5.0, 10.0)], 1.0).unwrap();
        for (a, b) in out.iter().zip([0.0, 2.0, 4.0, 6.0, 8.0, 10.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let uniform = [(0.0, 0.0), (1.0, 0.3), (2.0, 1.7), (3.0, 2.0)];
        assert_eq!(resample(&uniform, 1.0).unwrap(), vec![0.0, 0.3, 1.7, 2.0]);
        assert!(resample(&[(0.0, 0.0)], 1.0).is_err());
        assert!(resample(&[(0.0, 0.0), (2.5, 5.0)], 1.0).unwrap().len() == 3);
    }

    #[test]
    fn spline_reproduces_knots_and_lines() {
        let xs = [0.0, 0.7, 1.5, 3.0, 3.2];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let s = CubicSpline::natural(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_abs_diff_eq!(s.eval(*x), *y, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(s.eval(2.2), 3.4, epsilon = 1e-12);
    }

    #[test]
    fn spline_matches_hand_solved_three_knots() {
        // Knots (0,0),(1,1),(2,0): m1 = 6*(-1-1)/(2*2) = -3.
        let s = CubicSpline::natural(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]).unwrap();
        // On [0,1]: y = 1.5x - 0.5x^3.
        assert_abs_diff_eq!(s.eval(0.5), 0.75 - 0.0625, epsilon = 1e-12);
    }

    #[test]
    fn held_sampling() {
        let v = [0.0, 1.0, 3.0];
        assert_eq!(sample_held(&v, 1.0, 1.5), 2.0);
        assert_eq!(sample_held(&v, 1.0, 10.0), 3.0);
        assert_eq!(sample_held(&v, 1.0, -1.0), 0.0);
        assert_eq!(held(&v, 7), 3.0);
    }
}
