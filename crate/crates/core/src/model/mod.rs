//! The amplitude-indexed prediction model and its adaptation.
//!
//! Row `i` holds the mean displacement profile of saccades with amplitude
//! near `alpha_min + i * alpha_step`; together the rows are the (t, d, α)
//! triplets that map an elapsed time and displacement to an amplitude.

pub mod adapt;
pub mod denoise;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{held, sample_held};
use crate::isotonic::{pava_in_place, running_max_in_place};
use crate::profiles::{mean_profile, select, AmplitudeWindow};
use crate::types::{CategoryLabel, SaccadeDataset, SaccadeProfile};

pub use adapt::{
    data_shear, data_shear_points, data_shear_with_targets, mean_shear_points, model_shear, targets_from_sample,
    AdaptParams, ShearTarget,
};
pub use denoise::{denoise_profile, denoise_values, DenoiseParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_step: f64,
    /// Half-width of the amplitude window averaged into each row.
    pub halfwidth: f64,
    /// Rows with fewer profiles are interpolated from their neighbours.
    pub min_bin_count: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { alpha_min: 5.0, alpha_max: 45.0, alpha_step: 1.0, halfwidth: 1.0, min_bin_count: 5 }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha_min, self.alpha_max, self.alpha_step, self.halfwidth].iter().all(|v| v.is_finite());
        if !finite || self.alpha_step <= 0.0 || self.alpha_min <= 0.0 || self.alpha_max < self.alpha_min {
            return Err(Error::InvalidParameter(format!(
                "amplitude grid needs 0 < alpha_min <= alpha_max and a positive step (got {}..{} step {})",
                self.alpha_min, self.alpha_max, self.alpha_step
            )));
        }
        if self.halfwidth <= 0.0 {
            return Err(Error::InvalidParameter("bin halfwidth must be positive".into()));
        }
        if self.min_bin_count == 0 {
            return Err(Error::InvalidParameter("min_bin_count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.alpha_max - self.alpha_min) / self.alpha_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.alpha_min + i as f64 * self.alpha_step).collect()
    }
}

/// An amplitude estimate. `saturated` marks estimates clamped to the model's
/// amplitude range or taken where the rows cannot be told apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub alpha: f64,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionModel {
    dt: f64,
    alpha_min: f64,
    alpha_step: f64,
    /// Equal-length rows, each held at its final value past its own end.
    rows: Vec<Vec<f64>>,
    /// Mean endpoint time of each row, in ms.
    durations: Vec<f64>,
}

impl PredictionModel {
    /// Assembles a model from stored parts without altering them.
    pub fn from_parts(
        dt: f64,
        alpha_min: f64,
        alpha_step: f64,
        rows: Vec<Vec<f64>>,
        durations: Vec<f64>,
    ) -> Result<Self> {
        if !(dt > 0.0) || !(alpha_step > 0.0) || !alpha_min.is_finite() {
            return Err(Error::InvalidParameter("model grid needs positive dt and step".into()));
        }
        if rows.is_empty() {
            return Err(Error::NoValidBins);
        }
        if durations.len() != rows.len() {
            return Err(Error::InvalidParameter("one duration per row required".into()));
        }
        let len = rows[0].len();
        if len < 2 || rows.iter().any(|r| r.len() != len) {
            return Err(Error::InvalidParameter("model rows must share a length of at least 2".into()));
        }
        if rows.iter().flatten().chain(&durations).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite model entry".into()));
        }
        Ok(Self { dt, alpha_min, alpha_step, rows, durations })
    }

    /// Builds a model from rows of any length: pads them with their final
    /// value and enforces monotonicity in time and amplitude.
    pub fn from_rows(
        dt: f64,
        alpha_min: f64,
        alpha_step: f64,
        rows: Vec<Vec<f64>>,
        durations: Vec<f64>,
    ) -> Result<Self> {
        let len = rows.iter().map(Vec::len).max().unwrap_or(0).max(2);
        let rows = rows
            .into_iter()
            .map(|r| {
                if r.is_empty() {
                    return Err(Error::InvalidProfile("empty model row".into()));
                }
                Ok((0..len).map(|i| held(&r, i)).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let mut model = Self::from_parts(dt, alpha_min, alpha_step, rows, durations)?;
        model.enforce_monotonicity();
        Ok(model)
    }

    /// Rebuilds a model from recovered row profiles on the given amplitude grid.
    pub fn from_profiles(alpha_min: f64, alpha_step: f64, profiles: &[SaccadeProfile]) -> Result<Self> {
        let first = profiles.first().ok_or(Error::NoValidBins)?;
        let dt = first.dt();
        if let Some(p) = profiles.iter().find(|p| (p.dt() - dt).abs() > 1e-12) {
            return Err(Error::IntervalMismatch(p.dt(), dt));
        }
        let durations = profiles.iter().map(|p| p.duration()).collect();
        let rows = profiles.iter().map(|p| p.displacement().to_vec()).collect();
        Self::from_rows(dt, alpha_min, alpha_step, rows, durations)
    }

    /// One row per amplitude bin, from the mean profile of the profiles in it.
    pub fn build(dataset: &SaccadeDataset, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        if dataset.is_empty() {
            return Err(Error::EmptyInput("cannot build a model from an empty dataset"));
        }
        let grid = params.grid();
        let mut bins: Vec<Option<(Vec<f64>, f64)>> = Vec::with_capacity(grid.len());
        for &alpha in &grid {
            let chosen =
                select(dataset, &CategoryLabel::none(), AmplitudeWindow { center: alpha, halfwidth: params.halfwidth });
            if chosen.len() >= params.min_bin_count {
                let m = mean_profile(&chosen)?;
                let duration = m.duration();
                bins.push(Some((m.mean().to_vec(), duration)));
            } else {
                bins.push(None);
            }
        }
        let first = bins.iter().position(Option::is_some).ok_or(Error::NoValidBins)?;
        let last = bins.iter().rposition(Option::is_some).expect("a valid bin exists");
        if first > 0 || last + 1 < grid.len() {
            log::warn!(
                "amplitude range shrunk to {}..{} deg: edge bins hold fewer than {} profiles",
                grid[first],
                grid[last],
                params.min_bin_count
            );
        }
        let bins = &bins[first..=last];
        let mut rows = Vec::with_capacity(bins.len());
        let mut durations = Vec::with_capacity(bins.len());
        for (i, bin) in bins.iter().enumerate() {
            match bin {
                Some((row, duration)) => {
                    rows.push(row.clone());
                    durations.push(*duration);
                }
                None => {
                    let lo = (0..i).rev().find(|&j| bins[j].is_some()).expect("first bin is valid");
                    let hi = (i + 1..bins.len()).find(|&j| bins[j].is_some()).expect("last bin is valid");
                    let (r0, d0) = bins[lo].as_ref().expect("valid");
                    let (r1, d1) = bins[hi].as_ref().expect("valid");
                    let w = (i - lo) as f64 / (hi - lo) as f64;
                    let len = r0.len().max(r1.len());
                    rows.push((0..len).map(|t| (1.0 - w) * held(r0, t) + w * held(r1, t)).collect());
                    durations.push((1.0 - w) * d0 + w * d1);
                }
            }
        }
        Self::from_rows(dataset.dt(), grid[first], params.alpha_step, rows, durations)
    }

    /// Running max along t, then isotonic regression along α at every t,
    /// repeated until both orders hold exactly.
    fn enforce_monotonicity(&mut self) {
        let len = self.rows[0].len();
        let mut column = vec![0.0; self.rows.len()];
        for _ in 0..4 {
            for row in &mut self.rows {
                row[0] = 0.0;
                running_max_in_place(row);
            }
            for t in 0..len {
                for (c, row) in column.iter_mut().zip(&self.rows) {
                    *c = row[t];
                }
                pava_in_place(&mut column);
                for (c, row) in column.iter().zip(&mut self.rows) {
                    row[t] = *c;
                }
            }
            if self.is_monotone() {
                return;
            }
        }
        // PAVA preserves the time order up to rounding; settle any residue in t.
        for row in &mut self.rows {
            running_max_in_place(row);
        }
    }

    /// Both monotonicity invariants, checked exactly.
    pub fn is_monotone(&self) -> bool {
        let in_t = self.rows.iter().all(|r| r[0] == 0.0 && r.windows(2).all(|w| w[0] <= w[1]));
        let in_alpha = self.rows.windows(2).all(|p| p[0].iter().zip(&p[1]).all(|(a, b)| a <= b));
        in_t && in_alpha
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn alpha_min(&self) -> f64 {
        self.alpha_min
    }

    pub fn alpha_step(&self) -> f64 {
        self.alpha_step
    }

    pub fn alpha_max(&self) -> f64 {
        self.alpha(self.rows.len() - 1)
    }

    pub fn alpha(&self, row: usize) -> f64 {
        self.alpha_min + row as f64 * self.alpha_step
    }

    pub fn alphas(&self) -> Vec<f64> {
        (0..self.rows.len()).map(|i| self.alpha(i)).collect()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Number of time samples per row.
    pub fn time_len(&self) -> usize {
        self.rows[0].len()
    }

    /// Value of row `i` at time `t` (linear in t, held past the end).
    pub fn value(&self, row: usize, t: f64) -> f64 {
        sample_held(&self.rows[row], self.dt, t)
    }

    /// Amplitude whose row passes through (t, d).
    ///
    /// Rows are bracketed by binary search and the amplitude interpolated
    /// linearly between them. Queries below the first row or above the last
    /// are clamped and flagged; a run of rows equal to `d` yields the middle of
    /// their amplitudes.
    pub fn predict(&self, t: f64, d: f64) -> Prediction {
        let n = self.rows.len();
        let t = t.max(0.0);
        let col = |i: usize| self.value(i, t);
        let (c_first, c_last) = (col(0), col(n - 1));
        if n == 1 || !(d >= c_first) {
            return Prediction { alpha: self.alpha_min, saturated: true };
        }
        if d > c_last {
            return Prediction { alpha: self.alpha_max(), saturated: true };
        }
        if c_first == c_last {
            return Prediction { alpha: self.alpha_min, saturated: true };
        }
        // First row reaching d; it exists because d <= c_last.
        let (mut lo, mut hi) = (0usize, n - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if col(mid) < d {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let j = lo;
        let cj = col(j);
        if cj == d {
            let (mut lo, mut hi) = (j, n - 1);
            while lo < hi {
                let mid = (lo + hi).div_ceil(2);
                if col(mid) <= d {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            return Prediction { alpha: 0.5 * (self.alpha(j) + self.alpha(lo)), saturated: false };
        }
        let c_prev = col(j - 1);
        let frac = (d - c_prev) / (cj - c_prev);
        Prediction { alpha: self.alpha(j - 1) + frac * self.alpha_step, saturated: false }
    }

    /// Each row as a profile; the inverse mapping with α fixed.
    pub fn recover_profiles(&self) -> Vec<SaccadeProfile> {
        self.rows
            .iter()
            .map(|r| {
                SaccadeProfile::new(self.dt, r.clone(), CategoryLabel::none())
                    .expect("enforced rows start at 0 and rise to a positive amplitude")
            })
            .collect()
    }

    /// The model with every row delayed by `ms` (zero displacement meanwhile).
    pub fn time_shifted(&self, ms: f64) -> Result<Self> {
        if !(ms >= 0.0) {
            return Err(Error::InvalidParameter(format!("time shift must be non-negative, got {ms}")));
        }
        let k = (ms / self.dt).round() as usize;
        let rows = self.rows.iter().map(|r| std::iter::repeat_n(0.0, k).chain(r.iter().copied()).collect()).collect();
        let durations = self.durations.iter().map(|d| d + k as f64 * self.dt).collect();
        Self::from_rows(self.dt, self.alpha_min, self.alpha_step, rows, durations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::DatasetMetadata;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ramp(amp: f64, dur: usize) -> Vec<f64> {
        (0..=dur)
            .map(|i| {
                let x = i as f64 / dur as f64;
                amp * x * x * (3.0 - 2.0 * x)
            })
            .collect()
    }

    fn profile(amp: f64) -> SaccadeProfile {
        SaccadeProfile::new(1.0, ramp(amp, (2.2 * amp + 21.0) as usize), CategoryLabel::none()).unwrap()
    }

    fn dataset(profiles: Vec<SaccadeProfile>) -> SaccadeDataset {
        SaccadeDataset::from_profiles(DatasetMetadata::default(), profiles).unwrap()
    }

    fn exact_model() -> PredictionModel {
        let rows: Vec<_> = (0..=8).map(|i| ramp(10.0 + i as f64 * 5.0, 40 + 2 * i)).collect();
        let durations = rows.iter().map(|r| (r.len() - 1) as f64).collect();
        PredictionModel::from_rows(1.0, 10.0, 5.0, rows, durations).unwrap()
    }

    #[test]
    fn identical_profiles_give_that_row() {
        let ds = dataset(vec![profile(10.0); 6]);
        let params = ModelParams { alpha_min: 10.0, alpha_max: 10.0, ..ModelParams::default() };
        let m = PredictionModel::build(&ds, &params).unwrap();
        assert_eq!(m.row_count(), 1);
        for (a, b) in m.rows()[0].iter().zip(profile(10.0).displacement()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_bins_are_interpolated() {
        let mut profiles = vec![profile(10.0); 5];
        profiles.extend(vec![profile(20.0); 5]);
        let params = ModelParams { alpha_min: 10.0, alpha_max: 20.0, alpha_step: 5.0, ..ModelParams::default() };
        let m = PredictionModel::build(&dataset(profiles), &params).unwrap();
        assert_eq!(m.row_count(), 3);
        let (a, b) = (profile(10.0), profile(20.0));
        for t in 0..m.time_len() {
            let mid = 0.5 * (held(a.displacement(), t) + held(b.displacement(), t));
            assert_abs_diff_eq!(m.rows()[1][t], mid, epsilon = 1e-12);
        }
        assert!(m.is_monotone());
    }

    #[test]
    fn sparse_edges_shrink_the_range() {
        let ds = dataset(vec![profile(20.0); 5]);
        let m = PredictionModel::build(&ds, &ModelParams::default()).unwrap();
        assert_eq!((m.alpha_min(), m.alpha_max()), (19.0, 21.0));
        let few = dataset(vec![profile(20.0); 4]);
        assert!(matches!(PredictionModel::build(&few, &ModelParams::default()), Err(Error::NoValidBins)));
    }

    #[test]
    fn on_grid_queries_are_exact() {
        let m = exact_model();
        for i in 0..m.row_count() {
            for t in [5.0, 12.0, 25.0, 33.0] {
                let d = m.value(i, t);
                let unique = (0..m.row_count()).filter(|&k| m.value(k, t) == d).count() == 1;
                if unique && i > 0 && i + 1 < m.row_count() {
                    assert_abs_diff_eq!(m.predict(t, d).alpha, m.alpha(i), epsilon = 1e-6);
                }
            }
        }
        assert_eq!(m.predict(0.0, 0.0), Prediction { alpha: 10.0, saturated: true });
        assert_eq!(m.predict(30.0, 1e6), Prediction { alpha: 50.0, saturated: true });
    }

    #[test]
    fn between_rows_is_interpolated() {
        let m = exact_model();
        let t = 20.0;
        let d = 0.25 * m.value(2, t) + 0.75 * m.value(3, t);
        assert_abs_diff_eq!(m.predict(t, d).alpha, 23.75, epsilon = 1e-9);
    }

    #[test]
    fn ties_take_the_middle() {
        let rows = vec![vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 3.0], vec![0.0, 1.0, 4.0], vec![0.0, 2.0, 5.0]];
        let m = PredictionModel::from_rows(1.0, 10.0, 1.0, rows, vec![2.0; 4]).unwrap();
        assert_eq!(m.predict(1.0, 1.0).alpha, 11.0);
    }

    #[test]
    fn recover_then_rebuild_is_identity() {
        let m = exact_model();
        let back = PredictionModel::from_profiles(m.alpha_min(), m.alpha_step(), &m.recover_profiles()).unwrap();
        assert_eq!(back.rows(), m.rows());
        assert_eq!(m.recover_profiles().len(), m.row_count());
    }

    #[test]
    fn single_row_predicts_its_amplitude() {
        let m = PredictionModel::from_rows(1.0, 5.0, 1.0, vec![ramp(5.0, 30)], vec![30.0]).unwrap();
        assert_eq!(m.predict(10.0, 3.0), Prediction { alpha: 5.0, saturated: true });
    }

    #[test]
    fn time_shift_prepends_zeros() {
        let m = exact_model();
        let s = m.time_shifted(10.0).unwrap();
        assert_eq!(s.value(0, 25.0), m.value(0, 15.0));
        assert_eq!(s.value(3, 9.0), 0.0);
        assert!(s.is_monotone());
    }

    proptest! {
        #[test]
        fn enforcement_yields_monotone_rows(noise in prop::collection::vec(-0.5f64..0.5, 9 * 50)) {
            let rows: Vec<Vec<f64>> = (0..9)
                .map(|i| {
                    ramp(10.0 + 2.0 * i as f64, 30 + i)
                        .iter()
                        .enumerate()
                        .map(|(t, v)| if t == 0 { 0.0 } else { (v + noise[i * 50 + t.min(49)]).max(0.01) })
                        .collect()
                })
                .collect();
            let m = PredictionModel::from_rows(1.0, 10.0, 2.0, rows, vec![40.0; 9]).unwrap();
            prop_assert!(m.is_monotone());
        }

        #[test]
        fn predict_is_monotone_in_d(t in 0.0f64..80.0, d1 in 0.0f64..60.0, d2 in 0.0f64..60.0) {
            let m = exact_model();
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(m.predict(t, lo).alpha <= m.predict(t, hi).alpha);
        }
    }
}
