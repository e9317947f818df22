//! Scoring models against labelled test saccades, and bootstrap sweeps over
//! the number of calibration saccades.
//!
//! Every test saccade is queried at each step t = dt, 2dt, ... up to its end
//! with its own displacement. Errors are averaged per saccade first and then
//! across saccades, so each saccade weighs the same regardless of duration.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::adapt::{data_shear_with_targets, model_shear, targets_from_sample, AdaptParams};
use crate::model::{ModelParams, PredictionModel};
use crate::types::{SaccadeDataset, SaccadeProfile};

/// Bins of the error-vs-time curve over the normalized elapsed duration.
pub const TIME_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeBin {
    /// Bin center as a fraction of each saccade's duration.
    pub fraction: f64,
    /// `None` when no test step fell into the bin.
    pub mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub saccades: usize,
    pub mae_full: f64,
    pub mae_second_half: f64,
    pub error_vs_time: Vec<TimeBin>,
}

/// Per-saccade error summary.
struct SaccadeErrors {
    full: f64,
    second_half: Option<f64>,
    bins: [Option<f64>; TIME_BINS],
}

fn score(model: &PredictionModel, p: &SaccadeProfile) -> SaccadeErrors {
    let d = p.displacement();
    let alpha = p.amplitude();
    let duration = p.duration();
    let (mut full, mut half, mut n_half) = (0.0, 0.0, 0usize);
    let mut bins = [(0.0, 0usize); TIME_BINS];
    for (l, &dl) in d.iter().enumerate().skip(1) {
        let t = l as f64 * p.dt();
        let err = (model.predict(t, dl).alpha - alpha).abs();
        full += err;
        if t >= duration / 2.0 {
            half += err;
            n_half += 1;
        }
        let b = ((t / duration * TIME_BINS as f64) as usize).min(TIME_BINS - 1);
        bins[b].0 += err;
        bins[b].1 += 1;
    }
    let steps = (d.len() - 1) as f64;
    SaccadeErrors {
        full: full / steps,
        second_half: (n_half > 0).then(|| half / n_half as f64),
        bins: bins.map(|(s, n)| (n > 0).then(|| s / n as f64)),
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Scores `model` on every non-outlier profile of `test`.
pub fn evaluate(model: &PredictionModel, test: &SaccadeDataset, name: &str) -> Result<ModelReport> {
    evaluate_profiles(model, test.profiles(), name)
}

pub fn evaluate_profiles(model: &PredictionModel, test: &[SaccadeProfile], name: &str) -> Result<ModelReport> {
    let usable: Vec<&SaccadeProfile> = test.iter().filter(|p| !p.outlier).collect();
    if usable.is_empty() {
        return Err(Error::EmptyInput("the test set holds no usable saccades"));
    }
    let per: Vec<SaccadeErrors> = usable.par_iter().map(|p| score(model, p)).collect();
    let error_vs_time = (0..TIME_BINS)
        .map(|b| TimeBin {
            fraction: (b as f64 + 0.5) / TIME_BINS as f64,
            mae: mean_of(per.iter().filter_map(|e| e.bins[b])),
        })
        .collect();
    Ok(ModelReport {
        name: name.to_string(),
        saccades: per.len(),
        mae_full: mean_of(per.iter().map(|e| e.full)).expect("non-empty"),
        mae_second_half: mean_of(per.iter().filter_map(|e| e.second_half)).unwrap_or(0.0),
        error_vs_time,
    })
}

/// How a model is obtained from a small calibration sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// The base model, ignoring the calibration sample.
    Average,
    /// A model built from the calibration sample alone.
    Customized,
    /// The base model's rows sheared toward the calibration means.
    ModelShear,
    /// The base corpus sheared toward the calibration sample, then rebuilt.
    DataShear,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Average, Strategy::Customized, Strategy::ModelShear, Strategy::DataShear];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Average => "average",
            Strategy::Customized => "customized",
            Strategy::ModelShear => "model-shear",
            Strategy::DataShear => "data-shear",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.as_str() == s || k.as_str().replace('-', "_") == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown strategy '{s}'")))
    }
}

/// The base corpus and model that calibration strategies start from.
#[derive(Debug, Clone)]
pub struct Adapter {
    pub base_dataset: SaccadeDataset,
    pub base_model: PredictionModel,
    pub params: AdaptParams,
    /// Delay in ms applied to every model the adapter rebuilds from data,
    /// reproducing a pipeline with a built-in timing bias.
    pub rebuild_shift: f64,
}

impl Adapter {
    pub fn new(base_dataset: SaccadeDataset, params: AdaptParams) -> Result<Self> {
        let base_model = PredictionModel::build(&base_dataset, &params.model)?;
        Ok(Self { base_dataset, base_model, params, rebuild_shift: 0.0 })
    }

    fn rebuilt(&self, dataset: &SaccadeDataset, params: &ModelParams) -> Result<PredictionModel> {
        let model = PredictionModel::build(dataset, params)?;
        if self.rebuild_shift > 0.0 {
            model.time_shifted(self.rebuild_shift)
        } else {
            Ok(model)
        }
    }

    /// Model for `strategy` given the calibration sample.
    pub fn fit(&self, strategy: Strategy, calibration: &[SaccadeProfile]) -> Result<PredictionModel> {
        match strategy {
            Strategy::Average => Ok(self.base_model.clone()),
            Strategy::Customized => {
                let ds = SaccadeDataset::from_profiles(self.base_dataset.metadata.clone(), calibration.to_vec())?;
                let params = ModelParams { min_bin_count: 1, ..self.params.model.clone() };
                self.rebuilt(&ds, &params)
            }
            Strategy::ModelShear => {
                let targets = targets_from_sample(calibration, &self.params.model, self.params.min_target_count)?;
                Ok(model_shear(&self.base_model, &targets, &self.params)?.0)
            }
            Strategy::DataShear => {
                let (sheared, _) = data_shear_with_targets(&self.base_dataset, calibration, &self.params)?;
                self.rebuilt(&sheared, &self.params.model)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub n_values: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { n_values: vec![5, 10, 20, 50, 100, 200], reps: 20, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub strategy: Strategy,
    pub n: usize,
    /// Repetitions that produced a model.
    pub reps: usize,
    /// Repetitions whose fit failed.
    pub failures: usize,
    pub mean_mae: f64,
    pub std_mae: f64,
    pub mean_mae_second_half: f64,
}

fn bootstrap(pool: &[SaccadeProfile], n: usize, seed: u64, rep: usize) -> Vec<SaccadeProfile> {
    if n >= pool.len() {
        return pool.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((n as u64) << 32) | rep as u64);
    (0..n).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect()
}

/// Mean and population standard deviation.
fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// For each n, draws `reps` bootstrap samples of n calibration saccades from
/// `pool`, fits `strategy` and scores it on `test`. Samples of size n ≥ |pool|
/// use the pool as is.
pub fn sweep(
    adapter: &Adapter,
    pool: &[SaccadeProfile],
    test: &[SaccadeProfile],
    strategy: Strategy,
    cfg: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    if pool.is_empty() {
        return Err(Error::EmptyInput("the calibration pool is empty"));
    }
    if cfg.reps == 0 {
        return Err(Error::InvalidParameter("a sweep needs at least one repetition".into()));
    }
    if let Some(&n) = cfg.n_values.iter().find(|&&n| n == 0 || n > pool.len()) {
        return Err(Error::InvalidParameter(format!("sample size {n} must lie in 1..={}", pool.len())));
    }
    let mut rows = Vec::with_capacity(cfg.n_values.len());
    for &n in &cfg.n_values {
        let results: Vec<Result<ModelReport>> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| {
                let sample = bootstrap(pool, n, cfg.seed, rep);
                let model = adapter.fit(strategy, &sample)?;
                evaluate_profiles(&model, test, strategy.as_str())
            })
            .collect();
        let mut full = Vec::new();
        let mut half = Vec::new();
        let mut failures = 0;
        for (rep, r) in results.into_iter().enumerate() {
            match r {
                Ok(report) => {
                    full.push(report.mae_full);
                    half.push(report.mae_second_half);
                }
                Err(e) => {
                    log::warn!("{strategy} n={n} rep={rep} failed: {e}");
                    failures += 1;
                }
            }
        }
        let (mean_mae, std_mae) = mean_std(&full);
        rows.push(SweepRow {
            strategy,
            n,
            reps: full.len(),
            failures,
            mean_mae,
            std_mae,
            mean_mae_second_half: mean_std(&half).0,
        });
    }
    Ok(rows)
}

/// Model reports and sweep rows of one evaluation run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub models: Vec<ModelReport>,
    pub sweep: Vec<SweepRow>,
}

impl EvalReport {
    pub fn model(&self, name: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn write_models_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "saccades", "mae_full", "mae_second_half"]).map_err(csv_error)?;
        for m in &self.models {
            w.write_record([
                m.name.clone(),
                m.saccades.to_string(),
                m.mae_full.to_string(),
                m.mae_second_half.to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_error_vs_time_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "fraction", "mae"]).map_err(csv_error)?;
        for m in &self.models {
            for b in &m.error_vs_time {
                let mae = b.mae.map(|v| v.to_string()).unwrap_or_default();
                w.write_record([m.name.clone(), b.fraction.to_string(), mae]).map_err(csv_error)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_sweep_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["strategy", "n", "reps", "failures", "mean_mae", "std_mae", "mean_mae_second_half"])
            .map_err(csv_error)?;
        for r in &self.sweep {
            w.write_record([
                r.strategy.to_string(),
                r.n.to_string(),
                r.reps.to_string(),
                r.failures.to_string(),
                r.mean_mae.to_string(),
                r.std_mae.to_string(),
                r.mean_mae_second_half.to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generator_profiles, SynthConfig};
    use crate::types::{CategoryLabel, DatasetMetadata};
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

    fn noiseless(n: usize, seed: u64) -> SaccadeDataset {
        generator_profiles(&SynthConfig { seed, ..SynthConfig::default() }.noiseless(), n).unwrap().0
    }

    fn constant_model(alpha_min: f64) -> PredictionModel {
        // One row: every query saturates to α_min.
        PredictionModel::from_rows(1.0, alpha_min, 1.0, vec![vec![0.0, 1.0, 2.0]], vec![2.0]).unwrap()
    }

    #[test]
    fn constant_model_error_is_arithmetic() {
        let cfg = SynthConfig { amplitude_min: 20.0, amplitude_max: 20.0, ..SynthConfig::default() }.noiseless();
        let (test, _) = generator_profiles(&cfg, 5).unwrap();
        let r = evaluate(&constant_model(5.0), &test, "dummy").unwrap();
        assert!((r.mae_full - 15.0).abs() < 1e-12);
        assert!((r.mae_second_half - 15.0).abs() < 1e-12);
        assert!(r.error_vs_time.iter().all(|b| (b.mae.unwrap() - 15.0).abs() < 1e-12));
    }

    #[test]
    fn self_consistent_model_is_accurate() {
        let ds = noiseless(800, 5);
        let model = PredictionModel::build(&ds, &ModelParams::default()).unwrap();
        let test = noiseless(100, 6);
        let r = evaluate(&model, &test, "self").unwrap();
        assert!(r.mae_full <= 0.1, "{}", r.mae_full);
        assert!(r.mae_second_half <= r.mae_full);
    }

    #[test]
    fn empty_test_set_is_rejected() {
        let empty = SaccadeDataset::new(DatasetMetadata::default());
        assert!(matches!(evaluate(&constant_model(5.0), &empty, "x"), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn degenerate_sweep_equals_evaluation() {
        let base = noiseless(400, 1);
        let adapter = Adapter::new(base, AdaptParams::default()).unwrap();
        let pool = noiseless(60, 2).into_profiles();
        let test = noiseless(30, 3).into_profiles();
        let cfg = SweepConfig { n_values: vec![pool.len()], reps: 1, seed: 9 };
        let rows = sweep(&adapter, &pool, &test, Strategy::Customized, &cfg).unwrap();
        let direct = PredictionModel::build(
            &SaccadeDataset::from_profiles(DatasetMetadata::default(), pool.clone()).unwrap(),
            &ModelParams { min_bin_count: 1, ..ModelParams::default() },
        )
        .unwrap();
        let expected = evaluate_profiles(&direct, &test, "customized").unwrap();
        assert_eq!(rows[0].mean_mae, expected.mae_full);
        assert_eq!(rows[0].std_mae, 0.0);
    }

    #[test]
    fn sweep_is_deterministic_and_counts_failures() {
        let adapter = Adapter::new(noiseless(400, 1), AdaptParams::default()).unwrap();
        let pool = noiseless(40, 2).into_profiles();
        let test = noiseless(20, 3).into_profiles();
        let cfg = SweepConfig { n_values: vec![1, 5], reps: 4, seed: 3 };
        let a = sweep(&adapter, &pool, &test, Strategy::ModelShear, &cfg).unwrap();
        let b = sweep(&adapter, &pool, &test, Strategy::ModelShear, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.reps + r.failures == 4));
        // Calibration amplitudes beyond the grid leave no shear points.
        let far = SynthConfig { amplitude_min: 50.0, amplitude_max: 50.0, ..SynthConfig::default() }.noiseless();
        let far_pool = generator_profiles(&far, 5).unwrap().0.into_profiles();
        let failed =
            sweep(&adapter, &far_pool, &test, Strategy::ModelShear, &SweepConfig { n_values: vec![3], ..cfg.clone() })
                .unwrap();
        assert_eq!((failed[0].reps, failed[0].failures), (0, 4));
        assert!(failed[0].mean_mae.is_nan());
        assert!(sweep(&adapter, &pool, &test, Strategy::Average, &SweepConfig { n_values: vec![41], ..cfg }).is_err());
    }

    #[test]
    fn strategies_parse() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!("model_shear".parse::<Strategy>().unwrap(), Strategy::ModelShear);
        assert!("median".parse::<Strategy>().is_err());
    }

    #[test]
    fn reports_serialize_to_csv() {
        let test = noiseless(10, 4);
        let report =
            EvalReport { models: vec![evaluate(&constant_model(5.0), &test, "dummy").unwrap()], sweep: vec![] };
        let mut buf = Vec::new();
        report.write_error_vs_time_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), TIME_BINS + 1);
        assert!(text.starts_with("model,fraction,mae"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn duplicating_the_test_set_keeps_mae(seed in 0u64..1000) {
            let model = PredictionModel::build(&noiseless(300, 1), &ModelParams::default()).unwrap();
            let test = noiseless(12, seed).into_profiles();
            let doubled: Vec<_> = test.iter().chain(&test).cloned().collect();
            let a = evaluate_profiles(&model, &test, "m").unwrap();
            let b = evaluate_profiles(&model, &doubled, "m").unwrap();
            prop_assert!((a.mae_full - b.mae_full).abs() <= 1e-9);
            prop_assert!((a.mae_second_half - b.mae_second_half).abs() <= 1e-9);
        }

        #[test]
        fn evaluation_is_deterministic(seed in 0u64..1000) {
            let model = PredictionModel::build(&noiseless(300, 1), &ModelParams::default()).unwrap();
            let test = noiseless(8, seed).into_profiles();
            let a = evaluate_profiles(&model, &test, "m").unwrap();
            prop_assert_eq!(a.clone(), evaluate_profiles(&model, &test, "m").unwrap());
            prop_assert!(a.mae_full >= 0.0);
            prop_assert!(a.error_vs_time.iter().all(|b| (0.0..=1.0).contains(&b.fraction)));
        }

        #[test]
        fn labels_do_not_change_scores(seed in 0u64..100) {
            let model = PredictionModel::build(&noiseless(300, 1), &ModelParams::default()).unwrap();
            let test = noiseless(6, seed).into_profiles();
            let relabelled: Vec<_> = test.iter().cloned().map(|p| p.with_category(CategoryLabel::vertical())).collect();
            prop_assert_eq!(
                evaluate_profiles(&model, &test, "m").unwrap().mae_full,
                evaluate_profiles(&model, &relabelled, "m").unwrap().mae_full
            );
        }
    }
}
