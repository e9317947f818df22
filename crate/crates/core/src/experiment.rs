//! Synthetic benchmarks of the adaptation strategies.
//!
//! * Orientation: a mixed corpus where vertical saccades are time-dilated;
//!   models are adapted to vertical saccades from a few calibration samples.
//! * Bias: a base model whose rows lag by a fixed delay, adapted with
//!   unbiased calibration samples of the same category.
//! * Users: synthetic users with individual speeds, each adapted in turn.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate_profiles, sweep, Adapter, EvalReport, ModelReport, Strategy, SweepConfig, SweepRow};
use crate::model::adapt::AdaptParams;
use crate::synth::{generate, CategorySpec, SynthConfig};
use crate::types::{CategoryLabel, SaccadeDataset, SaccadeProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub saccades: usize,
    pub vertical_gamma: f64,
    pub vertical_weight: f64,
    /// Held-out saccades of the adapted category.
    pub test_size: usize,
    /// Saccades of the adapted category available for calibration.
    pub pool_size: usize,
    /// Calibration sample size of the single-shot comparison.
    pub calibration: usize,
    /// Delay injected into the biased model, in ms.
    pub bias_ms: f64,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            saccades: 2000,
            vertical_gamma: 1.15,
            vertical_weight: 0.3,
            test_size: 150,
            pool_size: 200,
            calibration: 20,
            bias_ms: 10.0,
            sweep: SweepConfig { n_values: vec![5, 10, 20, 50, 100, 200], reps: 20, seed: 7 },
        }
    }
}

impl ExperimentConfig {
    fn synth(&self) -> SynthConfig {
        SynthConfig { seed: self.seed, ..SynthConfig::orientation(self.vertical_gamma, self.vertical_weight) }
    }
}

/// Base corpus, calibration pool and test set of one benchmark.
#[derive(Debug, Clone)]
pub struct Split {
    pub base: SaccadeDataset,
    pub pool: Vec<SaccadeProfile>,
    pub test: Vec<SaccadeProfile>,
}

/// Splits `dataset`: the first `test_size` profiles labelled `target` form
/// the test set, the next `pool_size` the calibration pool. The base corpus
/// is everything but the test set.
pub fn split(dataset: &SaccadeDataset, target: &CategoryLabel, test_size: usize, pool_size: usize) -> Result<Split> {
    let tagged: Vec<usize> = (0..dataset.len()).filter(|&i| target.matches(&dataset.profiles()[i].category)).collect();
    if tagged.len() < test_size + pool_size {
        return Err(Error::TooFewSamples { needed: test_size + pool_size, got: tagged.len() });
    }
    let test_idx = &tagged[..test_size];
    let pool_idx = &tagged[test_size..test_size + pool_size];
    let profiles = dataset.profiles();
    let test = test_idx.iter().map(|&i| profiles[i].clone()).collect();
    let pool = pool_idx.iter().map(|&i| profiles[i].clone()).collect();
    let base = (0..dataset.len()).filter(|i| test_idx.binary_search(i).is_err()).map(|i| profiles[i].clone()).collect();
    Ok(Split { base: SaccadeDataset::from_profiles(dataset.metadata.clone(), base)?, pool, test })
}

fn orientation_split(cfg: &ExperimentConfig) -> Result<Split> {
    let corpus = generate(&cfg.synth(), cfg.saccades)?;
    split(&corpus.dataset, &CategoryLabel::vertical(), cfg.test_size, cfg.pool_size)
}

fn single_shot(adapter: &Adapter, split: &Split, n: usize) -> Result<EvalReport> {
    let sample = &split.pool[..n.min(split.pool.len())];
    let models = Strategy::ALL
        .iter()
        .map(|&s| {
            let model = adapter.fit(s, sample)?;
            evaluate_profiles(&model, &split.test, s.as_str())
        })
        .collect::<Result<Vec<ModelReport>>>()?;
    Ok(EvalReport { models, sweep: Vec::new() })
}

/// Results of the orientation benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationResult {
    /// Every strategy fitted on the first `calibration` pool saccades.
    pub single: EvalReport,
    /// Bootstrap sweep of every strategy over the calibration size.
    pub sweep: Vec<SweepRow>,
}

impl OrientationResult {
    pub fn row(&self, strategy: Strategy, n: usize) -> Option<&SweepRow> {
        self.sweep.iter().find(|r| r.strategy == strategy && r.n == n)
    }
}

pub fn orientation_benchmark(cfg: &ExperimentConfig, params: &AdaptParams) -> Result<OrientationResult> {
    let split = orientation_split(cfg)?;
    let adapter = Adapter::new(split.base.clone(), params.clone())?;
    let single = single_shot(&adapter, &split, cfg.calibration)?;
    let mut rows = Vec::new();
    for s in Strategy::ALL {
        rows.extend(sweep(&adapter, &split.pool, &split.test, s, &cfg.sweep)?);
    }
    Ok(OrientationResult { single, sweep: rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasResult {
    pub shift_ms: f64,
    pub unbiased_mae: f64,
    pub biased_mae: f64,
    pub model_shear_mae: f64,
    pub data_shear_mae: f64,
}

impl BiasResult {
    /// Relative MAE reduction of model shear over the biased model.
    pub fn model_shear_gain(&self) -> f64 {
        (self.biased_mae - self.model_shear_mae) / self.biased_mae
    }

    /// Relative MAE reduction of data shear plus rebuild over the biased model.
    pub fn data_shear_gain(&self) -> f64 {
        (self.biased_mae - self.data_shear_mae) / self.biased_mae
    }
}

/// Horizontal saccades only: the base model is built, delayed by
/// `cfg.bias_ms`, then adapted with `cfg.pool_size` unbiased horizontal
/// calibration saccades. Data shear rebuilds through the same delayed
/// pipeline.
pub fn bias_experiment(cfg: &ExperimentConfig, params: &AdaptParams) -> Result<BiasResult> {
    let corpus = generate(&cfg.synth(), cfg.saccades)?;
    let horizontal = CategoryLabel::horizontal();
    let only: Vec<SaccadeProfile> =
        corpus.dataset.profiles().iter().filter(|p| horizontal.matches(&p.category)).cloned().collect();
    let dataset = SaccadeDataset::from_profiles(corpus.dataset.metadata.clone(), only)?;
    let split = split(&dataset, &horizontal, cfg.test_size, cfg.pool_size)?;
    let mut adapter = Adapter::new(split.base.clone(), params.clone())?;
    let unbiased_mae = evaluate_profiles(&adapter.base_model, &split.test, "unbiased")?.mae_full;
    adapter.base_model = adapter.base_model.time_shifted(cfg.bias_ms)?;
    adapter.rebuild_shift = cfg.bias_ms;
    let score = |s: Strategy| -> Result<f64> {
        let model = adapter.fit(s, &split.pool)?;
        Ok(evaluate_profiles(&model, &split.test, s.as_str())?.mae_full)
    };
    Ok(BiasResult {
        shift_ms: cfg.bias_ms,
        unbiased_mae,
        biased_mae: score(Strategy::Average)?,
        model_shear_mae: score(Strategy::ModelShear)?,
        data_shear_mae: score(Strategy::DataShear)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserShiftRow {
    pub user: String,
    pub gamma: f64,
    pub average_mae: f64,
    pub model_shear_mae: f64,
    pub data_shear_mae: f64,
    pub customized_mae: f64,
}

/// Speeds of the synthetic users.
pub const USER_GAMMAS: [f64; 5] = [0.9, 0.95, 1.0, 1.1, 1.2];

/// One synthetic user per entry of [`USER_GAMMAS`]; each is held out in turn
/// and the others' saccades form the base corpus.
pub fn users_experiment(cfg: &ExperimentConfig, params: &AdaptParams) -> Result<Vec<UserShiftRow>> {
    let users: Vec<CategorySpec> = USER_GAMMAS
        .iter()
        .enumerate()
        .map(|(i, &gamma)| Ok(CategorySpec { label: CategoryLabel::user(&format!("u{}", i + 1))?, gamma, weight: 1.0 }))
        .collect::<Result<_>>()?;
    let synth = SynthConfig { seed: cfg.seed, categories: users.clone(), ..SynthConfig::default() };
    let corpus = generate(&synth, cfg.saccades)?;
    let per_user = cfg.saccades / users.len();
    let test_size = cfg.test_size.min(per_user / 2);
    let pool_size = cfg.calibration.min(per_user - test_size);
    users
        .iter()
        .map(|u| {
            let s = split(&corpus.dataset, &u.label, test_size, pool_size)?;
            let others: Vec<SaccadeProfile> =
                s.base.profiles().iter().filter(|p| !u.label.matches(&p.category)).cloned().collect();
            let base = SaccadeDataset::from_profiles(s.base.metadata.clone(), others)?;
            let adapter = Adapter::new(base, params.clone())?;
            let score = |strategy: Strategy| -> Result<f64> {
                let model = adapter.fit(strategy, &s.pool)?;
                Ok(evaluate_profiles(&model, &s.test, strategy.as_str())?.mae_full)
            };
            Ok(UserShiftRow {
                user: u.label.value().to_string(),
                gamma: u.gamma,
                average_mae: score(Strategy::Average)?,
                model_shear_mae: score(Strategy::ModelShear)?,
                data_shear_mae: score(Strategy::DataShear)?,
                customized_mae: score(Strategy::Customized)?,
            })
        })
        .collect()
}
