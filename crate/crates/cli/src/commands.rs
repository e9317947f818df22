//! One function per subcommand.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{Context, Result};
use sackit::detection::{detect_saccades, trace_to_profile, DetectionParams};
use sackit::eval::{evaluate_profiles, sweep as run_sweep, Adapter, EvalReport, Strategy};
use sackit::experiment::{bias_experiment, orientation_benchmark, split, users_experiment};
use sackit::io::{
    read_dataset, read_gaze_stream, read_means, read_model, write_dataset, write_gaze_stream, write_means, write_model,
    write_traces, StreamFormat,
};
use sackit::model::adapt::ShearTarget;
use sackit::model::{data_shear, data_shear_with_targets, mean_shear_points, model_shear, targets_from_sample};
use sackit::predictor::Predictor;
use sackit::profiles::{category_means, dissimilarity, AmplitudeWindow};
use sackit::shear::fit_shear_curve;
use sackit::synth::{generate, generate_stream, GroundTruth, SynthConfig};
use sackit::types::DEFAULT_DT;
use sackit::{CategoryLabel, DatasetMetadata, Factor, MeanProfile, ModelParams, PredictionModel, SaccadeDataset};
use serde::Serialize;

use crate::config::Config;
use crate::{
    BuildModelArgs, DetectArgs, DissimArgs, EvalArgs, MeanArgs, ModelGridArgs, PlotDataArgs, PredictArgs,
    PredictStreamArgs, ShearDataArgs, ShearFitArgs, ShearModelArgs, SweepArgs, SynthArgs,
};

/// A malformed invocation rather than bad data; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

fn parse_arg<T: FromStr>(what: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| usage(format!("invalid {what} '{value}': {e}")))
}

fn parse_label(value: Option<&str>) -> Result<Option<CategoryLabel>> {
    value.map(|v| parse_arg("category", v)).transpose()
}

fn stream_format(path: &Path, explicit: Option<&str>) -> Result<StreamFormat> {
    match explicit {
        Some(f) => parse_arg("stream format", f),
        None => Ok(StreamFormat::from_path(path)),
    }
}

/// Refuses to write over any of the inputs.
fn check_outputs(inputs: &[&Path], outputs: &[Option<&Path>]) -> Result<()> {
    let inputs: Vec<PathBuf> = inputs.iter().filter_map(|p| fs::canonicalize(p).ok()).collect();
    for out in outputs.iter().flatten() {
        if let Ok(out) = fs::canonicalize(out) {
            if inputs.contains(&out) {
                return Err(usage(format!("output {} would overwrite an input", out.display())));
            }
        }
    }
    Ok(())
}

fn read_dataset_at(path: &Path) -> Result<SaccadeDataset> {
    read_dataset(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn read_model_at(path: &Path) -> Result<PredictionModel> {
    read_model(path).with_context(|| format!("reading model {}", path.display()))
}

fn read_means_at(path: &Path) -> Result<Vec<MeanProfile>> {
    read_means(path).with_context(|| format!("reading mean profiles {}", path.display()))
}

fn filter_label(dataset: SaccadeDataset, label: Option<&CategoryLabel>) -> Result<SaccadeDataset> {
    let Some(label) = label else { return Ok(dataset) };
    let kept: Vec<_> = dataset.profiles().iter().filter(|p| label.matches(&p.category)).cloned().collect();
    if kept.is_empty() {
        anyhow::bail!("no profiles labelled {label}");
    }
    Ok(SaccadeDataset::from_profiles(dataset.metadata.clone(), kept)?)
}

/// Opens `path` for writing, or stdout when absent.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    let mut w = output(Some(path))?;
    for r in &truth.records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn model_params(cfg: &Config, grid: &ModelGridArgs) -> Result<ModelParams> {
    let base = &cfg.model;
    let params = ModelParams {
        alpha_min: grid.alpha_min.unwrap_or(base.alpha_min),
        alpha_max: grid.alpha_max.unwrap_or(base.alpha_max),
        alpha_step: grid.alpha_step.unwrap_or(base.alpha_step),
        halfwidth: grid.halfwidth.unwrap_or(base.halfwidth),
        min_bin_count: grid.min_bin_count.unwrap_or(base.min_bin_count),
    };
    params.validate().map_err(|e| usage(e.to_string()))?;
    Ok(params)
}

pub fn detect(cfg: &Config, a: DetectArgs) -> Result<()> {
    if a.out.is_none() && a.traces.is_none() {
        return Err(usage("detect needs --out, --traces or both"));
    }
    check_outputs(&[&a.input], &[a.out.as_deref(), a.traces.as_deref()])?;
    let mut params = match &a.params {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<DetectionParams>(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => cfg.detection.clone(),
    };
    params.v_detect = a.v_detect.unwrap_or(params.v_detect);
    params.v_anchor = a.v_anchor.unwrap_or(params.v_anchor);
    params.min_amplitude = a.min_amplitude.unwrap_or(params.min_amplitude);
    params.validate().map_err(|e| usage(e.to_string()))?;
    let label = parse_label(a.label.as_deref())?.unwrap_or_else(CategoryLabel::none);

    let format = stream_format(&a.input, a.format.as_deref())?;
    let stream = read_gaze_stream(&a.input, format).with_context(|| format!("reading {}", a.input.display()))?;
    let traces = detect_saccades(&stream, &params);
    log::info!("{} saccades detected in {} samples", traces.len(), stream.len());

    if let Some(path) = &a.traces {
        write_traces(path, &traces)?;
    }
    if let Some(path) = &a.out {
        let mut profiles = Vec::with_capacity(traces.len());
        for t in &traces {
            match trace_to_profile(t, DEFAULT_DT) {
                Ok(p) => profiles.push(p.with_category(label.clone())),
                Err(e) => log::warn!("saccade at t={} ms skipped: {e}", t.anchor().t),
            }
        }
        let metadata = DatasetMetadata { source: a.input.display().to_string(), ..DatasetMetadata::default() };
        write_dataset(path, &SaccadeDataset::from_profiles(metadata, profiles)?)?;
    }
    Ok(())
}

pub fn mean(cfg: &Config, a: MeanArgs) -> Result<()> {
    check_outputs(&[&a.dataset], &[Some(&a.out)])?;
    let factor: Factor = parse_arg("factor", &a.factor)?;
    let halfwidth = a.halfwidth.unwrap_or(cfg.model.halfwidth);
    let dataset = read_dataset_at(&a.dataset)?;
    let mut means = Vec::new();
    let mut out = io::stdout().lock();
    writeln!(out, "amplitude,category,profiles,duration_ms,final_mean")?;
    for &center in &a.amplitudes {
        let window = AmplitudeWindow::new(center, halfwidth).map_err(|e| usage(e.to_string()))?;
        let found = category_means(&dataset, factor, window)?;
        if found.is_empty() {
            log::warn!("no profiles within {halfwidth} deg of {center} deg");
        }
        for m in found {
            writeln!(out, "{center},{},{},{},{}", m.category, m.source_count, m.duration(), m.amplitude())?;
            means.push(m);
        }
    }
    if means.is_empty() {
        anyhow::bail!("no mean profiles could be formed");
    }
    write_means(&a.out, &means)?;
    Ok(())
}

/// Splits means sorted by amplitude wherever consecutive amplitudes differ
/// by more than `gap`.
fn amplitude_groups(mut means: Vec<MeanProfile>, gap: f64) -> Vec<Vec<MeanProfile>> {
    means.sort_by(|a, b| a.amplitude().total_cmp(&b.amplitude()));
    let mut groups: Vec<Vec<MeanProfile>> = Vec::new();
    for m in means {
        match groups.last_mut() {
            Some(g) if m.amplitude() - g.last().expect("non-empty").amplitude() <= gap => g.push(m),
            _ => groups.push(vec![m]),
        }
    }
    groups
}

pub fn dissim(cfg: &Config, a: DissimArgs) -> Result<()> {
    let gap = a.window_gap.unwrap_or(2.0 * cfg.model.halfwidth);
    let means = read_means_at(&a.means)?;
    let mut by_factor: BTreeMap<Factor, Vec<MeanProfile>> = BTreeMap::new();
    for m in means {
        by_factor.entry(m.category.factor()).or_default().push(m);
    }
    let mut out = io::stdout().lock();
    writeln!(out, "factor,amplitude,categories,dissimilarity")?;
    let mut rows = 0;
    for (factor, means) in by_factor {
        for group in amplitude_groups(means, gap) {
            if group.len() < 2 {
                continue;
            }
            let amplitude = group.iter().map(|m| m.amplitude()).sum::<f64>() / group.len() as f64;
            let names: Vec<String> = group.iter().map(|m| m.category.value().to_string()).collect();
            let d = dissimilarity(&group)?;
            writeln!(out, "{factor},{amplitude:.3},{},{d}", names.join(";"))?;
            rows += 1;
        }
    }
    if rows == 0 {
        anyhow::bail!("no amplitude window holds two categories of one factor");
    }
    Ok(())
}

pub fn shear_fit(cfg: &Config, a: ShearFitArgs) -> Result<()> {
    check_outputs(&[&a.original, &a.target], &[a.out.as_deref()])?;
    let original = read_means_at(&a.original)?;
    let target = read_means_at(&a.target)?;
    let points = mean_shear_points(&original, &target, a.max_distance.unwrap_or(cfg.model.halfwidth), cfg.shear)?;
    let curve = fit_shear_curve(&points)?;
    log::info!("f(alpha) = {:.6} alpha + {:.6} over {} points", curve.a, curve.b, curve.len());
    write_json(a.out.as_deref(), &curve)
}

pub fn build_model(cfg: &Config, a: BuildModelArgs) -> Result<()> {
    check_outputs(&[&a.dataset], &[Some(&a.out)])?;
    let params = model_params(cfg, &a.grid)?;
    let label = parse_label(a.label.as_deref())?;
    let dataset = filter_label(read_dataset_at(&a.dataset)?, label.as_ref())?;
    let model = match PredictionModel::build(&dataset, &params) {
        Err(sackit::Error::NoValidBins) if a.grid.min_bin_count.is_none() && params.min_bin_count > 1 => {
            log::warn!(
                "no amplitude bin holds {} profiles; building from every non-empty bin instead",
                params.min_bin_count
            );
            PredictionModel::build(&dataset, &ModelParams { min_bin_count: 1, ..params })?
        }
        other => other?,
    };
    log::info!(
        "model with {} rows over {}..{} deg from {} profiles",
        model.row_count(),
        model.alpha_min(),
        model.alpha_max(),
        dataset.len()
    );
    write_model(&a.out, &model)?;
    Ok(())
}

pub fn shear_model(cfg: &Config, a: ShearModelArgs) -> Result<()> {
    let inputs: Vec<&Path> =
        [Some(a.model.as_path()), a.target.as_deref(), a.target_means.as_deref()].into_iter().flatten().collect();
    check_outputs(&inputs, &[Some(&a.out), a.curve.as_deref()])?;
    let model = read_model_at(&a.model)?;
    let mut params = cfg.adapt_params();
    params.model.alpha_min = model.alpha_min();
    params.model.alpha_max = model.alpha_max();
    params.model.alpha_step = model.alpha_step();
    params.min_target_count = a.min_target_count.unwrap_or(params.min_target_count);
    let targets: Vec<ShearTarget> = match (&a.target, &a.target_means) {
        (Some(path), _) => {
            let label = parse_label(a.label.as_deref())?;
            let sample = filter_label(read_dataset_at(path)?, label.as_ref())?;
            targets_from_sample(sample.profiles(), &params.model, params.min_target_count)?
        }
        (None, Some(path)) => read_means_at(path)?.into_iter().map(ShearTarget::from_mean).collect(),
        (None, None) => return Err(usage("shear-model needs --target or --target-means")),
    };
    let (sheared, curve) = model_shear(&model, &targets, &params)?;
    log::info!("f(alpha) = {:.6} alpha + {:.6} over {} targets", curve.a, curve.b, curve.len());
    write_model(&a.out, &sheared)?;
    if let Some(path) = &a.curve {
        write_json(Some(path), &curve)?;
    }
    Ok(())
}

pub fn shear_data(cfg: &Config, a: ShearDataArgs) -> Result<()> {
    let inputs: Vec<&Path> = [Some(a.dataset.as_path()), a.target.as_deref()].into_iter().flatten().collect();
    check_outputs(&inputs, &[Some(&a.out), a.curve.as_deref(), a.model.as_deref()])?;
    let params = cfg.adapt_params();
    let dataset = read_dataset_at(&a.dataset)?;
    let (sheared, curve) = match (&a.target, &a.target_label) {
        (Some(path), _) => data_shear_with_targets(&dataset, read_dataset_at(path)?.profiles(), &params)?,
        (None, Some(label)) => data_shear(&dataset, &parse_arg("category", label)?, &params)?,
        (None, None) => return Err(usage("shear-data needs --target or --target-label")),
    };
    log::info!("f(alpha) = {:.6} alpha + {:.6} over {} points", curve.a, curve.b, curve.len());
    write_dataset(&a.out, &sheared)?;
    if let Some(path) = &a.curve {
        write_json(Some(path), &curve)?;
    }
    if let Some(path) = &a.model {
        write_model(path, &PredictionModel::build(&sheared, &params.model)?)?;
    }
    Ok(())
}

pub fn predict(_cfg: &Config, a: PredictArgs) -> Result<()> {
    if !(a.t.is_finite() && a.d.is_finite()) || a.t < 0.0 {
        return Err(usage("--t must be a non-negative time and --d a finite displacement"));
    }
    let model = read_model_at(&a.model)?;
    let p = model.predict(a.t, a.d);
    if p.saturated {
        log::warn!("query outside the model's range; amplitude clamped");
    }
    println!("{:.3}", p.alpha);
    Ok(())
}

#[derive(Serialize)]
struct StreamPrediction {
    t: f64,
    x: f64,
    y: f64,
    alpha: f64,
    flag: sackit::predictor::Confidence,
}

pub fn predict_stream(cfg: &Config, a: PredictStreamArgs) -> Result<()> {
    check_outputs(&[&a.model, &a.input], &[a.out.as_deref()])?;
    let model = Arc::new(read_model_at(&a.model)?);
    let format = stream_format(&a.input, a.format.as_deref())?;
    let stream = read_gaze_stream(&a.input, format).with_context(|| format!("reading {}", a.input.display()))?;
    let mut predictor = Predictor::new(model, cfg.detection.clone())?;
    let mut w = output(a.out.as_deref())?;
    let mut count = 0;
    for sample in stream {
        if let Some(p) = predictor.feed(sample)? {
            let row = StreamPrediction { t: p.t, x: p.landing[0], y: p.landing[1], alpha: p.alpha, flag: p.confidence };
            serde_json::to_writer(&mut w, &row)?;
            writeln!(w)?;
            count += 1;
        }
    }
    w.flush()?;
    log::info!("{count} predictions written");
    Ok(())
}

pub fn synth(cfg: &Config, a: SynthArgs) -> Result<()> {
    if a.stream.is_some() && (a.out.is_some() || a.traces.is_some()) {
        return Err(usage("--stream cannot be combined with --out or --traces"));
    }
    let mut synth: SynthConfig = cfg.synth.clone();
    if let Some(seed) = a.seed {
        synth.seed = seed;
    }
    if let Some(g) = a.vertical_gamma {
        synth.categories = SynthConfig::orientation(g, a.vertical_weight).categories;
    }
    if let Some(sigma) = a.noise_sigma {
        synth.noise_sigma = sigma;
    }
    if a.noiseless {
        synth = synth.noiseless();
    }
    synth.validate().map_err(|e| usage(e.to_string()))?;
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }

    let truth = if let Some(path) = &a.stream {
        if !(a.fixation.is_finite() && a.fixation > 0.0) {
            return Err(usage("--fixation must be positive"));
        }
        let (samples, truth) = generate_stream(&synth, a.n, a.fixation)?;
        write_gaze_stream(path, StreamFormat::from_path(path), &samples)?;
        log::info!("{} samples with {} saccades written", samples.len(), a.n);
        truth
    } else {
        let corpus = generate(&synth, a.n)?;
        if let Some(path) = &a.out {
            write_dataset(path, &corpus.dataset)?;
        }
        if let Some(path) = &a.traces {
            write_traces(path, &corpus.traces)?;
        }
        log::info!("{} profiles written", corpus.dataset.len());
        corpus.truth
    };
    if let Some(path) = &a.truth {
        write_truth(path, &truth)?;
    }
    Ok(())
}

pub fn eval(_cfg: &Config, a: EvalArgs) -> Result<()> {
    check_outputs(&[&a.model, &a.test], &[a.json.as_deref(), a.error_csv.as_deref()])?;
    let model = read_model_at(&a.model)?;
    let label = parse_label(a.label.as_deref())?;
    let test = filter_label(read_dataset_at(&a.test)?, label.as_ref())?;
    let report = EvalReport { models: vec![evaluate_profiles(&model, test.profiles(), &a.name)?], sweep: Vec::new() };
    report.write_models_csv(io::stdout().lock())?;
    if let Some(path) = &a.error_csv {
        report.write_error_vs_time_csv(output(Some(path))?)?;
    }
    if let Some(path) = &a.json {
        write_json(Some(path), &report)?;
    }
    Ok(())
}

pub fn sweep(cfg: &Config, a: SweepArgs) -> Result<()> {
    check_outputs(&[&a.dataset], &[a.out.as_deref(), a.json.as_deref()])?;
    let label: CategoryLabel = parse_arg("category", &a.label)?;
    let strategies: Vec<Strategy> = if a.strategies.is_empty() {
        Strategy::ALL.to_vec()
    } else {
        a.strategies.iter().map(|s| parse_arg("strategy", s)).collect::<Result<_>>()?
    };
    let mut sweep_cfg = cfg.sweep.clone();
    if !a.n_values.is_empty() {
        sweep_cfg.n_values = a.n_values.clone();
    }
    sweep_cfg.reps = a.reps.unwrap_or(sweep_cfg.reps);
    sweep_cfg.seed = a.seed.unwrap_or(sweep_cfg.seed);
    if sweep_cfg.reps == 0 || sweep_cfg.n_values.contains(&0) {
        return Err(usage("--reps and every --n must be positive"));
    }
    let test_size = a.test_size.unwrap_or(cfg.experiment.test_size);
    let pool_size = a.pool_size.unwrap_or(cfg.experiment.pool_size);

    let dataset = read_dataset_at(&a.dataset)?;
    let parts = split(&dataset, &label, test_size, pool_size)?;
    let adapter = Adapter::new(parts.base, cfg.adapt_params())?;
    let mut report = EvalReport::default();
    for s in strategies {
        report.sweep.extend(run_sweep(&adapter, &parts.pool, &parts.test, s, &sweep_cfg)?);
    }
    report.write_sweep_csv(output(a.out.as_deref())?)?;
    if let Some(path) = &a.json {
        write_json(Some(path), &report)?;
    }
    Ok(())
}

pub fn plot_data(cfg: &Config, a: PlotDataArgs) -> Result<()> {
    let mut exp = cfg.experiment.clone();
    exp.saccades = a.saccades.unwrap_or(exp.saccades);
    exp.seed = a.seed.unwrap_or(exp.seed);
    exp.sweep.reps = a.reps.unwrap_or(exp.sweep.reps);
    if exp.saccades == 0 || exp.sweep.reps == 0 {
        return Err(usage("--saccades and --reps must be positive"));
    }
    let params = cfg.adapt_params();
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let dir = |name: &str| a.out_dir.join(name);

    let orientation = orientation_benchmark(&exp, &params)?;
    orientation.single.write_error_vs_time_csv(output(Some(&dir("direction_shift_error.csv")))?)?;
    EvalReport { models: Vec::new(), sweep: orientation.sweep.clone() }
        .write_sweep_csv(output(Some(&dir("personalized_vs_model.csv")))?)?;

    let users = users_experiment(&exp, &params)?;
    let mut w = output(Some(&dir("users_shift_error.csv")))?;
    writeln!(w, "user,gamma,average_mae,model_shear_mae,data_shear_mae,customized_mae")?;
    for r in &users {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.user, r.gamma, r.average_mae, r.model_shear_mae, r.data_shear_mae, r.customized_mae
        )?;
    }
    w.flush()?;

    let bias = bias_experiment(&exp, &params)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a sackit::experiment::ExperimentConfig,
        orientation: &'a sackit::experiment::OrientationResult,
        users: &'a [sackit::experiment::UserShiftRow],
        bias: &'a sackit::experiment::BiasResult,
    }
    write_json(
        Some(&dir("summary.json")),
        &Summary { config: &exp, orientation: &orientation, users: &users, bias: &bias },
    )?;
    log::info!("plot data written to {}", a.out_dir.display());
    Ok(())
}
