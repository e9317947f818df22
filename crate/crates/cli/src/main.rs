//! `sackit`: saccade detection, landing-prediction models and their
//! shear-based adaptation from the command line.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data or runtime errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::UsageError;
use crate::config::Config;

#[derive(Debug, Parser)]
#[command(name = "sackit", version, about = "Saccade landing prediction and shear-based model adaptation")]
struct Cli {
    /// TOML config file; defaults to $SACKIT_CONFIG when set.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// More diagnostics on stderr (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Only report errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect saccades in a gaze stream and store their profiles.
    Detect(DetectArgs),
    /// Average profiles per category inside amplitude windows.
    Mean(MeanArgs),
    /// Dissimilarity between the category means of each factor (CSV on stdout).
    Dissim(DissimArgs),
    /// Fit the shear curve between original and target mean profiles.
    ShearFit(ShearFitArgs),
    /// Build a prediction model from a profile dataset.
    BuildModel(BuildModelArgs),
    /// Shear a model's rows toward calibration saccades.
    ShearModel(ShearModelArgs),
    /// Shear a dataset toward target saccades.
    ShearData(ShearDataArgs),
    /// Predict the amplitude from elapsed time and displacement.
    Predict(PredictArgs),
    /// Run the online predictor over a gaze stream.
    PredictStream(PredictStreamArgs),
    /// Generate a synthetic corpus with ground truth.
    Synth(SynthArgs),
    /// Score a model on a test dataset.
    Eval(EvalArgs),
    /// Bootstrap sweep of adaptation strategies over calibration size.
    Sweep(SweepArgs),
    /// Run the synthetic benchmarks and write plot-ready CSV files.
    PlotData(PlotDataArgs),
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Gaze stream (JSONL or CSV).
    #[arg(long)]
    pub input: PathBuf,
    /// Stream format; guessed from the extension when omitted.
    #[arg(long, value_parser = ["jsonl", "csv"])]
    pub format: Option<String>,
    /// TOML file holding detection parameters only.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Output dataset of resampled profiles.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output container of raw traces.
    #[arg(long)]
    pub traces: Option<PathBuf>,
    /// Category assigned to every detected saccade, e.g. "orientation:vertical".
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub v_detect: Option<f64>,
    #[arg(long)]
    pub v_anchor: Option<f64>,
    #[arg(long)]
    pub min_amplitude: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MeanArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Factor whose categories are averaged separately.
    #[arg(long, default_value = "none")]
    pub factor: String,
    /// Window centres in degrees; one mean per category and window.
    #[arg(long = "amplitude", alias = "alpha", required = true, value_delimiter = ',')]
    pub amplitudes: Vec<f64>,
    /// Window half-width in degrees.
    #[arg(long)]
    pub halfwidth: Option<f64>,
    /// Output container of mean profiles.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DissimArgs {
    /// Container of mean profiles.
    #[arg(long)]
    pub means: PathBuf,
    /// Means whose amplitudes differ by more than this many degrees belong
    /// to different windows; defaults to twice the model half-width.
    #[arg(long)]
    pub window_gap: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ShearFitArgs {
    /// Container of mean profiles of all saccades.
    #[arg(long)]
    pub original: PathBuf,
    /// Container of mean profiles of the target category.
    #[arg(long)]
    pub target: PathBuf,
    /// Largest amplitude distance, in degrees, between paired means;
    /// defaults to the model half-width.
    #[arg(long)]
    pub max_distance: Option<f64>,
    /// Output JSON {a, b, points}; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelGridArgs {
    #[arg(long)]
    pub alpha_min: Option<f64>,
    #[arg(long)]
    pub alpha_max: Option<f64>,
    #[arg(long)]
    pub alpha_step: Option<f64>,
    #[arg(long)]
    pub halfwidth: Option<f64>,
    #[arg(long)]
    pub min_bin_count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BuildModelArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Only use profiles of this category.
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, default_value = "model.sackit")]
    pub out: PathBuf,
    #[command(flatten)]
    pub grid: ModelGridArgs,
}

#[derive(Debug, Args)]
pub struct ShearModelArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset of calibration saccades of the target category.
    #[arg(long, required_unless_present = "target_means", conflicts_with = "target_means")]
    pub target: Option<PathBuf>,
    /// Container of target mean profiles, used at their own amplitudes.
    #[arg(long)]
    pub target_means: Option<PathBuf>,
    /// Only use calibration saccades of this category.
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the fitted shear curve as JSON.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long)]
    pub min_target_count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ShearDataArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Dataset of target saccades.
    #[arg(long, required_unless_present = "target_label", conflicts_with = "target_label")]
    pub target: Option<PathBuf>,
    /// Use the dataset's own profiles of this category as targets.
    #[arg(long)]
    pub target_label: Option<String>,
    /// Output dataset of sheared profiles.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the fitted shear curve as JSON.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Also build a model from the sheared profiles.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Elapsed time since the saccade anchor, in ms.
    #[arg(long, allow_negative_numbers = true)]
    pub t: f64,
    /// Displacement since the anchor, in degrees.
    #[arg(long, allow_negative_numbers = true)]
    pub d: f64,
}

#[derive(Debug, Args)]
pub struct PredictStreamArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Gaze stream (JSONL or CSV).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = ["jsonl", "csv"])]
    pub format: Option<String>,
    /// Output JSONL of predictions {t, x, y, alpha, flag}; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of saccades.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Output dataset of profiles.
    #[arg(long, required_unless_present = "stream")]
    pub out: Option<PathBuf>,
    /// Output gaze stream with fixations between saccades (JSONL or CSV).
    #[arg(long)]
    pub stream: Option<PathBuf>,
    /// Fixation between saccades of the stream, in ms.
    #[arg(long, default_value_t = 400.0)]
    pub fixation: f64,
    /// Output container of the raw traces.
    #[arg(long)]
    pub traces: Option<PathBuf>,
    /// Output JSONL of ground-truth records.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mix horizontal saccades with vertical ones dilated by this factor.
    #[arg(long)]
    pub vertical_gamma: Option<f64>,
    /// Share of vertical saccades when --vertical-gamma is given.
    #[arg(long, default_value_t = 0.3)]
    pub vertical_weight: f64,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Drop tracker noise and sample loss.
    #[arg(long)]
    pub noiseless: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset of test saccades.
    #[arg(long)]
    pub test: PathBuf,
    /// Only score test saccades of this category.
    #[arg(long)]
    pub label: Option<String>,
    /// Name of the model in the report.
    #[arg(long, default_value = "model")]
    pub name: String,
    /// Output JSON summary.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Output CSV of error against normalized elapsed time.
    #[arg(long)]
    pub error_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Dataset split into base corpus, calibration pool and test set.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Category adapted to.
    #[arg(long, default_value = "orientation:vertical")]
    pub label: String,
    #[arg(long)]
    pub test_size: Option<usize>,
    #[arg(long)]
    pub pool_size: Option<usize>,
    /// Strategies to sweep; all when omitted.
    #[arg(long = "strategy", value_delimiter = ',')]
    pub strategies: Vec<String>,
    /// Calibration sizes.
    #[arg(long = "n", value_delimiter = ',')]
    pub n_values: Vec<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output JSON summary.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotDataArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub saccades: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => "error",
        (false, 0) => "warn",
        (false, 1) => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Detect(a) => commands::detect(&cfg, a),
        Command::Mean(a) => commands::mean(&cfg, a),
        Command::Dissim(a) => commands::dissim(&cfg, a),
        Command::ShearFit(a) => commands::shear_fit(&cfg, a),
        Command::BuildModel(a) => commands::build_model(&cfg, a),
        Command::ShearModel(a) => commands::shear_model(&cfg, a),
        Command::ShearData(a) => commands::shear_data(&cfg, a),
        Command::Predict(a) => commands::predict(&cfg, a),
        Command::PredictStream(a) => commands::predict_stream(&cfg, a),
        Command::Synth(a) => commands::synth(&cfg, a),
        Command::Eval(a) => commands::eval(&cfg, a),
        Command::Sweep(a) => commands::sweep(&cfg, a),
        Command::PlotData(a) => commands::plot_data(&cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.verbose, cli.quiet);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                eprintln!("run `sackit --help` for usage");
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
