use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use rere::detector::{DetectionMode, ReReConfig};
use rere::eval::{EvalConfig, MatchMode};
use rere::ingest::DatasetFormat;
use rere::lstm::TrainConfig;

#[derive(Debug, Parser)]
#[command(name = "rere", version, about = "Streaming LSTM anomaly detection with self-adaptive thresholds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run detection over a file or standard input, writing a JSON Lines trace.
    Detect(DetectArgs),
    /// Score a trace against labeled anomalies.
    Evaluate(EvaluateArgs),
    /// Print a synthetic series, one value per line.
    Synth(SynthArgs),
    /// Time detection over a generated CPU-utilisation-like stream.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Dual,
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    /// Guess from the header line.
    Auto,
    Nab,
    Yahoo,
    Plain,
}

impl FormatArg {
    pub fn resolve(self, text: &str) -> DatasetFormat {
        match self {
            FormatArg::Nab => DatasetFormat::Nab,
            FormatArg::Yahoo => DatasetFormat::Yahoo,
            FormatArg::Plain => DatasetFormat::Plain,
            FormatArg::Auto => {
                let header = text.trim_start_matches('\u{feff}').lines().next().unwrap_or("").to_ascii_lowercase();
                if header.contains("is_anomaly") {
                    DatasetFormat::Yahoo
                } else if header.contains("timestamp") {
                    DatasetFormat::Nab
                } else {
                    DatasetFormat::Plain
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatchArg {
    Point,
    Event,
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    /// Look-back length b.
    #[arg(short = 'b', long, env = "RERE_LOOKBACK", default_value_t = 3)]
    pub lookback: usize,
    /// Threshold multiplier on the AARE standard deviation.
    #[arg(long, env = "RERE_SIGMA", default_value_t = 3.0)]
    pub sigma: f64,
    #[arg(long, env = "RERE_HIDDEN_UNITS", default_value_t = 10)]
    pub hidden_units: usize,
    #[arg(long, env = "RERE_LEARNING_RATE", default_value_t = 0.15)]
    pub learning_rate: f64,
    #[arg(long, env = "RERE_MAX_EPOCHS", default_value_t = 50)]
    pub max_epochs: usize,
    /// Floor for relative-error denominators.
    #[arg(long, env = "RERE_EPSILON", default_value_t = 1e-7)]
    pub epsilon: f64,
    #[arg(long, env = "RERE_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, env = "RERE_MODE", value_enum, default_value_t = ModeArg::Dual)]
    pub mode: ModeArg,
    /// Count the current AARE in detector 1's threshold.
    #[arg(long, env = "RERE_INCLUDE_CURRENT_AARE", action = ArgAction::Set, default_value_t = true)]
    pub include_current_aare: bool,
    /// Write elapsed_ms as 0 so repeated runs give byte-identical traces.
    #[arg(long, env = "RERE_NO_TIMING")]
    pub no_timing: bool,
    /// Run the two detectors of a step one after the other.
    #[arg(long, env = "RERE_SEQUENTIAL")]
    pub sequential: bool,
}

impl EngineArgs {
    pub fn config(&self) -> ReReConfig {
        ReReConfig {
            lookback: self.lookback,
            sigma_multiplier: self.sigma,
            epsilon: self.epsilon,
            hidden_units: self.hidden_units,
            train: TrainConfig {
                learning_rate: self.learning_rate,
                max_epochs: self.max_epochs,
                ..TrainConfig::default()
            },
            seed: self.seed,
            mode: match self.mode {
                ModeArg::Dual => DetectionMode::Dual,
                ModeArg::Single => DetectionMode::Single,
            },
            include_current_aare: self.include_current_aare,
            parallel: !self.sequential,
            measure_time: !self.no_timing,
            ..ReReConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct ScoringArgs {
    /// Half-width of the matching window, in time points.
    #[arg(long, env = "RERE_K", default_value_t = 7)]
    pub k: usize,
    #[arg(long = "match", env = "RERE_MATCH", value_enum, default_value_t = MatchArg::Point)]
    pub match_mode: MatchArg,
}

impl ScoringArgs {
    pub fn config(&self, allow_empty_labels: bool) -> EvalConfig {
        EvalConfig {
            k: self.k,
            mode: match self.match_mode {
                MatchArg::Point => MatchMode::Point,
                MatchArg::Event => MatchMode::Event,
            },
            allow_empty_labels,
        }
    }
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Input series; `-` or absent reads standard input.
    #[arg(env = "RERE_INPUT")]
    pub input: Option<PathBuf>,
    #[arg(long, env = "RERE_FORMAT", value_enum, default_value_t = FormatArg::Auto)]
    pub format: FormatArg,
    /// Label file (one index or timestamp per line) to score the run against.
    #[arg(long, env = "RERE_LABELS")]
    pub labels: Option<PathBuf>,
    /// Trace destination; standard output when absent.
    #[arg(short, long, env = "RERE_OUTPUT")]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub scoring: ScoringArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// JSON Lines trace written by `detect`.
    #[arg(env = "RERE_TRACE")]
    pub trace: PathBuf,
    #[arg(long, env = "RERE_LABELS")]
    pub labels: PathBuf,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    /// Accept an empty label file instead of failing.
    #[arg(long, env = "RERE_ALLOW_EMPTY_LABELS")]
    pub allow_empty_labels: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKindArg {
    Constant,
    Sine,
    LevelShift,
    Spike,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub kind: SynthKindArg,
    #[arg(short, long, env = "RERE_SYNTH_N")]
    pub n: usize,
    /// Level of the constant kind.
    #[arg(long, default_value_t = 10.0)]
    pub value: f64,
    #[arg(long, default_value_t = 10.0)]
    pub offset: f64,
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 50.0)]
    pub period: f64,
    /// Index of the spike or of the start of the level shift.
    #[arg(long)]
    pub at: Option<usize>,
    /// Spike multiplier.
    #[arg(long, default_value_t = 10.0)]
    pub magnitude: f64,
    #[arg(long, default_value_t = 10.0)]
    pub from: f64,
    #[arg(long, default_value_t = 12.0)]
    pub to: f64,
    /// Steps over which a level shift ramps; 0 is an abrupt step.
    #[arg(long, default_value_t = 0)]
    pub ramp: usize,
    /// Standard deviation of additive Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, env = "RERE_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Look-back the series is meant for; sets the minimum length 2b+2.
    #[arg(short = 'b', long, env = "RERE_LOOKBACK", default_value_t = 3)]
    pub lookback: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(short, long, default_value_t = 4000)]
    pub n: usize,
    /// Seed of the generated stream.
    #[arg(long, default_value_t = 1)]
    pub data_seed: u64,
    #[command(flatten)]
    pub engine: EngineArgs,
}
