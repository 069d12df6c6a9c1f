use std::path::PathBuf;

use caa_core::classifier::LrSchedule;
use caa_core::fingerprint::FingerprintMode;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "caa",
    version,
    about = "Chaotic antenna array RF-fingerprint simulator"
)]
pub struct Cli {
    /// Run training on a single thread.
    #[arg(long, global = true)]
    pub deterministic: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a labelled corpus and write `<out>.caad` plus its manifest.
    Generate(GenerateArgs),
    /// Train CNN-3 on the train/val splits of a corpus.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split of a corpus.
    Eval(EvalArgs),
    /// Run statistical validation suites.
    Stats(StatsArgs),
    /// Emit a polar phase map and the phase histogram as SVG and CSV.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Caa,
    Feedline,
    Traditional,
}

impl From<ModeArg> for FingerprintMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Caa => FingerprintMode::Geometry,
            ModeArg::Feedline => FingerprintMode::Feedline,
            ModeArg::Traditional => FingerprintMode::Traditional,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 300, value_parser = clap::value_parser!(u32).range(1..))]
    pub devices: u32,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub sessions: u32,
    /// Samples per element burst.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u32).range(1..))]
    pub samples: u32,
    #[arg(long, value_enum, default_value_t = ModeArg::Caa)]
    pub mode: ModeArg,
    /// Receive SNR in dB; `inf` disables noise.
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    pub snr_db: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output base path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    Constant,
    Cosine,
}

impl From<ScheduleArg> for LrSchedule {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::Constant => LrSchedule::Constant,
            ScheduleArg::Cosine => LrSchedule::Cosine,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Corpus base path (without `.caad`).
    #[arg(long)]
    pub data: PathBuf,
    /// Output base path; writes `<out>.caam`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 8)]
    pub patience: usize,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Cosine)]
    pub schedule: ScheduleArg,
    #[arg(long, default_value_t = 0.0)]
    pub weight_decay: f64,
    /// Filters in each convolution layer.
    #[arg(long, default_value_t = 64)]
    pub filters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// Output base path; writes `<out>.confusion.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    PhaseUniformity,
    ChannelAutocorr,
    RayleighKs,
    Snr,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    #[arg(long, default_value_t = 1200)]
    pub antennas: u64,
    /// Independent traces for the autocorrelation and power checks.
    #[arg(long, default_value_t = 400)]
    pub traces: usize,
    /// Independent draws for the envelope test.
    #[arg(long, default_value_t = 5000)]
    pub draws: usize,
    /// Sessions measured by the SNR suite.
    #[arg(long, default_value_t = 3000)]
    pub snr_sessions: u32,
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    pub snr_db: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output base path for the report.
    #[arg(long, default_value = "stats")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[arg(long, default_value_t = 0)]
    pub antenna_id: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Caa)]
    pub mode: ModeArg,
    /// Grid step in degrees, for both theta and phi.
    #[arg(long, default_value_t = 2.5)]
    pub grid_resolution: f64,
    /// Antennas in the phase histogram.
    #[arg(long, default_value_t = 1200)]
    pub antennas: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output base path.
    #[arg(long)]
    pub out: PathBuf,
}
