use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "heralded-qkd",
    version,
    about = "Key rates of BB84 and SARG04 with weak coherent pulses or heralded single photons"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Threshold QBER, linearization factor and sifting constants.
    Threshold(Common),
    /// Heralding response q0, q1, q2 and its figures of merit.
    Detector(Common),
    /// Key rate at one transmission, optimized over lambda unless --lambda is given.
    Keyrate(KeyrateArgs),
    /// Optimized key rate over a transmission grid.
    Scan(Common),
    /// Closed-form and numerical minimum transmissions.
    Tmin(Common),
    /// Renormalized key rate over a (Q, y) grid.
    Contour(ContourArgs),
    /// Short-distance enhancement of N-stage multiplexing over binary heralding.
    CompareStages(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Wcp,
    Binary,
    Multiplexed,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand. Unset flags fall back to the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// bb84 or sarg04.
    #[arg(long)]
    pub protocol: Option<String>,
    #[arg(long, value_enum)]
    pub source: Option<SourceKind>,
    /// Splitter stages of the multiplexed detector.
    #[arg(long)]
    pub stages: Option<u32>,
    /// Heralding detector efficiency; a comma-separated list for compare-stages.
    #[arg(long, value_delimiter = ',')]
    pub eta_a: Option<Vec<f64>>,
    /// Transmission of each coupler stage.
    #[arg(long)]
    pub eta_c: Option<f64>,
    /// Dark-count probability per heralding detector.
    #[arg(long)]
    pub dark_a: Option<f64>,
    /// Dark-count probability per detector at Bob.
    #[arg(long)]
    pub dark_b: Option<f64>,
    #[arg(long)]
    pub q0: Option<f64>,
    #[arg(long)]
    pub q1: Option<f64>,
    #[arg(long)]
    pub q2: Option<f64>,
    /// Single transmission.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Points of the logarithmic transmission grid.
    #[arg(long)]
    pub points: Option<usize>,
    /// Upper bound of the pump-strength search.
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// Use the enumerated detector response instead of the closed form.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// TOML file with [protocol], [source], [channel], [solver] and [output] sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct KeyrateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Evaluate at this pump strength instead of optimizing.
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ContourArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0.25)]
    pub q_max: f64,
    #[arg(long, default_value_t = 51)]
    pub q_points: usize,
    #[arg(long, default_value_t = 50)]
    pub y_points: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    /// Largest stage count considered.
    #[arg(long, default_value_t = 6)]
    pub n_max: u32,
    /// Also fit optimized key rates to K = c T^2 over the transmission window.
    #[arg(long)]
    pub fit: bool,
}
