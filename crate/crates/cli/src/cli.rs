use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pdetect", version, about = "Packet-detection analysis, simulation and benchmarking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form false-alarm and missed-detection probabilities.
    Analytic(AnalyticArgs),
    /// Monte Carlo false-alarm or miss rate.
    Simulate(SimulateArgs),
    /// Empirical moments of a_R, b and r against closed form.
    Moments(MomentsArgs),
    /// MD-FA curves and WFA-versus-WMD verdicts, for given SNRs or a dataset.
    Benchmark(BenchmarkArgs),
    /// Write a seeded synthetic SNR dataset.
    SynthDataset(SynthArgs),
    /// Regenerate golden fixtures used by the regression tests.
    Fixtures(FixturesArgs),
}

#[derive(Debug, Args)]
pub struct SnrArgs {
    /// Per-antenna SNRs in dB, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "snr")]
    pub snr_db: Option<Vec<f64>>,
    /// Per-antenna linear SNRs, comma separated.
    #[arg(long, alias = "gamma", value_delimiter = ',', allow_hyphen_values = true)]
    pub snr: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Wfa,
    Iwmd,
    Single,
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    #[arg(long, default_value_t = 16, value_parser = parse_eta)]
    pub eta: usize,
    /// Threshold in (0, 1).
    #[arg(long, value_parser = parse_rho, conflicts_with = "rho_range")]
    pub rho: Option<f64>,
    /// Evenly spaced thresholds as `lo:hi:n`.
    #[arg(long)]
    pub rho_range: Option<String>,
    #[command(flatten)]
    pub snr: SnrArgs,
    /// Explicit combining weights, comma separated (rescaled to sum to one).
    #[arg(long, value_delimiter = ',', conflicts_with = "scheme")]
    pub weights: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    ScAbs,
    RpReal,
    CompensatedCombined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HypothesisArg {
    Noise,
    Packet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PreambleArg {
    Qpsk,
    Chirp,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of trials; scientific notation such as `1e7` is accepted.
    #[arg(long, value_parser = parse_count)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = MetricArg::CompensatedCombined)]
    pub metric: MetricArg,
    #[arg(long, value_enum)]
    pub hypothesis: HypothesisArg,
    #[arg(long, default_value_t = 16, value_parser = parse_eta)]
    pub eta: usize,
    #[arg(long, value_parser = parse_rho)]
    pub rho: f64,
    #[command(flatten)]
    pub snr: SnrArgs,
    #[arg(long, value_delimiter = ',', conflicts_with = "scheme")]
    pub weights: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long, value_enum, default_value_t = PreambleArg::Qpsk)]
    pub preamble: PreambleArg,
    /// Run S&C and its real-part variant on the same noise and report both.
    #[arg(long, conflicts_with_all = ["metric", "weights", "scheme"])]
    pub paired: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[arg(long, default_value_t = 1.0)]
    pub power: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 16, value_parser = parse_eta)]
    pub eta: usize,
    #[arg(long, default_value_t = 0.2, value_parser = parse_rho)]
    pub rho: f64,
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Analytic,
    Montecarlo,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub snr: SnrArgs,
    /// Dataset CSV (`group,antenna,measurement,day,snr_db`) for a full campaign.
    #[arg(long, conflicts_with_all = ["snr_db", "snr"])]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-6, value_parser = parse_prob)]
    pub pfa_max: f64,
    #[arg(long, default_value_t = 1e-4, value_parser = parse_prob)]
    pub pmd_max: f64,
    /// Threshold grid as `lo:hi:n`.
    #[arg(long, default_value = "0.05:0.95:512")]
    pub grid: String,
    #[arg(long, default_value_t = 16, value_parser = parse_eta)]
    pub eta: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// P-WMD estimation draws per threshold.
    #[arg(long, default_value_t = 200)]
    pub draws: usize,
    /// P-WMD interference power as a multiple of the noise power.
    #[arg(long, default_value_t = 0.5)]
    pub interference: f64,
    /// Antennas sampled from each group per measurement (dataset mode).
    #[arg(long, default_value_t = 2)]
    pub per_group: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Analytic)]
    pub mode: ModeArg,
    /// Trials per threshold in Monte Carlo mode.
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    pub trials: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_parser = parse_count, default_value = "1000")]
    pub measurements: u64,
    #[arg(long, default_value_t = 4)]
    pub groups: usize,
    #[arg(long, default_value_t = 8)]
    pub antennas: u32,
    #[arg(long, default_value_t = 4)]
    pub days: u32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_rho(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("threshold must lie in (0, 1), got {v}"))
    }
}

fn parse_prob(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("probability must lie in (0, 1), got {v}"))
    }
}

fn parse_eta(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        Ok(_) => Err("eta must be at least 1".into()),
        Err(e) => Err(e.to_string()),
    }
}

/// Positive integer, also written as `1e7`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return if v >= 1 { Ok(v) } else { Err("count must be at least 1".into()) };
    }
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a count"))?;
    if v >= 1.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(format!("'{s}' is not a positive integer"))
    }
}

/// `lo:hi:n` grid specification.
pub fn parse_grid(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid '{s}' must look like lo:hi:n"));
    }
    let lo = parts[0].parse::<f64>().map_err(|e| format!("grid lower bound: {e}"))?;
    let hi = parts[1].parse::<f64>().map_err(|e| format!("grid upper bound: {e}"))?;
    let n = parts[2].parse::<usize>().map_err(|e| format!("grid size: {e}"))?;
    Ok((lo, hi, n))
}
