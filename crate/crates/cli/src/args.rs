use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qwalk_core::cv::ModelParams;
use qwalk_core::decoherence::DephasingRate;
use qwalk_core::readout::{Protocol, Tier};
use qwalk_core::{CoinVector, C64};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "qwalk",
    version,
    about = "Discrete-time quantum walks on a line and a four-site ring"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Position distribution of the walk on the integer line
    Line(WalkArgs),
    /// Site distribution of the walk on the four-site ring
    Circle(WalkArgs),
    /// Line walk in the trapped-ion oscillator model, binned by position
    CvLine(CvArgs),
    /// Circle walk in phase space, projected on the four site coherent states
    CvCircle(CvArgs),
    /// Wigner function of the motional state after an oscillator-model walk
    Wigner(WignerArgs),
    /// Coin-readout curve for the line protocol
    ReadoutLine(ReadoutArgs),
    /// Coin-readout curve for the circle protocol
    ReadoutCircle(ReadoutArgs),
    /// Fit the dephasing rate to a readout curve file
    Estimate(EstimateArgs),
    /// Run a grid over step counts and dephasing rates
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TierArg {
    Discrete,
    Cv,
}

impl From<TierArg> for Tier {
    fn from(t: TierArg) -> Tier {
        match t {
            TierArg::Discrete => Tier::Discrete,
            TierArg::Cv => Tier::Cv,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Line,
    Circle,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Protocol {
        match p {
            ProtocolArg::Line => Protocol::Line,
            ProtocolArg::Circle => Protocol::Circle,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WalkKind {
    Line,
    Circle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Line,
    Circle,
    CvLine,
    CvCircle,
    ReadoutLine,
    ReadoutCircle,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Line => "line",
            SweepKind::Circle => "circle",
            SweepKind::CvLine => "cv-line",
            SweepKind::CvCircle => "cv-circle",
            SweepKind::ReadoutLine => "readout-line",
            SweepKind::ReadoutCircle => "readout-circle",
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; the artifact goes to stdout when omitted
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Accepted for reproducible scripting; every mode here is deterministic
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct WalkSpec {
    /// Number of walk steps N
    #[arg(long, allow_negative_numbers = true)]
    pub steps: i64,
    /// Initial coin: down, up, symmetric, or "re,im,re,im" for (↓, ↑)
    #[arg(long, value_parser = parse_coin)]
    pub coin: Option<CoinVector>,
    /// Coin phase-flip probability per step
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub dephasing: f64,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Fock-space truncation
    #[arg(long, default_value_t = 128, allow_negative_numbers = true)]
    pub fock_dim: i64,
    /// Circle radius in phase space
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub alpha0: f64,
}

#[derive(Debug, Args)]
pub struct WalkArgs {
    #[command(flatten)]
    pub walk: WalkSpec,
    /// Classical random walk instead of the quantum one
    #[arg(long)]
    pub classical: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub walk: WalkSpec,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct WignerArgs {
    #[command(flatten)]
    pub walk: WalkSpec,
    /// Which oscillator-model walk prepares the state
    #[arg(long, value_enum, default_value_t = WalkKind::Line)]
    pub walk_kind: WalkKind,
    /// Grid points per axis
    #[arg(long, default_value_t = 121, allow_negative_numbers = true)]
    pub points: i64,
    /// Half-width of the square grid in x and p
    #[arg(long, default_value_t = 8.0, allow_negative_numbers = true)]
    pub extent: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReadoutArgs {
    #[command(flatten)]
    pub walk: WalkSpec,
    #[arg(long, value_enum, default_value_t = TierArg::Discrete)]
    pub tier: TierArg,
    /// Circle only: choose the kick sign by the first outcome
    #[arg(long)]
    pub conditioned: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Readout curve (CSV `step,p_down`, or JSON with a .json extension)
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Line)]
    pub protocol: ProtocolArg,
    #[arg(long, value_parser = parse_coin)]
    pub coin: Option<CoinVector>,
    #[arg(long, value_enum, default_value_t = TierArg::Discrete)]
    pub tier: TierArg,
    #[arg(long)]
    pub conditioned: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value_t = SweepKind::Line)]
    pub kind: SweepKind,
    /// Comma-separated step counts
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_negative_numbers = true
    )]
    pub steps: Vec<i64>,
    /// Comma-separated dephasing rates
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0",
        allow_negative_numbers = true
    )]
    pub dephasing: Vec<f64>,
    #[arg(long, value_parser = parse_coin)]
    pub coin: Option<CoinVector>,
    #[arg(long, value_enum, default_value_t = TierArg::Discrete)]
    pub tier: TierArg,
    #[arg(long)]
    pub classical: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output directory
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

pub fn parse_coin(token: &str) -> Result<CoinVector, String> {
    match token.trim() {
        "down" => Ok(CoinVector::DOWN),
        "up" => Ok(CoinVector::UP),
        "symmetric" => Ok(CoinVector::symmetric()),
        other => {
            let parts: Vec<&str> = other.split(',').map(str::trim).collect();
            let nums: Option<Vec<f64>> = parts.iter().map(|p| p.parse().ok()).collect();
            match nums.as_deref() {
                Some(&[a, b, c, d]) if parts.len() == 4 => {
                    Ok(CoinVector::new(C64::new(a, b), C64::new(c, d)))
                }
                _ => Err(format!(
                    "expected down, up, symmetric or \"re,im,re,im\", got `{other}`"
                )),
            }
        }
    }
}

pub fn steps(value: i64) -> Result<usize, CliError> {
    usize::try_from(value).map_err(|_| {
        CliError::range(
            "steps",
            format!("must be a non-negative integer, got {value}"),
        )
    })
}

pub fn dephasing(value: f64) -> Result<DephasingRate, CliError> {
    DephasingRate::new(value)
        .map_err(|_| CliError::range("dephasing", format!("must lie in [0, 1], got {value}")))
}

pub fn coin(value: Option<CoinVector>, default: CoinVector) -> Result<CoinVector, CliError> {
    let coin = value.unwrap_or(default);
    coin.ensure_normalized()
        .map_err(|e| CliError::range("coin", e.to_string()))?;
    Ok(coin)
}

impl ModelArgs {
    pub fn params(&self) -> Result<ModelParams, CliError> {
        let fock_dim = usize::try_from(self.fock_dim)
            .ok()
            .filter(|&d| d >= 2)
            .ok_or_else(|| {
                CliError::range(
                    "fock-dim",
                    format!("must be at least 2, got {}", self.fock_dim),
                )
            })?;
        Ok(ModelParams::with_fock_dim(fock_dim))
    }

    pub fn alpha0(&self) -> Result<f64, CliError> {
        if self.alpha0 > 0.0 && self.alpha0.is_finite() {
            Ok(self.alpha0)
        } else {
            Err(CliError::range(
                "alpha0",
                format!("must be positive, got {}", self.alpha0),
            ))
        }
    }
}
