//! Command-line harness: identity suites, singular-series evaluation,
//! sieve counts and estimator experiments, with CSV or JSON output.

use std::io;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod output;

pub use output::Format;

/// Environment variable capping the bytes of one sieve window.
pub const WINDOW_BYTES_ENV: &str = "PSQF_WINDOW_BYTES";

#[derive(Debug, Parser)]
#[command(
    name = "psqf",
    version,
    about = "Primes in progressions plus square-free numbers"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Output format for result rows.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write rows to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0x5eed)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the exact identity suites.
    Verify(VerifyArgs),
    /// Sieve counts against the singular series over all residues.
    Compare(CompareArgs),
    /// Bilinear estimate of the Λ-weighted count.
    Estimate(EstimateArgs),
    /// Evaluate the singular series in both forms.
    Series(SeriesArgs),
    /// Count representations directly.
    Count(CountArgs),
    /// Spot-check the segmented square-free sieve.
    SieveSelftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Arith,
    Local,
    Estimator,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Corruption {
    /// Flip the sign of t(q).
    TSign,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    pub suite: SuiteArg,
    #[arg(long, default_value_t = 300)]
    pub r_max: u64,
    #[arg(long, default_value_t = 500)]
    pub a_max: u64,
    #[arg(long, default_value_t = 200)]
    pub mn_max: u64,
    /// Moduli bound for the closed forms of γ*, ρ, ρ*.
    #[arg(long, default_value_t = 400)]
    pub q_max: u64,
    /// Moduli bound for norms, cross products, b(q), η*, κ*.
    #[arg(long, default_value_t = 200)]
    pub q_small_max: u64,
    #[arg(long, default_value_t = 60)]
    pub q_average_max: u64,
    #[arg(long, default_value_t = 30)]
    pub qprime_max: u64,
    /// Values of N for N-dependent checks.
    #[arg(long = "n", value_delimiter = ',', default_values_t = [1000u64, 1155])]
    pub n_values: Vec<u64>,
    /// Random cases per estimator check.
    #[arg(long, default_value_t = 100)]
    pub cases: usize,
    #[arg(long, default_value_t = 10_000)]
    pub estimator_n_max: u64,
    #[arg(long, value_enum, hide = true)]
    pub corrupt: Option<Corruption>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long = "n", value_delimiter = ',', default_values_t = [1_000_000u64])]
    pub n_values: Vec<u64>,
    #[arg(long, default_value_t = 12)]
    pub q_max: u64,
    /// Only this modulus (overrides --q-max).
    #[arg(long)]
    pub q: Option<u64>,
    #[arg(long, default_value_t = psqf::series::DEFAULT_PRIME_CUTOFF)]
    pub p_cutoff: u64,
    /// Largest acceptable median of |R/(𝔖N) - 1|.
    #[arg(long, default_value_t = 0.05)]
    pub tolerance: f64,
    #[arg(long, env = WINDOW_BYTES_ENV)]
    pub window_bytes: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightArg {
    Exact,
    Norm,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[arg(long = "n", value_delimiter = ',', default_values_t = [100_000u64])]
    pub n_values: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    pub qprime: u64,
    #[arg(long, default_value_t = 1)]
    pub aprime: i64,
    #[arg(long, default_value_t = 8)]
    pub q1: u64,
    #[arg(long, default_value_t = 2)]
    pub q2: u64,
    #[arg(long, value_enum, default_value_t = WeightArg::Exact)]
    pub weights: WeightArg,
    /// C in the norm-form weights `N ‖η*‖² + C N^ε`.
    #[arg(long, default_value_t = 1e4)]
    pub norm_c: f64,
    /// ε in the norm-form weights.
    #[arg(long, default_value_t = 0.1)]
    pub norm_eps: f64,
    #[arg(long, default_value_t = psqf::series::DEFAULT_PRIME_CUTOFF)]
    pub p_cutoff: u64,
    /// Relative tolerance reported for ⟨f|g⟩ against [f|g] and 𝔖N.
    #[arg(long, default_value_t = 0.15)]
    pub tolerance: f64,
    #[arg(long, default_value_t = psqf::estimator::DEFAULT_MATERIALIZE_CAP)]
    pub max_materialize: u64,
    /// Emit per-modulus rows instead of one summary row per N.
    #[arg(long)]
    pub breakdown: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SeriesArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub a: i64,
    #[arg(long, default_value_t = 1)]
    pub q: u64,
    #[arg(long, default_value_t = psqf::series::DEFAULT_PRIME_CUTOFF)]
    pub p_cutoff: u64,
}

#[derive(Debug, Clone, Args)]
pub struct CountArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long, default_value_t = 1)]
    pub q: u64,
    /// Residue class; all reduced classes when absent.
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<i64>,
    #[arg(long, env = WINDOW_BYTES_ENV)]
    pub window_bytes: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 100_000_000)]
    pub lo: u64,
    #[arg(long, default_value_t = 100_000)]
    pub len: u64,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 1_000_000_000)]
    pub density_lo: u64,
    #[arg(long, default_value_t = 1_000_000)]
    pub density_len: u64,
    /// Relative tolerance of the square-free density against 6/π².
    #[arg(long, default_value_t = 1e-3)]
    pub density_tolerance: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] psqf::Error),
    #[error("{0}")]
    Usage(String),
    #[error("check failed: {0}")]
    Failed(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 1 failed check, 2 usage, 3 capacity.
    pub fn exit_code(&self) -> u8 {
        use psqf::Error as E;
        match self {
            CliError::Core(E::Capacity(_) | E::SieveLimitTooLarge(..) | E::Unfactored { .. }) => 3,
            CliError::Core(_) | CliError::Usage(_) => 2,
            CliError::Failed(_) | CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => 1,
        }
    }
}

/// Runs one parsed command inside a pool of the requested size.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Verify(a) => commands::verify(&cli.global, a),
        Command::Compare(a) => commands::compare(&cli.global, a),
        Command::Estimate(a) => commands::estimate(&cli.global, a),
        Command::Series(a) => commands::series(&cli.global, a),
        Command::Count(a) => commands::count(&cli.global, a),
        Command::SieveSelftest(a) => commands::sieve_selftest(&cli.global, a),
    })
}
