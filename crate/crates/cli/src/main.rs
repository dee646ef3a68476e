//! `gbsmock`: build GBS instances, generate mockup samples and score sample
//! sets against the ideal distribution.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.
//! `GBSMOCK_THREADS` caps the number of worker threads.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "gbsmock", version, about = "Marginal-based mockup samplers for Gaussian boson sampling")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load or generate an instance, build its covariance matrix and print a
    /// summary.
    Build(BuildArgs),
    /// Generate mockup samples for an instance.
    Sample(SampleArgs),
    /// Compare a sample file's marginals with the ideal ones.
    Analyze(AnalyzeArgs),
    /// Cross-entropy of two sample files under the ideal distribution.
    Compare(CompareArgs),
    /// Convert plain-text matrix and squeezing files to the instance format.
    ImportUstc(ImportArgs),
}

#[derive(Debug, Args)]
struct BuildArgs {
    /// Instance file to validate.
    #[arg(long, required_unless_present = "random", conflicts_with = "random")]
    instance: Option<PathBuf>,
    /// Draw a Haar-random interferometer instead.
    #[arg(long)]
    random: bool,
    /// Output modes of the random instance.
    #[arg(long, default_value_t = 10)]
    modes: usize,
    /// Input modes of the random instance (even; default: modes rounded up).
    #[arg(long)]
    inputs: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    squeezing_min: f64,
    #[arg(long, default_value_t = 1.5)]
    squeezing_max: f64,
    /// Uniform transmission applied to the random unitary.
    #[arg(long, default_value_t = 0.5)]
    transmission: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the instance here.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Uniform,
    Thermal,
    Tap,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Onsager {
    /// Reaction term weighted by the magnetisation (default).
    Weighted,
    /// Reaction term without the magnetisation factor.
    Unweighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct ProbabilityArgs {
    /// Patterns with more clicks than this warn (or fail with --strict).
    #[arg(long, default_value_t = 30)]
    click_budget: usize,
    /// Turn click-budget warnings into errors.
    #[arg(long)]
    strict: bool,
    /// Largest mode subset for a marginal table.
    #[arg(long, default_value_t = 20)]
    max_table_modes: usize,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    /// Marginal order matched by the greedy sampler.
    #[arg(long)]
    order: Option<usize>,
    /// Number of samples L.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gibbs sweeps discarded before the first TAP sample.
    #[arg(long, default_value_t = 15_000)]
    burn_in: usize,
    /// Gibbs sweeps between kept TAP samples.
    #[arg(long, default_value_t = 900)]
    thinning: usize,
    #[arg(long, value_enum, default_value_t = Onsager::Weighted)]
    onsager: Onsager,
    /// Independent runs (chains) the samples are split over; each gets its
    /// own derived seed. Output depends on this, not on the thread count.
    #[arg(long, default_value_t = 1)]
    chains: usize,
    /// Greedy only: draw each sample as one random row of a separate greedy
    /// run of this many rows.
    #[arg(long, value_name = "RUN_SIZE")]
    iid: Option<usize>,
    /// Keep this fraction of the generated samples, chosen at random.
    #[arg(long)]
    keep_fraction: Option<f64>,
    #[arg(long, short)]
    output: PathBuf,
    #[command(flatten)]
    probability: ProbabilityArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    Tvd,
    Kl,
    Ursell,
    Clicks,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Sample file to score.
    #[arg(long)]
    samples: PathBuf,
    /// Second sample file (typically the experiment) scored on the same
    /// subsets; enables bounds on the difference.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "tvd")]
    metric: Vec<Metric>,
    /// Subset sizes, as a range `a-b` or a list `a,b,c` (default 1-14,
    /// capped at the mode count).
    #[arg(long)]
    sizes: Option<String>,
    /// Upper bound on random subsets per size.
    #[arg(long, default_value_t = 10_000)]
    subsets: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Highest click-number moment for the clicks metric (at most 3).
    #[arg(long, default_value_t = 3)]
    click_order: usize,
    /// Directory for the `<metric>.<format>` reports.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    probability: ProbabilityArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    experiment: PathBuf,
    #[arg(long)]
    mockup: PathBuf,
    /// Only use samples with exactly this many clicks.
    #[arg(long)]
    clicks: Option<usize>,
    /// Marginalise onto the first M modes.
    #[arg(long, value_name = "M")]
    prefix: Option<usize>,
    /// At most this many samples per file, in file order.
    #[arg(long, default_value_t = 1000)]
    max_samples: usize,
    /// Fewer matching samples than this is an error.
    #[arg(long, default_value_t = 100)]
    min_samples: usize,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    probability: ProbabilityArgs,
}

#[derive(Debug, Args)]
struct ImportArgs {
    /// Real part of T (or the whole of T if real).
    #[arg(long)]
    real: PathBuf,
    #[arg(long)]
    imag: Option<PathBuf>,
    /// Squeezing parameters, one per pair of inputs.
    #[arg(long)]
    squeezing: PathBuf,
    /// Matrix files store inputs as rows.
    #[arg(long)]
    transpose: bool,
    #[arg(long, short)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
