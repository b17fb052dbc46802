//! `vote-count`: basis tables, optimal-voter constructions, voter-count
//! selection with confidence bands, and simulation checks.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use votecount::construct::{DEFAULT_ALL_VOTE_CAP, DEFAULT_MEAN_ERROR};
use votecount::BandMethod;

pub const THREADS_ENV: &str = "VOTE_COUNT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "vote-count", version, about = "Error rates of random-subset majority voting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the basis table r(m, i, v) as `i,v,r`.
    Basis(BasisArgs),
    /// Distributions that make each vmin the error-minimizing voter count.
    Construct(ConstructArgs),
    /// Error curve `v,error` of a weight vector.
    Curve(CurveArgs),
    /// Pick the voter count from validation data and attach a confidence band.
    Select(SelectArgs),
    /// Run simulation checks; exits 1 if any check fails.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct BasisArgs {
    #[arg(long, default_value_t = 101)]
    m: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConstructMethod {
    /// Maximize the all-voting minus vmin error gap by linear programming.
    Lp,
    /// Two-point constructive distributions.
    Theorem4,
}

#[derive(Debug, Args)]
struct ConstructArgs {
    #[arg(long, default_value_t = 101)]
    m: usize,
    /// Odd voter counts: `7`, `1,3,9` or an inclusive range `1..99`.
    /// Defaults to every odd v below m for `lp` and up to m for `theorem4`.
    #[arg(long)]
    vmin: Option<String>,
    /// Mean classifier error imposed by the linear program.
    #[arg(long, default_value_t = DEFAULT_MEAN_ERROR)]
    p: f64,
    /// Upper limit on the all-voting error in the linear program.
    #[arg(long, default_value_t = DEFAULT_ALL_VOTE_CAP)]
    cap: f64,
    #[arg(long, value_enum, default_value_t = ConstructMethod::Lp)]
    method: ConstructMethod,
    /// Certificates CSV (stdout if omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Curves CSV `vmin,v,error`.
    #[arg(long)]
    curves: Option<PathBuf>,
    /// Weights CSV `vmin,i,w`.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurveArgs {
    /// Weights CSV, `i,w` or `vmin,i,w` as written by `construct --weights`.
    #[arg(long)]
    input: PathBuf,
    /// Which distribution to read from a `vmin,i,w` file.
    #[arg(long)]
    vmin: Option<usize>,
    /// Ensemble size; inferred from the largest listed index if omitted.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Estimator {
    Direct,
    Inference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Bound {
    DirectHoeffding,
    InferenceHoeffding,
    InferenceBoxLp,
}

impl From<Bound> for BandMethod {
    fn from(b: Bound) -> Self {
        match b {
            Bound::DirectHoeffding => BandMethod::DirectHoeffding,
            Bound::InferenceHoeffding => BandMethod::InferenceHoeffding,
            Bound::InferenceBoxLp => BandMethod::InferenceBoxLp,
        }
    }
}

#[derive(Debug, Args)]
struct SelectArgs {
    /// Error matrix `example_id,c0,c1,...` or histogram `error_count,frequency`;
    /// `-` reads stdin.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = io::InputFormat::Auto)]
    format: io::InputFormat,
    /// Ensemble size for histogram input.
    #[arg(long, default_value_t = 101)]
    m: usize,
    #[arg(long, value_enum, default_value_t = Estimator::Inference)]
    method: Estimator,
    #[arg(long, value_enum, default_value_t = Bound::InferenceBoxLp)]
    bound: Bound,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Seed for the random voters of the direct estimator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bisection tolerance of the binomial inversion bounds.
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    Theorem1,
    Coverage,
    Variance,
    Montecarlo,
    All,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    suite: SuiteArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replications per check; each suite has its own default.
    #[arg(long)]
    replications: Option<usize>,
    /// Ensemble size of the coverage and variance worlds.
    #[arg(long, default_value_t = 11)]
    m: usize,
    /// Validation set size (coverage default 500, variance default 50).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Envelope half-width in standard errors.
    #[arg(long, default_value_t = votecount::sim::DEFAULT_SIGMAS)]
    sigmas: f64,
    /// Report CSV (stdout if omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Exit status: 0 success, 1 a verification check failed, 2 bad input.
pub enum Outcome {
    Success,
    VerificationFailed,
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("{THREADS_ENV}={raw:?} is not a thread count"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| anyhow::anyhow!("cannot configure thread pool: {e}"))
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    configure_threads()?;
    match cli.command {
        Command::Basis(a) => commands::basis(a.m, a.output.as_deref()),
        Command::Construct(a) => commands::construct(&a),
        Command::Curve(a) => commands::curve(&a),
        Command::Select(a) => commands::select(&a),
        Command::Verify(a) => commands::verify(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
