//! `spherepp`: simulate point patterns on the sphere, compute summary
//! tables, run envelope tests and emit theoretical curves.
//!
//! Exit codes: 0 on success, 2 for invalid input, 3 for numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod options;

use options::{ModelArgs, WindowArg};

#[derive(Debug, Parser)]
#[command(name = "spherepp", version, about = "Point processes on the unit sphere")]
struct Cli {
    /// Worker threads for replicate-level parallelism (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate replicates of a model and write one pattern JSON each.
    Simulate(SimulateArgs),
    /// Summary tables (F, G, J, K, K_inhom) for pattern files.
    Summary(SummaryArgs),
    /// Monte Carlo envelope test of a pattern against a null model.
    Envelope(EnvelopeArgs),
    /// Theoretical K, pair correlation, kernel, correlation or spectrum.
    Theory(TheoryArgs),
    /// Equal-area projection coordinates of a pattern for plotting.
    Project(ProjectArgs),
}

/// Options shared by commands that evaluate summary functions.
#[derive(Debug, Args)]
pub struct GridArgs {
    /// Largest distance, in degrees.
    #[arg(long, default_value_t = 60.0)]
    tmax: f64,
    /// Number of grid points in [0, tmax].
    #[arg(long, default_value_t = 64)]
    grid_size: usize,
    /// `full` or `cap:LON,LAT,RADIUS` in degrees.
    #[arg(long, default_value = "full")]
    window: WindowArg,
    /// Normalization of K: pois_unbiased or fixed_n.
    #[arg(long, default_value = "pois_unbiased")]
    normalization: String,
    /// Reference points for the empty space function.
    #[arg(long, default_value_t = spherepp::envelopes::DEFAULT_F_GRID)]
    f_grid: usize,
    /// Write distances in degrees instead of radians.
    #[arg(long)]
    angle_degrees: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    n_reps: usize,
    /// Master seed; generated and recorded in the manifest when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Apply chi-square thinning with this kappa to every replicate.
    #[arg(long)]
    thin_kappa: Option<f64>,
    /// Multiquadric tau of the thinning field.
    #[arg(long, default_value_t = 1.0, requires = "thin_kappa")]
    field_tau: f64,
    /// Multiquadric delta of the thinning field.
    #[arg(long, default_value_t = 0.5, requires = "thin_kappa")]
    field_delta: f64,
}

#[derive(Debug, Args)]
pub struct SummaryArgs {
    /// Pattern JSON files.
    #[arg(required = true)]
    patterns: Vec<PathBuf>,
    /// Statistics: F, G, J, K, Kinhom (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "K")]
    stat: Vec<String>,
    #[command(flatten)]
    grid: GridArgs,
    /// Kernel bandwidth in degrees for the K_inhom intensity; a constant
    /// intensity is used when omitted.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Write all tables into one long-format file.
    #[arg(long)]
    long: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Global,
    Pointwise,
}

#[derive(Debug, Args)]
pub struct EnvelopeArgs {
    /// Observed pattern JSON.
    #[arg(long)]
    data: PathBuf,
    /// Null model; Poisson with the observed intensity when omitted.
    #[command(flatten)]
    null: ModelArgs,
    /// Statistics to concatenate: F, G, J, K.
    #[arg(long, value_delimiter = ',', default_value = "K,G")]
    stats: Vec<String>,
    #[arg(long, default_value_t = 199)]
    nsim: usize,
    #[arg(long, value_enum, default_value_t = Method::Global)]
    method: Method,
    /// Shorthand for `--method global`.
    #[arg(long, conflicts_with_all = ["method", "pointwise"])]
    global: bool,
    /// Shorthand for `--method pointwise`.
    #[arg(long, conflicts_with = "method")]
    pointwise: bool,
    /// Level of the global envelope.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Rank of the pointwise envelope; the two-sided level is 2k/(nsim+1).
    #[arg(long, default_value_t = 1)]
    rank: usize,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TheoryStat {
    #[value(name = "K", alias = "k")]
    K,
    Pcf,
    Kernel,
    Correlation,
    Spectrum,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t = TheoryStat::K)]
    stat: TheoryStat,
    /// Largest distance, in degrees.
    #[arg(long, default_value_t = 180.0)]
    tmax: f64,
    #[arg(long, default_value_t = 181)]
    grid_size: usize,
    /// K by quadrature of the pair correlation even when a closed form exists.
    #[arg(long)]
    numeric: bool,
    /// Write distances in degrees instead of radians.
    #[arg(long)]
    angle_degrees: bool,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Pattern JSON.
    pattern: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        let io = match e.downcast_ref::<spherepp::Error>() {
            Some(spherepp::Error::Io(io)) => Some(io),
            _ => e.downcast_ref::<std::io::Error>(),
        };
        io.is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<spherepp::Error>() {
        Some(e) if e.is_numeric() => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        anyhow::ensure!(jobs > 0, "--jobs must be positive");
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Summary(args) => commands::summary(args),
        Command::Envelope(args) => commands::envelope(args),
        Command::Theory(args) => commands::theory(args),
        Command::Project(args) => commands::project(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if broken_pipe(&err) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
