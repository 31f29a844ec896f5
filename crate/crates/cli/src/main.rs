use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use fillroute_core::model::ModelTag;

mod commands;

#[derive(Debug, Parser)]
#[command(name = "fillroute", version, about = "Predictive waste collection planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic store: containers, vehicles, history and depot.
    GenInstance(GenInstanceArgs),
    /// Build the distance and duration matrices of a store.
    BuildMatrix(BuildMatrixArgs),
    /// Forecast every container for one or more days.
    Forecast(ForecastArgs),
    /// Score a model on the last days of the history.
    Backtest(BacktestArgs),
    /// Forecast, select and route one day.
    Plan(PlanArgs),
    /// Compare a stored plan with a baseline routes file.
    Compare(CompareArgs),
    /// Serve the HTTP interface.
    Serve(ServeArgs),
    /// Solve a small selection exactly and with the heuristic.
    SolveOracle(SolveOracleArgs),
}

#[derive(Debug, Args)]
struct GenInstanceArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 217)]
    containers: usize,
    #[arg(long, default_value_t = 9)]
    small_only: usize,
    /// Containers calibrated above the optional threshold on the planning day.
    /// Defaults to 77 of 217, scaled to the container count.
    #[arg(long)]
    selected: Option<usize>,
    #[arg(long, default_value_t = 11)]
    months: u32,
    #[arg(long, default_value_t = 1700.0)]
    small_capacity: f64,
    #[arg(long, default_value_t = 2000.0)]
    big_capacity: f64,
    /// Container capacity, kg.
    #[arg(long, default_value_t = 75.0)]
    capacity: f64,
    /// Unload time per container, seconds.
    #[arg(long, default_value_t = 210.0)]
    unload_time: f64,
    #[arg(long, default_value = "2025-01-01")]
    start: NaiveDate,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct BuildMatrixArgs {
    #[arg(long)]
    store: PathBuf,
    /// Defaults to the store's matrix directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = fillroute_core::costmatrix::DEFAULT_DETOUR_FACTOR)]
    detour: f64,
    #[arg(long, default_value_t = fillroute_core::costmatrix::DEFAULT_SPEED_MPS)]
    speed: f64,
    /// Factor applied to every entry above the diagonal.
    #[arg(long, default_value_t = 1.1)]
    asymmetry: f64,
}

#[derive(Debug, Clone, Args)]
struct ModelArgs {
    #[arg(long, default_value = "gp")]
    model: ModelTag,
    /// Number of lagged daily rates per feature row.
    #[arg(long)]
    window: Option<usize>,
    /// GP hyperparameter grid, applied to signal sd, length scale and noise.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// SVR regularisation constant.
    #[arg(long)]
    svr_c: Option<f64>,
    /// SVR tube half-width.
    #[arg(long)]
    svr_epsilon: Option<f64>,
}

#[derive(Debug, Args)]
struct ForecastArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    date: NaiveDate,
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BacktestArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long, default_value_t = 30)]
    horizon: usize,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AcceptanceArg {
    Greedy,
    Threshold,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuinBaseArg {
    Best,
    FreshRandom,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum UnassignArg {
    CapacityOnly,
    Profitable,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NacModeArg {
    All,
    Mandatory,
}

#[derive(Debug, Clone, Args)]
struct SolverArgs {
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    ruin_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    acceptance: Option<AcceptanceArg>,
    #[arg(long, value_enum)]
    ruin_base: Option<RuinBaseArg>,
    #[arg(long, value_enum)]
    unassign: Option<UnassignArg>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    date: NaiveDate,
    #[arg(long)]
    mandatory_threshold: Option<f64>,
    #[arg(long)]
    optional_threshold: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    force_include: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    force_exclude: Vec<String>,
    /// Compare fills with `>=` instead of `>`.
    #[arg(long)]
    inclusive: bool,
    #[arg(long, value_enum)]
    nac_mode: Option<NacModeArg>,
    #[arg(long)]
    penalty: Option<f64>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    plan: String,
    /// Comma-delimited routes file: vehicle id then ordered container ids.
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: std::net::SocketAddr,
}

#[derive(Debug, Args)]
struct SolveOracleArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long, value_delimiter = ',', conflicts_with = "all_containers")]
    containers: Vec<String>,
    #[arg(long)]
    all_containers: bool,
    /// Day whose forecast supplies the demand; defaults to the day after the
    /// history ends.
    #[arg(long)]
    date: Option<NaiveDate>,
    #[arg(long, default_value = "linear")]
    model: ModelTag,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenInstance(a) => commands::gen_instance(a),
        Command::BuildMatrix(a) => commands::build_matrix(a),
        Command::Forecast(a) => commands::forecast(a),
        Command::Backtest(a) => commands::backtest(a),
        Command::Plan(a) => commands::plan(a),
        Command::Compare(a) => commands::compare(a),
        Command::Serve(a) => commands::serve(a),
        Command::SolveOracle(a) => commands::solve_oracle(a),
    };
    match result {
        Ok(summary) => {
            let text = serde_json::to_string_pretty(&summary).expect("summary serialises");
            // A closed pipe (`| head`) is not a failure of the command.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
