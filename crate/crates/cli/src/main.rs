//! `lrscb`: run bandit experiments, fit regret slopes and check the shift lemmas.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "lrscb", version, about = "Contextual linear bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run trials and write `trials.csv` and `summary.json`.
    Run(RunArgs),
    /// Fit regret slopes to a `trials.csv` written by `run`.
    Slope(SlopeArgs),
    /// Check the shifted-OFUL decomposition, dominance and argmax coincidence.
    ShiftVerify(ShiftArgs),
    /// Compare the empirical context covariance floor with the declared one.
    AuditContexts(AuditArgs),
    /// Evaluate the theoretical regret envelope on a grid of horizons.
    BoundCurve(BoundArgs),
}

/// Experiment overrides shared by `run`; every flag replaces the config value.
#[derive(Args, Debug, Default)]
struct ExperimentFlags {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration (figure-d20, figure-d25, figure-d30).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Comma-separated algorithms: oful, alb-norm, lr-scb, shift-analysis.
    #[arg(long, value_delimiter = ',')]
    algo: Option<Vec<String>>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    t: Option<u64>,
    #[arg(long)]
    t1: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Multiplier on the confidence radius formula.
    #[arg(long)]
    radius_scale: Option<f64>,
    /// `‖θ* − Γ‖` for shift-analysis runs.
    #[arg(long)]
    psi: Option<f64>,
    /// Smallest checkpoint used by the slope fits.
    #[arg(long)]
    t_min: Option<u64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    flags: ExperimentFlags,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SlopeArgs {
    /// `trials.csv` from a previous run.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = lrscb_core::harness::DEFAULT_T_MIN)]
    t_min: u64,
}

#[derive(Args, Debug)]
struct ShiftArgs {
    #[arg(long, default_value_t = 20)]
    d: usize,
    #[arg(long, default_value_t = 20)]
    k: usize,
    /// Horizon of each shifted OFUL run.
    #[arg(long, default_value_t = 10_000)]
    t: u64,
    #[arg(long, default_value_t = 0.1)]
    psi: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Monte-Carlo context sets for the coincidence frequency.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[arg(long, default_value_t = 20)]
    d: usize,
    /// Context box half-width is `c/√d`.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Declared floor; defaults to the uniform-box value `c²/(3d)`.
    #[arg(long)]
    rho_min: Option<f64>,
    /// Sample count; defaults to the larger of 10⁵ and `10d²`.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long, default_value_t = 20)]
    d: usize,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Covariance floor; defaults to `1/(3d)`.
    #[arg(long)]
    rho_min: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    /// Largest horizon; the grid is powers of ten up to it.
    #[arg(long, default_value_t = 100_000_000)]
    t: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => commands::run(args),
        Command::Slope(args) => commands::slope(args),
        Command::ShiftVerify(args) => commands::shift_verify(args),
        Command::AuditContexts(args) => commands::audit_contexts(args),
        Command::BoundCurve(args) => commands::bound_curve(args),
    };
    match outcome {
        Ok(commands::Status::Passed) => ExitCode::SUCCESS,
        Ok(commands::Status::Failed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
