use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spiked_cli::{run_experiment, CliError, Experiment, ExperimentConfig, Strength, Tolerances};
use spiked_core::quantum::Window;
use spiked_core::tensor::Ensemble;

#[derive(Parser)]
#[command(name = "spiked", version, about = "Seeded experiment grids for spiked tensor PCA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Planted vs null decisions (even trials planted).
    Detect(GridArgs),
    /// Density matrix, rounding and one power step on planted instances.
    Recover(GridArgs),
    /// Top eigenvalue of H(G) against Emax.
    NullSpectrum(GridArgs),
    /// Slope of log lambda1 against log N for odd orders.
    OddScaling(GridArgs),
    /// Pairing sums against Monte Carlo on built-in networks.
    WickVerify(GridArgs),
    /// Recursive vs naive vs state-vector circuit amplitudes.
    PathEquivalence(GridArgs),
    /// Cost model at fixed N^{-p/4} / lambda across the N list.
    SpeedupTable(GridArgs),
    /// Chosen-input overlap and phase-estimation success probabilities.
    QuantumOverlap(GridArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EnsembleArg {
    Real,
    Complex,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    Hard,
    Erf,
}

#[derive(Args)]
struct GridArgs {
    /// Tensor orders.
    #[arg(long = "p", value_delimiter = ',', default_value = "4")]
    orders: Vec<usize>,
    /// Dimensions.
    #[arg(long = "N", value_delimiter = ',', default_value = "10")]
    dims: Vec<usize>,
    #[arg(long = "nbos", value_delimiter = ',', default_value = "2")]
    n_bos: Vec<usize>,
    #[arg(long, value_delimiter = ',', conflicts_with = "ratio")]
    lambda: Option<Vec<f64>>,
    /// Target E0 / Emax; lambda is obtained by inverting the thresholds.
    #[arg(long, value_delimiter = ',')]
    ratio: Option<Vec<f64>>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "real")]
    ensemble: EnsembleArg,
    #[arg(long)]
    symmetrize: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// KEY=VAL; keys: eigen_tol, strong_corr, path_rel, wick_sigmas, mc_draws, overlap_gain, rounding_retries.
    #[arg(long = "tol-override")]
    tol_override: Vec<String>,
    #[arg(long, value_enum, default_value = "erf")]
    window: WindowArg,
    #[arg(long = "epsilon-tilde", default_value_t = 0.01)]
    epsilon_tilde: f64,
    /// Largest circuit depth (path-equivalence).
    #[arg(long, default_value_t = 6)]
    depth: usize,
    /// Networks for wick-verify: norm, ring, spiked, crossed.
    #[arg(long, value_delimiter = ',')]
    topology: Option<Vec<String>>,
}

fn build(experiment: Experiment, a: GridArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::new(experiment, a.out);
    cfg.orders = a.orders;
    cfg.dims = a.dims;
    cfg.n_bos = a.n_bos;
    cfg.strength = match (a.lambda, a.ratio) {
        (Some(l), _) => Some(Strength::Lambda(l)),
        (None, Some(r)) => Some(Strength::Ratio(r)),
        (None, None) => None,
    };
    let base = match a.ensemble {
        EnsembleArg::Real => Ensemble::REAL,
        EnsembleArg::Complex => Ensemble::COMPLEX,
    };
    cfg.ensemble = if a.symmetrize { base.symmetrized() } else { base };
    cfg.trials = a.trials;
    cfg.seed = a.seed;
    cfg.tolerances = Tolerances::default().with_overrides(&a.tol_override)?;
    cfg.window = match a.window {
        WindowArg::Hard => Window::Hard,
        WindowArg::Erf => Window::Erf,
    };
    cfg.eps_tilde = a.epsilon_tilde;
    cfg.max_depth = a.depth;
    if let Some(t) = a.topology {
        cfg.topologies = t;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::Detect(a) => (Experiment::Detect, a),
        Command::Recover(a) => (Experiment::Recover, a),
        Command::NullSpectrum(a) => (Experiment::NullSpectrum, a),
        Command::OddScaling(a) => (Experiment::OddScaling, a),
        Command::WickVerify(a) => (Experiment::WickVerify, a),
        Command::PathEquivalence(a) => (Experiment::PathEquivalence, a),
        Command::SpeedupTable(a) => (Experiment::SpeedupTable, a),
        Command::QuantumOverlap(a) => (Experiment::QuantumOverlap, a),
    };
    let outcome = build(experiment, args).and_then(|cfg| run_experiment(&cfg));
    match outcome {
        Ok(out) => {
            let failed = out.failed_rows();
            eprintln!(
                "{} rows ({failed} failed) -> {}, {}",
                out.rows.len(),
                out.results_path.display(),
                out.summary_path.display()
            );
            if failed > 0 {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ CliError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
