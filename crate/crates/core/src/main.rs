use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nested_spectra::experiments::{run, Experiment, ExperimentConfig, Overrides};

/// Monte Carlo experiments for the nested matrix-tensor model.
#[derive(Parser)]
#[command(name = "nested-spectra", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mode-2 unfolding spectrum against its limiting law and spike prediction.
    Esd2(Common),
    /// Mode-3 unfolding spectrum against the semicircle and spike prediction.
    Esd3(Common),
    /// Predicted mode-2 alignment over a (rho_T, beta_M) grid.
    AlignmentMap(Common),
    /// Multi-view clustering accuracy of the unfolding, oracle and tensor estimators.
    Benchmark(Common),
    /// Detectability threshold rho_T* as a function of beta_M.
    Phase(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in parameter set: fig1-left, fig1-right, fig2, fig3, phase.
    #[arg(long)]
    preset: Option<String>,
    /// Monte Carlo trials per point.
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Histogram bins.
    #[arg(long)]
    bins: Option<usize>,
    /// Imaginary offset for Stieltjes inversion.
    #[arg(long)]
    eta: Option<f64>,
    /// Also write a matplotlib script next to the CSVs.
    #[arg(long)]
    emit_plots: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::Esd2(a) => (Experiment::Esd2, a),
        Command::Esd3(a) => (Experiment::Esd3, a),
        Command::AlignmentMap(a) => (Experiment::AlignmentMap, a),
        Command::Benchmark(a) => (Experiment::Benchmark, a),
        Command::Phase(a) => (Experiment::Phase, a),
    };

    if let Ok(v) = std::env::var("NESTED_SPECTRA_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not size the worker pool: {e}");
                }
            }
            _ => {
                eprintln!("error: NESTED_SPECTRA_THREADS must be a positive integer, got '{v}'");
                return ExitCode::from(2);
            }
        }
    }

    let overrides = Overrides {
        trials: args.trials,
        seed: args.seed,
        output_dir: args.out,
        bins: args.bins,
        eta: args.eta,
        emit_plots: args.emit_plots,
    };
    let result = ExperimentConfig::resolve(
        experiment,
        args.preset.as_deref(),
        args.config.as_deref(),
        &overrides,
    )
    .and_then(|cfg| run(&cfg));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
