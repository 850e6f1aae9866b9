use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kronrpca::cli::{cmd_generate, cmd_solve, cmd_sweep, exit_code, GenerateOptions, SolveOptions, SweepOptions};

#[derive(Parser)]
#[command(
    name = "kronrpca",
    version,
    about = "Through-the-wall radar imaging with Kronecker-structured robust PCA"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "KRONRPCA_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise the dictionary, clean and noisy data and the ground truth.
    Generate {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory [default: <out_dir>/data, or ./data].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one solver on a generated data directory.
    Solve {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Directory written by `generate`.
        #[arg(long)]
        data: PathBuf,
        /// Output directory [default: <out_dir>/results, or ./results].
        #[arg(long)]
        out: Option<PathBuf>,
        /// srcs, srcs-q<rank>, krpca, hkrpca-sd-pt, hkrpca-sd-col, hkrpca-fd-pt, hkrpca-fd-col
        #[arg(long)]
        solver: Option<String>,
    },
    /// Mean AUC over seeded trials on the (lambda, mu) grid of the config.
    Sweep {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory [default: <out_dir>/sweep, or ./sweep].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the solver named in the config.
        #[arg(long)]
        solver: Option<String>,
        /// Override the number of trials.
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match cli.command {
        Command::Generate { config, out, seed } => {
            cmd_generate(&GenerateOptions { config, out, seed }).map(|m| format!("{} artifacts", m.artifacts.len()))
        }
        Command::Solve {
            config,
            data,
            out,
            solver,
        } => cmd_solve(&SolveOptions {
            config,
            data,
            out,
            solver,
        })
        .map(|(_, r)| {
            format!(
                "{}: {} after {} iterations, AUC {:.4}, relative residual {:.3e}",
                r.solver, r.status, r.iterations, r.auc, r.final_relative_residual
            )
        }),
        Command::Sweep {
            config,
            out,
            seed,
            solver,
            trials,
        } => cmd_sweep(&SweepOptions {
            config,
            out,
            seed,
            solver,
            trials,
            threads: cli.threads,
        })
        .map(|(_, rows)| format!("{} grid points", rows.len())),
    };
    match outcome {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
