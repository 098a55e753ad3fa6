use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use corinfomax_cli::commands::{cmd_check, cmd_run, cmd_sweep, SweepRequest};
use corinfomax_cli::{CliResult, SEED_ENV};

#[derive(Parser)]
#[command(name = "cimx", version, about = "Online correlative information maximization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write result.csv, trace.csv and meta.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed and CIMX_SEED.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep one axis over a list of values with several realizations each.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of rho, snr, mixing_dist, param.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; `param` values look like `mu_w=0.05`,
        /// and `snr` accepts `inf` for a noiseless run.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long, default_value_t = 10)]
        realizations: usize,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the available cores.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a built-in invariant suite: all, ldmi, dynamics, domains, datagen or metrics.
    Check { suite: String },
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let env_seed = std::env::var(SEED_ENV).ok();
    match cli.command {
        Command::Run { config, out, seed } => {
            let r = cmd_run(&config, &out, seed, env_seed.as_deref())?;
            println!(
                "seed {} mean SINR {:.2} dB, final {:.2} dB, {:.2}s -> {}",
                r.seed,
                r.mean_sinr_db,
                r.final_sinr_db,
                r.wall_s,
                out.display()
            );
        }
        Command::Sweep {
            config,
            axis,
            values,
            realizations,
            out,
            jobs,
            seed,
        } => {
            let req = SweepRequest {
                config,
                axis,
                values,
                realizations,
                out,
                jobs,
                seed,
            };
            let cells = cmd_sweep(&req, env_seed.as_deref())?;
            let failed = cells.iter().filter(|c| c.outcome.is_err()).count();
            println!("{} cells ({failed} failed) -> {}", cells.len(), req.out.display());
        }
        Command::Check { suite } => {
            let results = cmd_check(&suite, &mut std::io::stdout().lock())?;
            println!("{} invariants passed", results.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
