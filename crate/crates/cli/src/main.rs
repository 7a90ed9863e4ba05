use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slabscalar::harness::{check_experiment, exit_code, parse_scenario, run_experiment, Scenario};
use slabscalar::SlabError;

#[derive(Parser)]
#[command(name = "slabscalar", version, about = "Scalar decay experiments in periodic slabs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write CSV tables plus summary.json.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Envelope gates only; prints the summary and writes nothing.
    Check {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a sweep-type experiment (eigen sweep, coercivity audit, refinement study).
    Sweep {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, SlabError> {
    let text = fs::read_to_string(path)?;
    let mut s = parse_scenario(&text)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn set_threads(n: Option<usize>) {
    if let Some(n) = n {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the worker pool: {e}");
        }
    }
}

fn report(path: &Path, result: Result<slabscalar::harness::Summary, SlabError>) -> ExitCode {
    let code = exit_code(&result);
    match &result {
        Ok(sum) => {
            println!("{}", serde_json::to_string_pretty(sum).unwrap_or_default());
            if !sum.pass {
                eprintln!("{}: gate failed", path.display());
            }
        }
        Err(e) => eprintln!("{}: {e}", path.display()),
    }
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, seed, threads } => {
            set_threads(threads);
            let result = load(&config, seed).and_then(|s| run_experiment(&s, Some(&out)));
            report(&config, result)
        }
        Command::Check { config, seed } => {
            let result = load(&config, seed).and_then(|s| check_experiment(&s));
            report(&config, result)
        }
        Command::Sweep { config, out, threads } => {
            set_threads(threads);
            let result = load(&config, None).and_then(|s| {
                if s.experiment.is_sweep() {
                    run_experiment(&s, Some(&out))
                } else {
                    Err(SlabError::Config(format!("experiment '{}' is not a sweep", s.experiment.label())))
                }
            });
            report(&config, result)
        }
    }
}
