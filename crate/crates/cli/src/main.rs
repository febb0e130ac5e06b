use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use silofed_cli::summary::emit_summary;
use silofed_cli::{parse_config, run_experiment, CliError, RunSettings};

const SEED_OFFSET_VAR: &str = "SILOFED_SEED_OFFSET";

#[derive(Parser)]
#[command(name = "silofed", version, about = "Cross-silo federated learning experiments under per-silo differential privacy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Directory for output files.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Also report every ceil(T/20) rounds.
        #[arg(long)]
        report_intermediate: bool,
    },
    /// Print each method's best point from a results CSV.
    Summarize { results: PathBuf },
}

fn seed_offset() -> Result<u64, CliError> {
    match std::env::var(SEED_OFFSET_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_OFFSET_VAR} must be a non-negative integer, got `{v}`"))),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(CliError::Config(format!("{SEED_OFFSET_VAR}: {e}"))),
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            workers,
            report_intermediate,
        } => {
            if workers == Some(0) {
                return Err(CliError::Config("--workers must be at least 1".into()));
            }
            let exp = parse_config(&config)?;
            let echoed = serde_json::to_string_pretty(&exp).expect("config serializes");
            eprintln!("resolved config:\n{echoed}");
            let settings = RunSettings {
                out_dir: out,
                workers,
                report_intermediate,
                seed_offset: seed_offset()?,
            };
            let outcome = run_experiment(&exp, &settings)?;
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            if outcome.failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                for f in &outcome.failures {
                    eprintln!("failed: {f}");
                }
                eprintln!("{} of {} runs failed", outcome.failures.len(), outcome.runs);
                Ok(ExitCode::from(3))
            }
        }
        Command::Summarize { results } => {
            emit_summary(&results, std::io::stdout().lock())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
