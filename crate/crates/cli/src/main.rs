use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use patchdrift_cli::{check, execute, write_outputs, CliError, RunOptions, ScenarioConfig, THREADS_ENV};

#[derive(Parser)]
#[command(name = "patchdrift", version, about = "Growth rates of dispersing populations in random environments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task and write CSV, JSON and manifest files.
    Run(Common),
    /// Run only the compare tasks and print their verdicts as JSON.
    Compare(Common),
    /// Parse and check a config, printing its normalized form.
    Validate {
        config: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo replicates.
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = ScenarioConfig::from_path(&config)?;
            check(&cfg)?;
            emit(&cfg.normalized().to_json());
            Ok(true)
        }
        Command::Run(c) => {
            let out = execute(&ScenarioConfig::from_path(&c.config)?, &opts(&c, false))?;
            let manifest = write_outputs(&out, &c.out_dir)?;
            for f in &manifest.files {
                emit(&c.out_dir.join(&f.file).display().to_string());
            }
            Ok(out.reports().iter().all(|r| r.pass))
        }
        Command::Compare(c) => {
            let out = execute(&ScenarioConfig::from_path(&c.config)?, &opts(&c, true))?;
            let reports = out.reports();
            if reports.is_empty() {
                return Err(CliError::Config {
                    path: "tasks".into(),
                    message: "no compare task".into(),
                });
            }
            write_outputs(&out, &c.out_dir)?;
            emit(&serde_json::to_string_pretty(&reports).expect("reports serialize"));
            Ok(reports.iter().all(|r| r.pass))
        }
    }
}

/// Prints a line, ignoring a closed stdout.
fn emit(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn opts(c: &Common, compare_only: bool) -> RunOptions {
    RunOptions {
        seed: c.seed,
        threads: c.threads,
        compare_only,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
