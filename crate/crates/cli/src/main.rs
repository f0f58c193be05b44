use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use razgd_core::batch::Parallelism;
use razgd_core::harness::{self, ExperimentSpec, HarnessError};

const EXIT_CODES: &str = "Exit codes: 0 ok, 2 config error, 3 solver error, 4 I/O error.\n\
The RAZGD_SEED environment variable overrides the spec's base seed.";

#[derive(Parser)]
#[command(name = "razgd", version, about = "Zeroth-order Riemannian optimization benchmarks", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write traces, summary.csv and manifest.json.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of runs executed concurrently.
        #[arg(long, value_name = "N")]
        parallel: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
    /// Parse and resolve a spec, printing the resolved manifest.
    Validate {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Print a ready-made spec to stdout.
    Demo {
        #[arg(value_parser = harness::DEMO_NAMES)]
        name: String,
    },
}

fn load(path: &Path) -> Result<ExperimentSpec, HarnessError> {
    let mut spec = harness::parse_spec(path)?;
    if let Ok(raw) = std::env::var("RAZGD_SEED") {
        spec.seed = raw
            .trim()
            .parse()
            .map_err(|e| HarnessError::Config(format!("RAZGD_SEED={raw:?}: {e}")))?;
    }
    Ok(spec)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run {
            spec,
            out,
            parallel,
            quiet,
        } => {
            let spec = load(&spec)?;
            let summaries =
                harness::run_experiment(&spec, &out, Parallelism::from_threads(parallel))?;
            if !quiet {
                for s in &summaries {
                    println!(
                        "{} run {}: f = {:.6}, queries = {}, {}{}",
                        s.solver,
                        s.run_id,
                        s.final_f,
                        s.queries,
                        s.termination,
                        if s.escaped_saddle {
                            ""
                        } else {
                            ", not escaped"
                        }
                    );
                }
                println!("wrote {} runs to {}", summaries.len(), out.display());
            }
        }
        Command::Validate { spec } => {
            let spec = load(&spec)?;
            let (manifest, _) = harness::resolve(&spec)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&manifest).expect("manifest is always serializable")
            );
        }
        Command::Demo { name } => {
            let spec = harness::demo_spec(&name).expect("clap restricts the demo name");
            println!(
                "{}",
                serde_json::to_string_pretty(&spec).expect("spec is always serializable")
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("razgd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
