use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fluxkit::cleanbot::Scenario;
use fluxkit::FluxError;
use fluxkit_cli::bench::{self, BenchConfig};
use fluxkit_cli::run;
use fluxkit_cli::script::{Script, EXIT_ERROR, EXIT_INCONSISTENT};

#[derive(Parser)]
#[command(name = "fluxkit", version, about = "Reasoning about incomplete states: scripts, runs, benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a query script and print its transcript.
    Query { file: PathBuf },
    /// Run the cleaning robot on a scenario file.
    Run {
        file: PathBuf,
        /// List every action and main-loop pass.
        #[arg(long)]
        trace: bool,
        /// Write the output here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time random scenarios and write one CSV row per run.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "5,6,7")]
        sizes: Vec<i64>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, default_value_t = 0.15)]
        occupancy: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write 0 in every timing column.
        #[arg(long)]
        no_timing: bool,
    },
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), String> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn code_of(e: &FluxError) -> u8 {
    match e {
        FluxError::Inconsistent => EXIT_INCONSISTENT as u8,
        _ => EXIT_ERROR as u8,
    }
}

fn fail(msg: impl std::fmt::Display, code: u8) -> ExitCode {
    eprintln!("fluxkit: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Query { file } => {
            let text = match read(&file) {
                Ok(t) => t,
                Err(e) => return fail(e, EXIT_ERROR as u8),
            };
            let script = match Script::parse(&text) {
                Ok(s) => s,
                Err(e) => return fail(e, EXIT_ERROR as u8),
            };
            let outcome = script.run();
            print!("{}", outcome.transcript);
            ExitCode::from(outcome.exit_code as u8)
        }
        Command::Run { file, trace, out } => {
            let sc = match read(&file).map_err(FluxError::Parse).and_then(|t| Scenario::parse(&t)) {
                Ok(sc) => sc,
                Err(e) => return fail(e, EXIT_ERROR as u8),
            };
            match run::run_scenario(&sc, trace) {
                Ok(r) => match emit(&r.text, out.as_deref()) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => fail(e, EXIT_ERROR as u8),
                },
                Err(e) => fail(&e, code_of(&e)),
            }
        }
        Command::Bench { sizes, runs, occupancy, seed, out, no_timing } => {
            let cfg = BenchConfig { sizes, runs, occupancy, seed };
            let csv = bench::bench_rows(&cfg).and_then(|rows| bench::to_csv(&rows, !no_timing));
            match csv {
                Ok(text) => match emit(&text, out.as_deref()) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => fail(e, EXIT_ERROR as u8),
                },
                Err(e) => fail(&e, code_of(&e)),
            }
        }
    }
}
