use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mcf_qkd::scenario::{load_scenario, run_command, Command, OutputFormat, RunError};

#[derive(Parser)]
#[command(name = "mcf-qkd", version, about = "QKD coexistence simulator and core/wavelength planner for 7-core MCF")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Write the report here instead of stdout (overrides output.path).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format (overrides output.format).
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Subcommand)]
enum Sub {
    /// Leaked power and detected noise per data channel.
    Leakage(Common),
    /// Key rate at the configured fiber length.
    Keyrate(Common),
    /// Key rate over sweep.distances_km.
    SweepDistance(Common),
    /// Key rate as the data channels move across sweep.wavelengths_nm.
    SweepWavelength(Common),
    /// Maximise active data channels under a key-rate floor.
    Plan(Common),
}

fn run(cli: Cli) -> Result<(), RunError> {
    let (cmd, args) = match cli.command {
        Sub::Leakage(a) => (Command::Leakage, a),
        Sub::Keyrate(a) => (Command::Keyrate, a),
        Sub::SweepDistance(a) => (Command::SweepDistance, a),
        Sub::SweepWavelength(a) => (Command::SweepWavelength, a),
        Sub::Plan(a) => (Command::Plan, a),
    };
    let scenario = load_scenario(&args.scenario)?;
    let format = match args.format {
        Some(Format::Csv) => OutputFormat::Csv,
        Some(Format::Json) => OutputFormat::Json,
        Some(Format::Table) => OutputFormat::Table,
        None => scenario.output.format,
    };
    let text = run_command(cmd, &scenario)?.render(format);
    match args.out.or_else(|| scenario.output.path.clone()) {
        Some(path) => std::fs::write(&path, text).map_err(|source| RunError::Io { path, source }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| RunError::Io { path: "<stdout>".into(), source })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { RunError::EXIT_PARSE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mcf-qkd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
