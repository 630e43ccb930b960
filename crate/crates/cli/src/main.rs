use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use mhd_cli::config::{parse_config_for, ExperimentKind};
use mhd_cli::experiments::run_experiment;
use mhd_cli::output::write_csv;

/// Structure-preserving finite elements for 3D incompressible MHD.
///
/// Exit codes: 0 success, 1 failed check, 2 configuration error, 3 solver failure.
#[derive(Parser)]
#[command(name = "mhd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Target {
    /// TOML configuration file.
    config: PathBuf,
    /// CSV destination; overrides `[experiment] output`. Default: stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the configuration (default: one manufactured-solution run).
    Run(Target),
    /// Spatial convergence sweep on the manufactured solution.
    SweepH(Target),
    /// Temporal convergence sweep on the manufactured solution.
    SweepK(Target),
    /// Discrete energy law with zero sources and homogeneous boundary data.
    Energy(Target),
    /// Cell-wise Gauss law for B.
    Gauss(Target),
    /// Dense-oracle, de Rham and quadrature checks.
    Selftest,
}

fn selftest() -> u8 {
    let start = Instant::now();
    let checks = match mhd_core::verify::selftest() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("selftest: assembly failed: {e}");
            return 3;
        }
    };
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    println!("{} checks, {failed} failed, {:.1}s", checks.len(), start.elapsed().as_secs_f64());
    u8::from(failed > 0)
}

fn experiment(target: Target, forced: Option<ExperimentKind>) -> u8 {
    let text = match std::fs::read_to_string(&target.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", target.config.display());
            return 2;
        }
    };
    let cfg = match parse_config_for(&text, forced) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", target.config.display());
            return 2;
        }
    };
    let outcome = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code() as u8;
        }
    };
    let written = match target.output.or(cfg.output.clone()) {
        Some(path) => File::create(&path).and_then(|f| write_csv(BufWriter::new(f), &outcome)),
        None => write_csv(io::stdout().lock(), &outcome),
    };
    if let Err(e) = written {
        eprintln!("writing CSV: {e}");
        return 2;
    }
    for n in &outcome.notes {
        eprintln!("note: {n}");
    }
    for c in &outcome.checks {
        eprintln!("{c}");
    }
    u8::from(!outcome.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(t) => experiment(t, None),
        Command::SweepH(t) => experiment(t, Some(ExperimentKind::HSweep)),
        Command::SweepK(t) => experiment(t, Some(ExperimentKind::KSweep)),
        Command::Energy(t) => experiment(t, Some(ExperimentKind::Energy)),
        Command::Gauss(t) => experiment(t, Some(ExperimentKind::Gauss)),
        Command::Selftest => selftest(),
    };
    ExitCode::from(code)
}
