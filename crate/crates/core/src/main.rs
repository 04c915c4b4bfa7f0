use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use combmux::config::RunConfig;
use combmux::report::{run_sweep, run_tables, run_validate, RunError};

/// Environment variable holding the number of worker threads.
const THREADS_ENV: &str = "COMBMUX_THREADS";

#[derive(Debug, Parser)]
#[command(name = "combmux", version, about = "Heralded single-photon multiplexer optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize lambda over the configured (M, N) grid and write CSV surfaces.
    Sweep { config: PathBuf },
    /// Compare analytic distributions with Monte-Carlo simulation.
    Validate { config: PathBuf },
    /// Recompute the reference tables.
    Tables {
        #[arg(long, default_value = "tables")]
        out: PathBuf,
    },
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    if threads == 0 {
        return Err(format!("{THREADS_ENV} must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(command: Command) -> Result<(), RunError> {
    match command {
        Command::Sweep { config } => {
            let cfg = RunConfig::from_path(&config)?;
            let report = run_sweep(&cfg)?;
            for r in &report.results {
                let g = r.global;
                println!(
                    "{}: best M = {}, N = {}, lambda = {:.6}, P(1) = {:.6}",
                    r.logic, g.m, g.n, g.lambda_opt, g.p1
                );
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Validate { config } => {
            let cfg = RunConfig::from_path(&config)?;
            let report = run_validate(&cfg)?;
            if let Some(w) = report.worst() {
                println!(
                    "{} bins agree; largest |z| = {:.2} (M = {}, N = {}, i {}{})",
                    report.comparisons.len(),
                    w.stat.z.abs(),
                    w.point.m,
                    w.point.n,
                    if w.stat.pooled { ">= " } else { "= " },
                    w.stat.bin
                );
            }
            println!("wrote {}", report.file.display());
        }
        Command::Tables { out } => {
            let report = run_tables(&out)?;
            let t1 = report.standalone.iter().filter(|r| r.pass()).count();
            let t2 = report.combined.iter().filter(|r| r.pass()).count();
            println!("table 1: {t1}/{} rows reproduced", report.standalone.len());
            println!("table 2: {t2}/{} rows reproduced", report.combined.len());
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
