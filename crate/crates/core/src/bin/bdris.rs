//! Batch experiment CLI.
//!
//! `bdris run --config <file> --sweep <name> --out <path>` executes one named
//! sweep from a TOML experiment file and writes per-trial result rows.
//!
//! Exit codes: 0 on success, 2 for configuration or I/O problems, 3 for
//! numerical failures (with `--strict`, any failed trial row also exits 3).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bdris_core::runner::{
    limit_blas_threads, load_config, run_sweep, sweep_index, write_results, OutputFormat,
    Stage1Choice, Stage2Choice,
};
use bdris_core::Error;

#[derive(Parser)]
#[command(name = "bdris", version, about = "Surface-assisted interference management experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one named sweep from an experiment file.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file: scenario keys at top level, [sweeps.<name>] tables below.
    #[arg(long)]
    config: PathBuf,
    /// Name of the sweep table to run.
    #[arg(long)]
    sweep: String,
    /// Output file path.
    #[arg(long)]
    out: PathBuf,
    /// Output encoding.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Override the trial count from the file.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the master seed from the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the sweep's stage-one solver (mo|rtp|group:<Mg>|diag|joint).
    #[arg(long)]
    stage1: Option<String>,
    /// Override the sweep's stage-two design (svd|minil|maxsinr|maxsr).
    #[arg(long)]
    stage2: Option<String>,
    /// Treat any failed trial as a fatal numerical error.
    #[arg(long)]
    strict: bool,
    /// Worker thread count (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: &RunArgs) -> Result<u8, Error> {
    limit_blas_threads(1);
    if let Some(n) = args.threads {
        // ignore the error if a pool already exists (e.g. under a test harness)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let format: OutputFormat = args.format.parse()?;
    let cfg = load_config(&args.config)?;
    let idx = sweep_index(&cfg, &args.sweep)?;
    let mut sweep = cfg.sweeps[&args.sweep].clone();
    if let Some(s1) = &args.stage1 {
        sweep.stage1 = s1.parse::<Stage1Choice>()?;
    }
    if let Some(s2) = &args.stage2 {
        sweep.stage2 = s2.parse::<Stage2Choice>()?;
    }
    let report = run_sweep(&cfg.scenario, &sweep, idx, args.trials, args.seed)?;
    write_results(&report.rows, &args.out, format)?;
    println!(
        "wrote {} rows ({} failed) to {}",
        report.rows.len(),
        report.failures,
        args.out.display()
    );
    if args.strict && report.failures > 0 {
        eprintln!("error: {} trial(s) failed numerically", report.failures);
        return Ok(3);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run(args) => match run(&args) {
            Ok(code) => ExitCode::from(code),
            Err(e) => {
                eprintln!("error: {}", e);
                ExitCode::from(e.exit_code())
            }
        },
    }
}
