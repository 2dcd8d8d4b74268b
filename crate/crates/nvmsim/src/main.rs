use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nvmsim::driver::{self, DriverError, EXIT_MAX_CYCLES};
use nvmsim::{assets, load_config, Format, SimConfig};

/// Trace-driven NVM/DRAM memory-system simulator.
#[derive(Debug, Parser)]
#[command(name = "nvmsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file; the bundled PCM profile when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "text", value_parser = clap::value_parser!(Format))]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a trace through the controllers (and the cache, if configured).
    RunTrace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trace: PathBuf,
        /// Overrides MAX_CYCLES from the config.
        #[arg(long)]
        max_cycles: Option<u64>,
    },
    /// Run a trace through the hybrid cache only.
    RunCache {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Execute a CiM program file.
    RunCim {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        program: PathBuf,
    },
    /// Sweep nvBlockRatio over a cache trace and print CSV.
    SweepRatio {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,25,50,75,100")]
        ratios: Vec<u32>,
    },
}

fn config(path: Option<&Path>) -> Result<SimConfig, DriverError> {
    match path {
        Some(p) => Ok(load_config(p)?),
        None => Ok(assets::PCM_DEFAULT_CONFIG.parse()?),
    }
}

fn run(cli: Cli) -> Result<i32, DriverError> {
    match cli.command {
        Command::RunTrace { common, trace, max_cycles } => {
            let cfg = config(common.config.as_deref())?;
            let run = driver::run_trace_file(&cfg, &trace, max_cycles.unwrap_or(cfg.max_cycles))?;
            driver::write_output(common.out.as_deref(), &run.report.render(common.format))?;
            if run.completed {
                Ok(0)
            } else {
                eprintln!("nvmsim: cycle limit reached before the trace retired; statistics are partial");
                Ok(EXIT_MAX_CYCLES)
            }
        }
        Command::RunCache { common, trace } => {
            let cfg = config(common.config.as_deref())?;
            let reqs = driver::read_trace(&trace, cfg.geometry.block_size_bytes as usize)?;
            let report = driver::run_cache(&cfg, &reqs)?;
            driver::write_output(common.out.as_deref(), &report.render(common.format))?;
            Ok(0)
        }
        Command::RunCim { common, program } => {
            let cfg = config(common.config.as_deref())?;
            let run = driver::run_cim_file(&cfg, &program)?;
            for o in &run.outputs {
                println!("{}", driver::format_output(o));
            }
            driver::write_output(common.out.as_deref(), &run.report.render(common.format))?;
            Ok(0)
        }
        Command::SweepRatio { common, trace, ratios } => {
            let cfg = config(common.config.as_deref())?;
            let reqs = driver::read_trace(&trace, cfg.geometry.block_size_bytes as usize)?;
            let points = driver::sweep(&cfg, &reqs, &ratios)?;
            driver::write_output(common.out.as_deref(), &driver::sweep_csv(&points))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("nvmsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
