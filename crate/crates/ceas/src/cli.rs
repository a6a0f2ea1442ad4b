//! Batch command-line interface: `run`, `sweep`, `plot`, `validate`.
//!
//! Exit codes: 0 success, 1 failed validation check, 2 bad configuration or
//! input, 3 consensus stall.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, Protocol};
use crate::engine::run_experiment;
use crate::error::CeasError;
use crate::plot::{aggregate_rows, render_accuracy_svg};
use crate::report::{parse_csv, render_combined_csv, render_csv, render_summary};
use crate::sweep::{aggregate, render_aggregate_csv, run_sweep};
use crate::validate::{render_table, run_validation, validation_exit_code, ValidationOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_BAD_CONFIG: i32 = 2;
pub const EXIT_STALL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ceas",
    about = "Consensus-entanglement-aware scheduling simulator",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write metrics.csv plus summary.txt.
    Run(RunArgs),
    /// Run both protocols over a seed range; write sweep.csv and aggregate.csv.
    Sweep(SweepArgs),
    /// Render an accuracy figure (SVG) from a sweep CSV.
    Plot(PlotArgs),
    /// Run the built-in oracle checks and print a pass/fail table.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Configuration file (flat `key = value` format).
    #[arg(long)]
    pub config: PathBuf,
    /// Run seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Override the configured protocol (ceas | random-baseline).
    #[arg(long)]
    pub protocol: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Inclusive seed range, e.g. `1..10`.
    #[arg(long, default_value = "1..10")]
    pub seeds: String,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Sweep CSV produced by `ceas sweep`.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output SVG path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Seed for the stochastic oracles.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Test hook: corrupt the inverse-variance weights so the
    /// min-variance check must fail.
    #[arg(long, hide = true)]
    pub corrupt_prop1: bool,
}

fn exit_code_for(err: &CeasError) -> i32 {
    match err {
        CeasError::ConsensusStall { .. } => EXIT_STALL,
        _ => EXIT_BAD_CONFIG,
    }
}

/// Parses `a..b` (inclusive) or a single seed.
pub fn parse_seed_range(s: &str) -> Result<Vec<u64>, CeasError> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a
            .trim()
            .parse()
            .map_err(|_| CeasError::config("seeds", format!("bad range start `{a}`")))?;
        let b: u64 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| CeasError::config("seeds", format!("bad range end `{b}`")))?;
        if b < a {
            return Err(CeasError::config("seeds", "range end below start"));
        }
        Ok((a..=b).collect())
    } else {
        let v: u64 = s
            .trim()
            .parse()
            .map_err(|_| CeasError::config("seeds", format!("bad seed `{s}`")))?;
        Ok(vec![v])
    }
}

/// Executes a parsed command; returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, CeasError> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Plot(args) => cmd_plot(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

fn cmd_run(args: RunArgs) -> Result<i32, CeasError> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(p) = &args.protocol {
        cfg.protocol = Protocol::parse(p)?;
    }
    let result = run_experiment(&cfg, args.seed)?;
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("metrics.csv"), render_csv(&result))?;
    std::fs::write(args.out.join("summary.txt"), render_summary(&result))?;
    println!(
        "wrote {} and {}",
        args.out.join("metrics.csv").display(),
        args.out.join("summary.txt").display()
    );
    print!("{}", render_summary(&result));
    Ok(EXIT_OK)
}

fn cmd_sweep(args: SweepArgs) -> Result<i32, CeasError> {
    let cfg = ExperimentConfig::from_file(&args.config)?;
    let seeds = parse_seed_range(&args.seeds)?;
    let results = run_sweep(&cfg, &seeds)?;
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("sweep.csv"), render_combined_csv(&results))?;
    let agg = aggregate(&results);
    std::fs::write(args.out.join("aggregate.csv"), render_aggregate_csv(&agg))?;
    println!(
        "wrote {} ({} runs) and {}",
        args.out.join("sweep.csv").display(),
        results.len(),
        args.out.join("aggregate.csv").display()
    );
    Ok(EXIT_OK)
}

fn cmd_plot(args: PlotArgs) -> Result<i32, CeasError> {
    let text = std::fs::read_to_string(&args.input)?;
    let rows = parse_csv(&text)?;
    let agg = aggregate_rows(&rows);
    let svg = render_accuracy_svg(&agg)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&args.out, svg)?;
    println!("wrote {}", args.out.display());
    Ok(EXIT_OK)
}

fn cmd_validate(args: ValidateArgs) -> Result<i32, CeasError> {
    let results = run_validation(&ValidationOptions {
        seed: args.seed,
        corrupt_inverse_variance: args.corrupt_prop1,
    });
    print!("{}", render_table(&results));
    Ok(validation_exit_code(&results))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges_parse() {
        assert_eq!(parse_seed_range("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seed_range("1..=3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seed_range("7").unwrap(), vec![7]);
        assert!(parse_seed_range("5..2").is_err());
        assert!(parse_seed_range("x..2").is_err());
    }

    #[test]
    fn stall_maps_to_exit_3() {
        let err = CeasError::ConsensusStall { round: 4 };
        assert_eq!(exit_code_for(&err), EXIT_STALL);
        assert_eq!(exit_code_for(&CeasError::config("k", "m")), EXIT_BAD_CONFIG);
    }
}
