//! `manimask`: select structure-preserving pixel masks and score them.
//!
//! Exit codes: 0 success, 1 input or parameter error, 2 capacity guard,
//! 3 numerical failure.

mod commands;
mod config;
mod output;
mod refs;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use manimask_core::Error as CoreError;

use crate::commands::{RenderArgs, SynthArgs};
use crate::config::{RunArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "manimask", version, about = "Structure-preserving pixel masks for image manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Select masks; writes mask_<m>.json (and .pgm when the image shape is known)
    Mask(RunArgs),
    /// Embed masked data with Isomap/LLE and score it against full-data references
    Evaluate(RunArgs),
    /// Leave-one-out out-of-sample extension and parameter estimation scores
    Oose(RunArgs),
    /// Write a synthetic dataset (swiss_roll or translating_blob)
    Synth(SynthArgs),
    /// Render a mask JSON file as a PGM raster
    RenderMask(RenderArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Mask(a) => commands::mask(&RunConfig::resolve(&a)?),
        Command::Evaluate(a) => commands::evaluate(&RunConfig::resolve(&a)?),
        Command::Oose(a) => commands::oose(&RunConfig::resolve(&a)?),
        Command::Synth(a) => commands::synth(&a),
        Command::RenderMask(a) => commands::render_mask(&a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<CoreError>())
        .map(|e| e.exit_code() as u8)
        .unwrap_or(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors; --help and --version are not errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
