//! `svcheck verify|sweep|trace|boundary|catalog --config <path> [--out <dir>]`
//!
//! Exit codes: 0 all checks pass, 1 a check failed (see `failures` in the
//! summary), 2 configuration error.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::commands::{Context, Summary};
use crate::config::{CommandName, RunConfig, Tolerances};
use crate::error::CliError;
use crate::output::{to_pretty, Sink};

#[derive(Debug, Parser)]
#[command(name = "svcheck", version, about = "Batch verification of static vacuum identities and inequalities")]
struct Args {
    #[arg(value_enum)]
    command: CommandName,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for tables and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: &Args) -> Result<Summary, CliError> {
    let config = RunConfig::load(&args.config)?;
    if let Some(c) = config.command {
        if c != args.command {
            return Err(CliError::Config(format!(
                "config is for `{c:?}` but `{:?}` was requested",
                args.command
            )));
        }
    }
    let tol = Tolerances::resolve(&config.tolerances)?;
    let sink = Sink {
        dir: args.out.clone().or_else(|| config.output.path.clone()),
        format: config.output.format,
    };
    let ctx = Context { config: &config, tol, sink };
    let summary = match args.command {
        CommandName::Verify => commands::verify(&ctx)?,
        CommandName::Sweep => commands::sweep(&ctx)?,
        CommandName::Trace => commands::trace(&ctx)?,
        CommandName::Boundary => commands::boundary(&ctx)?,
        CommandName::Catalog => commands::catalog(&ctx)?,
    };
    ctx.sink.json("summary.json", &summary)?;
    if !summary.failures.is_empty() {
        ctx.sink.json("failures.json", &summary.failures)?;
    }
    Ok(summary)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(summary) => {
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            for f in &summary.failures {
                eprintln!("FAIL {} {}: {}", f.entry, f.check, f.detail);
            }
            match to_pretty(&summary) {
                Ok(s) => print!("{s}"),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            if summary.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
