//! Front end for the `ginoe` binary: argument handling, sweeps and output.

pub mod check;
pub mod commands;
pub mod config;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

pub use config::{Cli, Command, Format, Plan, RunConfig, Task};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Numeric(#[from] ginoe_core::Error),
    #[error(transparent)]
    MonteCarlo(#[from] ginoe_montecarlo::McError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{failed} check(s) failed")]
    ChecksFailed { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Numeric(_) => "numeric",
            CliError::MonteCarlo(_) => "monte_carlo",
            CliError::Io(_) => "io",
            CliError::ChecksFailed { .. } => "check_failed",
        }
    }

    /// `{"error": {"kind": ..., "message": ...}}`
    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }
}

/// Rendered output of one run.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub run: RunConfig,
    pub contents: String,
    /// Where the contents were written; `None` means stdout.
    pub path: Option<PathBuf>,
    pub failed_checks: usize,
}

pub fn render(run: &RunConfig) -> Result<(String, usize), CliError> {
    let (csv, failed) = commands::execute(run)?;
    let text = match run.format {
        Format::Csv => csv,
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&output::csv_to_json(&csv))
                .expect("JSON values serialize");
            s.push('\n');
            s
        }
    };
    Ok((text, failed))
}

/// Runs every configuration of the plan concurrently, then writes the
/// results in plan order. Files are replaced atomically; without `--out`
/// the contents go to `stdout`.
pub fn run_plan(plan: &Plan, stdout: &mut dyn Write) -> Result<Vec<Artifact>, CliError> {
    let rendered: Vec<Result<(String, usize), CliError>> =
        plan.runs.par_iter().map(render).collect();
    let mut artifacts = Vec::with_capacity(rendered.len());
    for (run, result) in plan.runs.iter().zip(rendered) {
        let (contents, failed_checks) = result?;
        let path = plan.out.as_ref().map(|out| {
            if plan.out_is_dir {
                out.join(run.file_name())
            } else {
                out.clone()
            }
        });
        match &path {
            Some(p) => output::write_atomic(p, &contents)?,
            None => stdout.write_all(contents.as_bytes())?,
        }
        artifacts.push(Artifact {
            run: run.clone(),
            contents,
            path,
            failed_checks,
        });
    }
    let failed: usize = artifacts.iter().map(|a| a.failed_checks).sum();
    if failed > 0 {
        return Err(CliError::ChecksFailed { failed });
    }
    Ok(artifacts)
}
