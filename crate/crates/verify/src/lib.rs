//! Helpers for the acceptance suite: reading the CLI's CSV output and
//! reporting one line per criterion.

use std::collections::HashMap;
use std::process::ExitCode;

use ginoe_cli::config::{Ensemble, RunConfig, Task};
use ginoe_cli::{render, Format};

/// Result of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

pub fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Parsed CSV: `# key=value` metadata plus rows keyed by column.
#[derive(Debug, Clone)]
pub struct Csv {
    pub meta: HashMap<String, String>,
    pub rows: Vec<HashMap<String, String>>,
}

impl Csv {
    pub fn parse(text: &str) -> Csv {
        let mut meta = HashMap::new();
        let mut columns: Vec<String> = Vec::new();
        let mut rows = Vec::new();
        for line in text.lines() {
            if let Some(m) = line.strip_prefix("# ") {
                if let Some((k, v)) = m.split_once('=') {
                    meta.insert(k.to_string(), v.to_string());
                }
            } else if columns.is_empty() {
                columns = line.split(',').map(str::to_string).collect();
            } else {
                rows.push(
                    columns
                        .iter()
                        .cloned()
                        .zip(line.split(',').map(str::to_string))
                        .collect(),
                );
            }
        }
        Csv { meta, rows }
    }

    pub fn row(&self, column: &str, value: &str) -> &HashMap<String, String> {
        self.rows
            .iter()
            .find(|r| r.get(column).map(String::as_str) == Some(value))
            .unwrap_or_else(|| panic!("no row with {column}={value}"))
    }

    pub fn meta_f64(&self, key: &str) -> f64 {
        self.meta[key].parse().unwrap()
    }
}

/// Runs a subcommand through the CLI front end and parses its CSV.
pub fn cli(task: Task, n: usize, tau: &str, bits: u32) -> Csv {
    let run = RunConfig {
        task,
        n,
        ensemble: Ensemble::Tau(tau.to_string()),
        bits,
        format: Format::Csv,
    };
    Csv::parse(&render(&run).expect("run succeeds").0)
}

/// Collects criterion outcomes, printing each as it arrives.
#[derive(Debug, Default)]
pub struct Report {
    results: Vec<(u32, Outcome)>,
}

impl Report {
    pub fn record(&mut self, id: u32, o: Outcome) {
        println!(
            "criterion {id:>2}: {} : {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        self.results.push((id, o));
    }

    pub fn failed(&self) -> Vec<u32> {
        self.results
            .iter()
            .filter(|(_, o)| !o.pass)
            .map(|(id, _)| *id)
            .collect()
    }

    /// Prints the summary line; failure when any criterion failed.
    pub fn finish(&self) -> ExitCode {
        let failed = self.failed();
        let list: Vec<String> = failed.iter().map(u32::to_string).collect();
        println!(
            "acceptance: {} passed, {} failed{}",
            self.results.len() - failed.len(),
            failed.len(),
            if failed.is_empty() {
                String::new()
            } else {
                format!(" ({})", list.join(", "))
            }
        );
        if failed.is_empty() {
            ExitCode::SUCCESS
        } else {
            ExitCode::FAILURE
        }
    }
}
