use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ginoe_core::{EnsembleParams, PrecisionContext};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "ginoe",
    version,
    about = "Exact distribution of the number of real eigenvalues of elliptic GinOE matrices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Probabilities p_{2k} for k = 0..N/2
    Probs(Common),
    /// Exact moments of N_R and both asymptotic regimes
    Moments(Common),
    /// Zeros of the generating function with a negativity certificate
    Zeros(Common),
    /// Saddle-point approximation at --k, or at every interior k
    Saddle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Difference profile against the lattice Gaussian and the LCLT sup norms
    Lclt(Common),
    /// Kolmogorov distance to the normal law
    Clt(Common),
    /// Monte Carlo histogram compared with the exact probabilities
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Cross-validation battery with a pass/fail report
    Check {
        #[command(flatten)]
        common: Common,
        /// Monte Carlo trials (0 skips the sampling check)
        #[arg(long, default_value_t = 20_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Matrix size (even)
    #[arg(long, conflicts_with = "n_list")]
    pub n: Option<usize>,
    /// Comma-separated matrix sizes, run concurrently
    #[arg(long, value_delimiter = ',')]
    pub n_list: Vec<usize>,
    /// Ellipticity in [0, 1)
    #[arg(long, conflicts_with_all = ["alpha", "tau_list"])]
    pub tau: Option<String>,
    /// Weak non-symmetry parameter, tau = 1 - alpha^2/N
    #[arg(long, conflicts_with = "tau_list")]
    pub alpha: Option<String>,
    /// Comma-separated ellipticities, run concurrently
    #[arg(long, value_delimiter = ',')]
    pub tau_list: Vec<String>,
    /// Binary working precision
    #[arg(long, env = "GINOE_BITS", default_value_t = PrecisionContext::DEFAULT_BITS)]
    pub bits: u32,
    /// Output file (single run) or directory (sweeps); stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ensemble {
    Tau(String),
    Alpha(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Probs,
    Moments,
    Zeros,
    Saddle { k: Option<usize> },
    Lclt,
    Clt,
    Mc { trials: u64, seed: u64 },
    Check { trials: u64, seed: u64 },
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Probs => "probs",
            Task::Moments => "moments",
            Task::Zeros => "zeros",
            Task::Saddle { .. } => "saddle",
            Task::Lclt => "lclt",
            Task::Clt => "clt",
            Task::Mc { .. } => "mc",
            Task::Check { .. } => "check",
        }
    }
}

/// One fully validated pipeline run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub task: Task,
    pub n: usize,
    pub ensemble: Ensemble,
    pub bits: u32,
    pub format: Format,
}

impl RunConfig {
    pub fn params(&self) -> Result<EnsembleParams, CliError> {
        let p = match &self.ensemble {
            Ensemble::Tau(t) => EnsembleParams::from_decimal(self.n, t),
            Ensemble::Alpha(a) => EnsembleParams::weak_decimal(self.n, a),
        };
        p.map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn ctx(&self) -> Result<PrecisionContext, CliError> {
        PrecisionContext::new(self.bits).map_err(|e| CliError::Usage(e.to_string()))
    }

    /// File name used inside an output directory for sweeps.
    pub fn file_name(&self) -> String {
        let ens = match &self.ensemble {
            Ensemble::Tau(t) => format!("tau{t}"),
            Ensemble::Alpha(a) => format!("alpha{a}"),
        };
        format!(
            "{}_N{}_{}.{}",
            self.task.name(),
            self.n,
            ens,
            self.format.extension()
        )
    }
}

/// A batch of runs and where their output goes.
#[derive(Debug, Clone)]
pub struct Plan {
    pub runs: Vec<RunConfig>,
    pub out: Option<PathBuf>,
    /// `out` names a directory (sweeps) rather than a file.
    pub out_is_dir: bool,
}

impl Cli {
    pub fn plan(&self) -> Result<Plan, CliError> {
        let (task, common) = match &self.command {
            Command::Probs(c) => (Task::Probs, c),
            Command::Moments(c) => (Task::Moments, c),
            Command::Zeros(c) => (Task::Zeros, c),
            Command::Saddle { common, k } => (Task::Saddle { k: *k }, common),
            Command::Lclt(c) => (Task::Lclt, c),
            Command::Clt(c) => (Task::Clt, c),
            Command::Mc {
                common,
                trials,
                seed,
            } => (
                Task::Mc {
                    trials: *trials,
                    seed: *seed,
                },
                common,
            ),
            Command::Check {
                common,
                trials,
                seed,
            } => (
                Task::Check {
                    trials: *trials,
                    seed: *seed,
                },
                common,
            ),
        };
        common.plan(task)
    }
}

impl Common {
    fn plan(&self, task: Task) -> Result<Plan, CliError> {
        let ns: Vec<usize> = match (self.n, self.n_list.is_empty()) {
            (Some(n), true) => vec![n],
            (None, false) => self.n_list.clone(),
            (None, true) => {
                return Err(CliError::Usage("one of --n or --n-list is required".into()))
            }
            (Some(_), false) => {
                return Err(CliError::Usage(
                    "--n and --n-list are mutually exclusive".into(),
                ))
            }
        };
        let ensembles: Vec<Ensemble> = match (&self.tau, &self.alpha, self.tau_list.is_empty()) {
            (Some(t), None, true) => vec![Ensemble::Tau(t.clone())],
            (None, Some(a), true) => vec![Ensemble::Alpha(a.clone())],
            (None, None, false) => self.tau_list.iter().cloned().map(Ensemble::Tau).collect(),
            (None, None, true) => {
                return Err(CliError::Usage(
                    "one of --tau, --alpha or --tau-list is required".into(),
                ))
            }
            _ => {
                return Err(CliError::Usage(
                    "--tau, --alpha and --tau-list are mutually exclusive".into(),
                ))
            }
        };
        if self.bits < PrecisionContext::MIN_BITS {
            return Err(CliError::Usage(format!(
                "--bits must be at least {}",
                PrecisionContext::MIN_BITS
            )));
        }
        let runs: Vec<RunConfig> = ns
            .iter()
            .flat_map(|&n| {
                ensembles.iter().map(move |e| RunConfig {
                    task,
                    n,
                    ensemble: e.clone(),
                    bits: self.bits,
                    format: self.format,
                })
            })
            .collect();
        for run in &runs {
            run.params()?;
            run.ctx()?;
            if let Task::Saddle { k: Some(k) } = task {
                if k > run.n / 2 {
                    return Err(CliError::Usage(format!(
                        "--k {k} exceeds N/2 = {}",
                        run.n / 2
                    )));
                }
            }
        }
        Ok(Plan {
            out_is_dir: runs.len() > 1,
            runs,
            out: self.out.clone(),
        })
    }
}
