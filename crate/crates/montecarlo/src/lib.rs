//! Double-precision Monte Carlo for the number of real eigenvalues of
//! elliptic GinOE matrices `X = √(1+τ) S + √(1-τ) A`, with `S = (G₁+G₁ᵀ)/2`
//! and `A = (G₂-G₂ᵀ)/2`.
//!
//! Trial `i` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `i`, so
//! results do not depend on how trials are scheduled across threads.

use std::fmt::Write as _;

use ginoe_core::EnsembleParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

pub mod schur;

pub use schur::{count_real_eigs, BlockCount, DEFAULT_DEFLATION};

/// Recorded in every [`MCResult`] and CSV header.
pub const GENERATOR: &str =
    "ChaCha8Rng::seed_from_u64(seed), stream = trial index; rand_distr::StandardNormal (ziggurat)";

/// Smallest trial count accepted by [`empirical_distribution`].
pub const MIN_TRIALS: u64 = 1000;

#[derive(Debug, Error)]
pub enum McError {
    #[error("QR iteration did not converge after {iterations} iterations")]
    Convergence { iterations: usize },
    #[error("at least {MIN_TRIALS} trials are required, got {0}")]
    TooFewTrials(u64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self {
            n,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.n.max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }
}

/// One elliptic GinOE sample of size `n`. Draws `G₁` then `G₂`, row by row.
pub fn sample_elliptic_ginoe<R: Rng + ?Sized>(n: usize, tau: f64, rng: &mut R) -> Matrix {
    let mut draw = || -> Vec<f64> { (0..n * n).map(|_| rng.sample(StandardNormal)).collect() };
    let g1 = draw();
    let g2 = draw();
    let sym = (1.0 + tau).sqrt();
    let anti = (1.0 - tau).max(0.0).sqrt();
    let mut x = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let s = 0.5 * (g1[i * n + j] + g1[j * n + i]);
            let a = 0.5 * (g2[i * n + j] - g2[j * n + i]);
            x.set(i, j, sym * s + anti * a);
        }
    }
    x
}

/// Deterministic generator for trial `index`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone)]
pub struct MCResult {
    pub n: usize,
    pub tau: f64,
    pub params: Option<EnsembleParams>,
    pub trials: u64,
    pub seed: u64,
    pub generator: &'static str,
    /// Histogram indexed by the number of real eigenvalues `0..=n`.
    pub counts_nr: Vec<u64>,
    /// Trials dropped because QR did not converge.
    pub discarded: u64,
    pub near_degenerate: u64,
    /// Trials whose real count had the wrong parity (should never happen).
    pub parity_violations: u64,
    pub empirical_mean: f64,
    pub empirical_var: f64,
    pub warning: Option<String>,
}

impl MCResult {
    /// Trials that produced a count.
    pub fn converged(&self) -> u64 {
        self.counts_nr.iter().sum()
    }

    /// Histogram over `k = N_ℝ/2` (even `n`).
    pub fn counts(&self) -> Vec<u64> {
        self.counts_nr.iter().step_by(2).copied().collect()
    }

    pub fn empirical_p(&self) -> Vec<f64> {
        let total = self.converged() as f64;
        self.counts().iter().map(|&c| c as f64 / total).collect()
    }

    /// `√(p(1-p)/trials)` with the empirical `p` of each bin.
    pub fn std_errors(&self) -> Vec<f64> {
        let total = self.converged() as f64;
        self.empirical_p()
            .iter()
            .map(|p| (p * (1.0 - p) / total).sqrt())
            .collect()
    }
}

/// Runs `trials` samples of size `n` at ellipticity `tau ∈ [0, 1]` in parallel.
pub fn run_trials(n: usize, tau: f64, trials: u64, seed: u64) -> Result<MCResult, McError> {
    if n == 0 {
        return Err(McError::InvalidParams("n must be positive".into()));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(McError::InvalidParams(format!(
            "tau = {tau} must lie in [0, 1]"
        )));
    }
    let outcomes: Vec<Option<BlockCount>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let x = sample_elliptic_ginoe(n, tau, &mut rng);
            count_real_eigs(&x, DEFAULT_DEFLATION).ok()
        })
        .collect();

    let mut counts_nr = vec![0u64; n + 1];
    let (mut discarded, mut near, mut parity) = (0u64, 0u64, 0u64);
    for outcome in &outcomes {
        match outcome {
            Some(c) => {
                assert_eq!(c.total(), n, "eigenvalue count not conserved");
                let real = c.real();
                counts_nr[real] += 1;
                near += c.near_degenerate as u64;
                if real % 2 != n % 2 {
                    parity += 1;
                }
            }
            None => discarded += 1,
        }
    }
    let converged: u64 = counts_nr.iter().sum();
    let (mean, var) = if converged == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let c = converged as f64;
        let m1: f64 = counts_nr
            .iter()
            .enumerate()
            .map(|(r, &k)| r as f64 * k as f64)
            .sum::<f64>()
            / c;
        let m2: f64 = counts_nr
            .iter()
            .enumerate()
            .map(|(r, &k)| (r as f64 - m1).powi(2) * k as f64)
            .sum::<f64>();
        (m1, if converged > 1 { m2 / (c - 1.0) } else { 0.0 })
    };
    let warning = (discarded * 1000 > trials)
        .then(|| format!("{discarded} of {trials} trials discarded (QR non-convergence); results may be unreliable"));
    Ok(MCResult {
        n,
        tau,
        params: None,
        trials,
        seed,
        generator: GENERATOR,
        counts_nr,
        discarded,
        near_degenerate: near,
        parity_violations: parity,
        empirical_mean: mean,
        empirical_var: var,
        warning,
    })
}

/// Empirical distribution of `N_ℝ` for an ensemble, `trials ≥ 1000`.
pub fn empirical_distribution(
    params: &EnsembleParams,
    trials: u64,
    seed: u64,
) -> Result<MCResult, McError> {
    if trials < MIN_TRIALS {
        return Err(McError::TooFewTrials(trials));
    }
    let mut result = run_trials(params.n(), params.tau_f64(), trials, seed)?;
    result.params = Some(params.clone());
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub k: usize,
    pub count: u64,
    pub empirical_p: f64,
    pub exact_p: f64,
    /// `√(p(1-p)/trials)` at the exact `p`.
    pub std_err: f64,
    pub z_score: f64,
}

/// Bin-by-bin comparison against exact probabilities `exact[k] = p_{2k}`.
pub fn compare(mc: &MCResult, exact: &[f64]) -> Vec<ComparisonRow> {
    let total = mc.converged() as f64;
    mc.counts()
        .into_iter()
        .enumerate()
        .map(|(k, count)| {
            let exact_p = exact.get(k).copied().unwrap_or(0.0);
            let empirical_p = count as f64 / total;
            let std_err = (exact_p * (1.0 - exact_p) / total).sqrt();
            let gap = empirical_p - exact_p;
            let z_score = if std_err > 0.0 {
                gap / std_err
            } else if gap == 0.0 {
                0.0
            } else {
                f64::INFINITY.copysign(gap)
            };
            ComparisonRow {
                k,
                count,
                empirical_p,
                exact_p,
                std_err,
                z_score,
            }
        })
        .collect()
}

/// CSV `k,count,empirical_p,exact_p,std_err,z_score` with a header carrying
/// the parameters, trial count, seed and generator.
pub fn comparison_csv(mc: &MCResult, rows: &[ComparisonRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# N={}", mc.n);
    match &mc.params {
        Some(p) => {
            let _ = writeln!(out, "# tau={}", p.tau_label());
            if let Some(a) = p.alpha_f64() {
                let _ = writeln!(out, "# alpha={a}");
            }
        }
        None => {
            let _ = writeln!(out, "# tau={}", mc.tau);
        }
    }
    let _ = writeln!(out, "# trials={}", mc.trials);
    let _ = writeln!(out, "# seed={}", mc.seed);
    let _ = writeln!(out, "# generator={}", mc.generator);
    let _ = writeln!(out, "# discarded={}", mc.discarded);
    let _ = writeln!(out, "# parity_violations={}", mc.parity_violations);
    let _ = writeln!(out, "# empirical_mean_NR={:e}", mc.empirical_mean);
    let _ = writeln!(out, "# empirical_var_NR={:e}", mc.empirical_var);
    out.push_str("k,count,empirical_p,exact_p,std_err,z_score\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:e},{:e},{:e},{:e}",
            r.k, r.count, r.empirical_p, r.exact_p, r.std_err, r.z_score
        );
    }
    out
}
