//! Cross-validation battery: every check computes the same quantity along two
//! independent routes, or tests a structural property of the output.

use std::fmt::Write as _;

use ginoe_core::distribution::{log_concavity_check, moments_exact, write_header, zeros};
use ginoe_core::gaussian::diff_profile;
use ginoe_core::precision::{pow2, rel_diff};
use ginoe_core::saddle::{mean_shift_a, solve_saddle};
use ginoe_core::spectral::bernoulli_decomposition;
use ginoe_core::{
    build_kernel, build_kernel_hypergeometric, eigen_sym, probabilities_convolution,
    probabilities_dft, EnsembleParams, PrecisionContext,
};
use ginoe_montecarlo::{compare, empirical_distribution, MIN_TRIALS};
use rug::Float;

use crate::commands::exact_f64;

/// Largest `N` for which the battery rebuilds the kernel from the
/// hypergeometric closed form.
pub const HYPERGEOMETRIC_MAX_N: usize = 40;
/// Largest `N` sampled by the Monte Carlo check.
pub const MONTE_CARLO_MAX_N: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CheckReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl CheckReport {
    fn push(&mut self, name: &'static str, status: Status, detail: impl Into<String>) {
        self.outcomes.push(CheckOutcome {
            name,
            status,
            detail: detail.into(),
        });
    }

    fn count(&self, status: Status) -> usize {
        self.outcomes.iter().filter(|o| o.status == status).count()
    }

    pub fn failed(&self) -> usize {
        self.count(Status::Fail)
    }

    pub fn to_csv(
        &self,
        params: &EnsembleParams,
        ctx: &PrecisionContext,
        trials: u64,
        seed: u64,
    ) -> String {
        let mut out = String::new();
        write_header(&mut out, Some(params), params.dim() + 1, ctx);
        let _ = writeln!(out, "# trials={trials}");
        let _ = writeln!(out, "# seed={seed}");
        let _ = writeln!(out, "# passed={}", self.count(Status::Pass));
        let _ = writeln!(out, "# failed={}", self.count(Status::Fail));
        let _ = writeln!(out, "# skipped={}", self.count(Status::Skip));
        out.push_str("check,status,detail\n");
        for o in &self.outcomes {
            let _ = writeln!(
                out,
                "{},{},{}",
                o.name,
                o.status.label(),
                o.detail.replace(',', ";")
            );
        }
        out
    }
}

fn sci(x: &Float) -> String {
    format!("{:.3e}", x.to_f64())
}

/// Runs the battery. Failures are recorded, never raised, so the report is
/// always complete up to the first stage whose output later checks need.
pub fn run_battery(
    params: &EnsembleParams,
    ctx: &PrecisionContext,
    trials: u64,
    seed: u64,
) -> CheckReport {
    let mut report = CheckReport::default();
    let bits = ctx.bits() as i32;
    let tau_exact = params.tau_exact().clone();

    if tau_exact > 0 && tau_exact < 1 && params.n() <= HYPERGEOMETRIC_MAX_N {
        match build_kernel_hypergeometric(params, ctx) {
            Ok(h) => report.push(
                "kernel_integral_vs_hypergeometric",
                Status::from_bool(h.report.reconciled_agrees()),
                h.report.summary(),
            ),
            Err(e) => report.push(
                "kernel_integral_vs_hypergeometric",
                Status::Fail,
                e.to_string(),
            ),
        }
    } else {
        report.push(
            "kernel_integral_vs_hypergeometric",
            Status::Skip,
            format!("needs 0 < tau < 1 and N <= {HYPERGEOMETRIC_MAX_N}"),
        );
    }

    let kernel = match build_kernel(params, ctx) {
        Ok(k) => k,
        Err(e) => {
            report.push("kernel", Status::Fail, e.to_string());
            return report;
        }
    };
    let spec = match eigen_sym(&kernel, ctx) {
        Ok(s) => s,
        Err(e) => {
            report.push("eigen_sym", Status::Fail, e.to_string());
            return report;
        }
    };

    let trace = kernel.trace();
    let trace_gap = rel_diff(&spec.sum(), &trace);
    report.push(
        "trace_equals_eigenvalue_sum",
        Status::from_bool(trace_gap <= pow2(64, 16 - bits)),
        format!("relative gap {}", sci(&trace_gap)),
    );

    match bernoulli_decomposition(&spec, ctx) {
        Ok(_) => report.push(
            "eigenvalues_in_unit_interval",
            Status::Pass,
            format!(
                "{} eigenvalues in [{}; {}]",
                spec.len(),
                sci(spec.lambdas().last().expect("nonempty")),
                sci(&spec.lambdas()[0])
            ),
        ),
        Err(e) => {
            report.push("eigenvalues_in_unit_interval", Status::Fail, e.to_string());
            return report;
        }
    }

    let dist = match probabilities_convolution(&spec, ctx) {
        Ok(d) => d,
        Err(e) => {
            report.push("probabilities", Status::Fail, e.to_string());
            return report;
        }
    };

    let total_gap = Float::with_val(64, dist.total() - 1u32).abs();
    report.push(
        "normalization",
        Status::from_bool(total_gap <= pow2(64, 24 - bits)),
        format!("|sum p - 1| = {}", sci(&total_gap)),
    );

    let (mean, var) = moments_exact(&spec);
    let (mean_p, var_p) = dist.moments_from_probs();
    let mean_gap = rel_diff(&mean, &mean_p);
    let var_gap = rel_diff(&var, &var_p);
    report.push(
        "moments_spectrum_vs_probabilities",
        Status::from_bool(mean_gap <= pow2(64, 32 - bits) && var_gap <= pow2(64, 32 - bits)),
        format!(
            "mean gap {}; variance gap {}",
            sci(&mean_gap),
            sci(&var_gap)
        ),
    );

    match probabilities_dft(&spec, ctx) {
        Ok(_) => report.push(
            "convolution_vs_dft",
            Status::Pass,
            format!("agree to 2^-{}", bits / 2),
        ),
        Err(e) => report.push("convolution_vs_dft", Status::Fail, e.to_string()),
    }

    match zeros(&spec, ctx) {
        Ok(z) => {
            let worst = z
                .scaled_residuals
                .iter()
                .fold(Float::with_val(64, 0u32), |a, b| a.max(b));
            report.push(
                "generating_function_zeros_negative",
                Status::from_bool(z.all_negative && z.certified),
                format!(
                    "all_negative={} certified={} worst residual {}",
                    z.all_negative,
                    z.certified,
                    sci(&worst)
                ),
            );
        }
        Err(e) => report.push(
            "generating_function_zeros_negative",
            Status::Fail,
            e.to_string(),
        ),
    }

    let lc = log_concavity_check(&dist);
    let margin = lc.worst_margin.as_ref().map_or_else(
        || "none".to_string(),
        |(k, m)| format!("k={k} margin {}", sci(m)),
    );
    report.push(
        "log_concavity",
        Status::from_bool(lc.passed),
        format!("{} interior points; worst {margin}", lc.checked),
    );

    let m = spec.len();
    if m >= 2 {
        let center = (mean.to_f64() / 2.0).round() as usize;
        let k = center.clamp(1, m - 1);
        match solve_saddle(&spec, k, ctx) {
            Ok(r) => {
                let a = mean_shift_a(&spec, &r);
                let target = Float::with_val(a.prec(), k as u64);
                let gap = rel_diff(&a, &target);
                report.push(
                    "saddle_equation_residual",
                    Status::from_bool(gap <= pow2(64, -bits / 2)),
                    format!("k={k}: |a(r)-k|/k = {}", sci(&gap)),
                );
            }
            Err(e) => report.push("saddle_equation_residual", Status::Fail, e.to_string()),
        }
    } else {
        report.push("saddle_equation_residual", Status::Skip, "no interior k");
    }

    report_precision_doubling(&mut report, params, ctx, &dist);

    let profile = diff_profile(&dist);
    let finite = profile
        .rows
        .iter()
        .all(|r| r.diff.is_finite() && r.scaled_diff.is_finite());
    report.push(
        "lclt_profile_finite",
        Status::from_bool(finite && profile.sup_lclt.is_finite()),
        format!(
            "sup_lclt {}; sup scaled diff {}",
            sci(&profile.sup_lclt),
            sci(&profile.sup_scaled_diff)
        ),
    );

    report_monte_carlo(&mut report, params, ctx, trials, seed);
    report
}

fn report_precision_doubling(
    report: &mut CheckReport,
    params: &EnsembleParams,
    ctx: &PrecisionContext,
    dist: &ginoe_core::RealCountDistribution,
) {
    let bits = ctx.bits() as i32;
    let high = match PrecisionContext::new(ctx.verify_bits()) {
        Ok(c) => c,
        Err(e) => return report.push("precision_doubling", Status::Fail, e.to_string()),
    };
    let refined = build_kernel(params, &high)
        .and_then(|k| eigen_sym(&k, &high))
        .and_then(|s| probabilities_convolution(&s, &high));
    match refined {
        Ok(hi) => {
            let floor = Float::with_val(64, pow2(64, 32 - bits));
            let worst = dist
                .probs()
                .iter()
                .zip(hi.probs())
                .filter(|(p, _)| **p > floor)
                .map(|(p, q)| rel_diff(p, q))
                .fold(Float::with_val(64, 0u32), |a, b| a.max(&b));
            report.push(
                "precision_doubling",
                Status::from_bool(worst <= pow2(64, -bits / 2)),
                format!(
                    "{} vs {} bits: worst relative change {}",
                    ctx.bits(),
                    high.bits(),
                    sci(&worst)
                ),
            );
        }
        Err(e) => report.push("precision_doubling", Status::Fail, e.to_string()),
    }
}

fn report_monte_carlo(
    report: &mut CheckReport,
    params: &EnsembleParams,
    ctx: &PrecisionContext,
    trials: u64,
    seed: u64,
) {
    if trials < MIN_TRIALS || params.n() > MONTE_CARLO_MAX_N {
        report.push(
            "monte_carlo_histogram",
            Status::Skip,
            format!("needs trials >= {MIN_TRIALS} and N <= {MONTE_CARLO_MAX_N}"),
        );
        return;
    }
    let exact = match exact_f64(params, ctx) {
        Ok(e) => e,
        Err(e) => return report.push("monte_carlo_histogram", Status::Fail, e.to_string()),
    };
    match empirical_distribution(params, trials, seed) {
        Ok(mc) => {
            let rows = compare(&mc, &exact);
            let worst = rows.iter().map(|r| r.z_score.abs()).fold(0.0f64, f64::max);
            report.push(
                "monte_carlo_histogram",
                Status::from_bool(worst < 4.0 && mc.parity_violations == 0),
                format!(
                    "{} trials seed {seed}: max |z| {worst:.3}; parity violations {}; discarded {}",
                    mc.trials, mc.parity_violations, mc.discarded
                ),
            );
        }
        Err(e) => report.push("monte_carlo_histogram", Status::Fail, e.to_string()),
    }
}
