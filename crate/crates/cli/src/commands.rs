use std::fmt::Write as _;

use ginoe_core::distribution::{
    moments_asymptotic, moments_exact, moments_weak, write_header, zeros,
};
use ginoe_core::gaussian::{clt_distance, clt_rows, diff_profile, lclt_csv};
use ginoe_core::saddle::{error_profile, saddle_csv, stirling_approx};
use ginoe_core::{
    build_kernel, eigen_sym, probabilities_convolution, EnsembleParams, PrecisionContext,
    RealCountDistribution, Spectrum,
};
use ginoe_montecarlo::{compare, comparison_csv, empirical_distribution};
use rug::Float;

use crate::config::{RunConfig, Task};
use crate::{check, CliError};

/// Kernel → spectrum → distribution.
pub fn pipeline(
    params: &EnsembleParams,
    ctx: &PrecisionContext,
) -> Result<(Spectrum, RealCountDistribution), CliError> {
    let kernel = build_kernel(params, ctx)?;
    let spec = eigen_sym(&kernel, ctx)?;
    let dist = probabilities_convolution(&spec, ctx)?;
    Ok((spec, dist))
}

/// CSV text of one run plus the number of failed checks (`check` only).
pub fn execute(run: &RunConfig) -> Result<(String, usize), CliError> {
    let params = run.params()?;
    let ctx = run.ctx()?;
    let csv = match run.task {
        Task::Probs => pipeline(&params, &ctx)?.1.to_csv(&ctx),
        Task::Moments => moments_csv(&params, &ctx)?,
        Task::Zeros => zeros_csv(&params, &ctx)?,
        Task::Saddle { k } => saddle(&params, k, &ctx)?,
        Task::Lclt => lclt_csv(&diff_profile(&pipeline(&params, &ctx)?.1), &ctx),
        Task::Clt => clt_csv(&params, &ctx)?,
        Task::Mc { trials, seed } => mc_csv(&params, trials, seed, &ctx)?,
        Task::Check { trials, seed } => {
            let report = check::run_battery(&params, &ctx, trials, seed);
            return Ok((report.to_csv(&params, &ctx, trials, seed), report.failed()));
        }
    };
    Ok((csv, 0))
}

/// Inserts `# key=value` lines just before the column line.
pub fn with_metadata(csv: &str, extra: &[(&str, String)]) -> String {
    let split = csv
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.len() + 1)
        .sum::<usize>();
    let mut out = csv[..split].to_string();
    for (k, v) in extra {
        let _ = writeln!(out, "# {k}={v}");
    }
    out.push_str(&csv[split..]);
    out
}

fn moments_csv(params: &EnsembleParams, ctx: &PrecisionContext) -> Result<String, CliError> {
    let (spec, dist) = pipeline(params, ctx)?;
    let mut rows: Vec<(&str, Float, Float)> = Vec::new();
    let (mean, var) = moments_exact(&spec);
    rows.push(("exact", mean, var));
    let (mean, var) = dist.moments_from_probs();
    rows.push(("from_probabilities", mean, var));
    if params.alpha().is_none() {
        let (mean, var) = moments_asymptotic(params, ctx)?;
        rows.push(("asymptotic_fixed_tau", mean, var));
    }
    let prec = ctx.bits() + 32;
    let alpha = match params.alpha() {
        Some(a) => Float::with_val(prec, a),
        None => {
            let one_minus_tau = Float::with_val(prec, 1u32 - params.tau(prec));
            Float::with_val(prec, one_minus_tau * params.n() as u64).sqrt()
        }
    };
    let (mean, var) = moments_weak(params.n() as u64, &alpha, ctx)?;
    rows.push(("asymptotic_weak", mean, var));

    let mut out = String::new();
    write_header(&mut out, Some(params), dist.probs().len(), ctx);
    let _ = writeln!(out, "# weak_alpha={}", ctx.format(&alpha));
    out.push_str("source,mean_NR,var_NR,var_over_mean\n");
    for (name, mean, var) in rows {
        let ratio = Float::with_val(ctx.bits(), &var / &mean);
        let _ = writeln!(
            out,
            "{name},{},{},{}",
            ctx.format(&mean),
            ctx.format(&var),
            ctx.format(&ratio)
        );
    }
    Ok(out)
}

fn zeros_csv(params: &EnsembleParams, ctx: &PrecisionContext) -> Result<String, CliError> {
    let spec = eigen_sym(&build_kernel(params, ctx)?, ctx)?;
    let z = zeros(&spec, ctx)?;
    let mut out = String::new();
    write_header(&mut out, Some(params), spec.len() + 1, ctx);
    let _ = writeln!(out, "# all_negative={}", z.all_negative);
    let _ = writeln!(out, "# certified={}", z.certified);
    out.push_str("index,lambda,zero,scaled_residual\n");
    for (i, ((l, zero), res)) in spec
        .lambdas()
        .iter()
        .zip(&z.zeros)
        .zip(&z.scaled_residuals)
        .enumerate()
    {
        let _ = writeln!(
            out,
            "{i},{},{},{:e}",
            ctx.format(l),
            ctx.format(zero),
            res.to_f64()
        );
    }
    Ok(out)
}

fn saddle(
    params: &EnsembleParams,
    k: Option<usize>,
    ctx: &PrecisionContext,
) -> Result<String, CliError> {
    let (spec, dist) = pipeline(params, ctx)?;
    match k {
        Some(k) => {
            let row = stirling_approx(&spec, k, Some(&dist), ctx)?;
            Ok(saddle_csv(&spec, &[row], ctx))
        }
        None => {
            let profile = error_profile(&spec, &dist, ctx)?;
            Ok(with_metadata(
                &saddle_csv(&spec, &profile.rows, ctx),
                &[
                    ("constant_sqrt_b", format!("{:e}", profile.constant_sqrt_b)),
                    ("constant_b", format!("{:e}", profile.constant_b)),
                ],
            ))
        }
    }
}

fn clt_csv(params: &EnsembleParams, ctx: &PrecisionContext) -> Result<String, CliError> {
    let (_, dist) = pipeline(params, ctx)?;
    let mut out = String::new();
    write_header(&mut out, Some(params), dist.probs().len(), ctx);
    let _ = writeln!(out, "# mean_NR={}", ctx.format(dist.mean_nr()));
    let _ = writeln!(out, "# var_NR={}", ctx.format(dist.var_nr()));
    let _ = writeln!(out, "# clt_distance={}", ctx.format(&clt_distance(&dist)));
    out.push_str("k,x_k,cdf_left,cdf_right,normal_cdf\n");
    for r in clt_rows(&dist) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.k,
            ctx.format(&r.x_k),
            ctx.format(&r.cdf_left),
            ctx.format(&r.cdf_right),
            ctx.format(&r.normal_cdf)
        );
    }
    Ok(out)
}

/// Exact `p_{2k}` in double precision; at `τ = 1` every eigenvalue is real.
pub fn exact_f64(params: &EnsembleParams, ctx: &PrecisionContext) -> Result<Vec<f64>, CliError> {
    if *params.tau_exact() == 1 {
        let mut p = vec![0.0; params.n() / 2 + 1];
        p[params.n() / 2] = 1.0;
        return Ok(p);
    }
    Ok(pipeline(params, ctx)?
        .1
        .probs()
        .iter()
        .map(Float::to_f64)
        .collect())
}

fn mc_csv(
    params: &EnsembleParams,
    trials: u64,
    seed: u64,
    ctx: &PrecisionContext,
) -> Result<String, CliError> {
    let exact = exact_f64(params, ctx)?;
    let mc = empirical_distribution(params, trials, seed)?;
    let rows = compare(&mc, &exact);
    let mut csv = comparison_csv(&mc, &rows);
    if let Some(w) = &mc.warning {
        csv = with_metadata(&csv, &[("warning", w.replace('\n', " "))]);
    }
    Ok(csv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metadata_goes_before_columns() {
        let csv = with_metadata("# N=2\nk,p\n0,1\n", &[("x", "3".into())]);
        assert_eq!(csv, "# N=2\n# x=3\nk,p\n0,1\n");
    }

    #[test]
    fn exact_at_tau_one_is_a_point_mass() {
        let params = EnsembleParams::weak(6, 0.0).unwrap();
        let ctx = PrecisionContext::new(64).unwrap();
        assert_eq!(exact_f64(&params, &ctx).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
    }
}
