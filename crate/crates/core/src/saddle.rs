//! Saddle-point (Stirling-like) approximation of individual probabilities:
//! `p_{2k} ≈ Z(r_k) / (r_k^k √(2π b(r_k)))` with `a(r_k) = k`.

use std::fmt::Write as _;

use rug::Float;

use crate::distribution::{write_header, RealCountDistribution};
use crate::error::{Error, Result};
use crate::precision::{pi, pow2, PrecisionContext};
use crate::special::GUARD_BITS;
use crate::spectral::{bernoulli_decomposition, Spectrum};

const MAX_ITERATIONS: usize = 20_000;

#[derive(Debug, Clone)]
pub struct SaddleResult {
    pub k: usize,
    pub r_k: Float,
    pub a_at_r: Float,
    pub b_at_r: Float,
    pub approx_p: Float,
    pub exact_p: Option<Float>,
    pub ratio: Option<Float>,
}

/// `a(r) = r Σ λ/(1 + (r-1)λ)`, the mean of the tilted distribution.
pub fn mean_shift_a(spec: &Spectrum, r: &Float) -> Float {
    let prec = r.prec().max(spec.prec());
    let mut sum = Float::with_val(prec, 0u32);
    for l in spec.lambdas() {
        let rl = Float::with_val(prec, r * l);
        // 1 + (r-1)λ = (1-λ) + rλ: both terms positive
        let denom = Float::with_val(prec, 1u32 - l) + &rl;
        sum += rl / denom;
    }
    sum
}

/// `b(r) = r Σ λ(1-λ)/(1 + (r-1)λ)²`, the variance of the tilted distribution.
pub fn var_shift_b(spec: &Spectrum, r: &Float) -> Float {
    let prec = r.prec().max(spec.prec());
    let mut sum = Float::with_val(prec, 0u32);
    for l in spec.lambdas() {
        let q = Float::with_val(prec, 1u32 - l);
        let rl = Float::with_val(prec, r * l);
        let denom = Float::with_val(prec, &q + &rl).square();
        sum += Float::with_val(prec, rl * q) / denom;
    }
    sum
}

/// Root of `a(r) = k` for an integer `0 < k < N/2`.
pub fn solve_saddle(spec: &Spectrum, k: usize, ctx: &PrecisionContext) -> Result<Float> {
    let max = spec.len();
    if k == 0 || k >= max {
        return Err(Error::Endpoint { k, max });
    }
    solve_saddle_target(spec, &Float::with_val(ctx.bits(), k), ctx)
}

/// Root of `a(r) = target` for a real `0 < target < N/2`.
///
/// Works in `t = ln r`: a bracket is grown from `t = 0` by doubling, then
/// Newton steps with `da/dt = b` are taken, falling back to bisection whenever
/// a step leaves the bracket.
pub fn solve_saddle_target(
    spec: &Spectrum,
    target: &Float,
    ctx: &PrecisionContext,
) -> Result<Float> {
    bernoulli_decomposition(spec, ctx)?;
    let max = spec.len();
    if *target <= 0 || *target >= max as u64 {
        return Err(Error::Domain {
            op: "solve_saddle",
            detail: format!(
                "target {} must lie strictly between 0 and {max}",
                target.to_f64()
            ),
        });
    }
    let prec = ctx.bits() + GUARD_BITS;
    let lifted = Spectrum::from_lambdas(
        spec.lambdas()
            .iter()
            .map(|l| Float::with_val(prec, l))
            .collect(),
    );
    let target = Float::with_val(prec, target);
    let f = |t: &Float| -> Float {
        mean_shift_a(&lifted, &Float::with_val(prec, t.exp_ref())) - &target
    };

    let mut lo = Float::with_val(prec, 0u32);
    let mut hi = Float::with_val(prec, 0u32);
    let at_zero = f(&lo);
    if at_zero.is_zero() {
        return Ok(Float::with_val(ctx.bits(), 1u32));
    }
    let mut step = Float::with_val(prec, 1u32);
    let mut grown = 0;
    if at_zero < 0 {
        while f(&hi) < 0 {
            lo.clone_from(&hi);
            hi += &step;
            step *= 2u32;
            grown += 1;
            if grown > 64 {
                return Err(bracket_failure(grown));
            }
        }
    } else {
        while f(&lo) > 0 {
            hi.clone_from(&lo);
            lo -= &step;
            step *= 2u32;
            grown += 1;
            if grown > 64 {
                return Err(bracket_failure(grown));
            }
        }
    }

    let tol = pow2(prec, GUARD_BITS as i32 + 8 - prec as i32);
    let mut t = Float::with_val(prec, &lo + &hi) / 2u32;
    for iteration in 0..MAX_ITERATIONS {
        let r = Float::with_val(prec, t.exp_ref());
        let value = mean_shift_a(&lifted, &r) - &target;
        if value.is_zero() {
            return Ok(Float::with_val(ctx.bits(), r));
        }
        if value < 0 {
            lo.clone_from(&t);
        } else {
            hi.clone_from(&t);
        }
        let slope = var_shift_b(&lifted, &r);
        let mut next = Float::with_val(prec, &t - Float::with_val(prec, &value / &slope));
        if !(next > lo && next < hi) {
            next = Float::with_val(prec, &lo + &hi) / 2u32;
        }
        let moved = Float::with_val(prec, &next - &t).abs();
        let scale = Float::with_val(prec, t.abs_ref()).max(&Float::with_val(prec, 1u32));
        t = next;
        let width = Float::with_val(prec, &hi - &lo);
        if moved <= Float::with_val(prec, &tol * &scale)
            || width <= Float::with_val(prec, &tol * &scale)
        {
            let r = Float::with_val(prec, t.exp_ref());
            let residual = Float::with_val(prec, mean_shift_a(&lifted, &r) - &target).abs();
            let bound = Float::with_val(prec, target.clone().max(&Float::with_val(prec, 1u32)))
                * pow2(64, -(ctx.bits() as i32) / 2);
            if residual > bound {
                return Err(Error::Convergence {
                    op: "solve_saddle",
                    iterations: iteration + 1,
                    residual: format!("{:.3e}", residual.to_f64()),
                });
            }
            return Ok(Float::with_val(ctx.bits(), r));
        }
    }
    Err(Error::Convergence {
        op: "solve_saddle",
        iterations: MAX_ITERATIONS,
        residual: format!("bracket [{}, {}] in ln r", lo.to_f64(), hi.to_f64()),
    })
}

fn bracket_failure(steps: usize) -> Error {
    Error::Convergence {
        op: "solve_saddle",
        iterations: steps,
        residual: "could not bracket the root in ln r".into(),
    }
}

/// Saddle-point approximation at `k`, with the exact probability and the
/// ratio `approx/exact` attached when `exact` is given.
pub fn stirling_approx(
    spec: &Spectrum,
    k: usize,
    exact: Option<&RealCountDistribution>,
    ctx: &PrecisionContext,
) -> Result<SaddleResult> {
    let r = solve_saddle(spec, k, ctx)?;
    let prec = ctx.bits() + GUARD_BITS;
    let r = Float::with_val(prec, r);
    let a = mean_shift_a(spec, &r);
    let b = var_shift_b(spec, &r);

    let mut log_z = Float::with_val(prec, 0u32);
    for l in spec.lambdas() {
        let term = Float::with_val(prec, 1u32 - l) + Float::with_val(prec, &r * l);
        log_z += term.ln();
    }
    let log_r = Float::with_val(prec, r.ln_ref());
    let two_pi_b = Float::with_val(prec, pi(prec) * 2u32) * &b;
    let log_approx = log_z - log_r * k as u64 - two_pi_b.ln() / 2u32;
    let approx_p = Float::with_val(ctx.bits(), log_approx.exp());

    let exact_p = exact.map(|d| d.prob(k).clone());
    let ratio = exact_p
        .as_ref()
        .map(|e| Float::with_val(ctx.bits(), &approx_p / e));
    Ok(SaddleResult {
        k,
        r_k: Float::with_val(ctx.bits(), r),
        a_at_r: Float::with_val(ctx.bits(), a),
        b_at_r: Float::with_val(ctx.bits(), b),
        approx_p,
        exact_p,
        ratio,
    })
}

/// Saddle results at every interior `k`, with the empirical constants of the
/// relative error `|ratio - 1|` against `b(r_k)^{-1/2}` and `b(r_k)^{-1}`.
#[derive(Debug, Clone)]
pub struct ErrorProfile {
    pub rows: Vec<SaddleResult>,
    /// `max |ratio - 1| √b` over the bulk `|k - Σλ| ≤ 3√(Σλ(1-λ))`.
    pub constant_sqrt_b: f64,
    /// `max |ratio - 1| b` over the same range.
    pub constant_b: f64,
}

pub fn error_profile(
    spec: &Spectrum,
    exact: &RealCountDistribution,
    ctx: &PrecisionContext,
) -> Result<ErrorProfile> {
    let rows = (1..spec.len())
        .map(|k| stirling_approx(spec, k, Some(exact), ctx))
        .collect::<Result<Vec<_>>>()?;
    let center = exact.mean_nr().to_f64() / 2.0;
    let spread = 3.0 * (exact.var_nr().to_f64() / 4.0).sqrt();
    let (mut c_sqrt, mut c_lin) = (0.0f64, 0.0f64);
    for row in rows
        .iter()
        .filter(|r| (r.k as f64 - center).abs() <= spread)
    {
        let err = (row.ratio.as_ref().expect("exact attached").to_f64() - 1.0).abs();
        let b = row.b_at_r.to_f64();
        c_sqrt = c_sqrt.max(err * b.sqrt());
        c_lin = c_lin.max(err * b);
    }
    Ok(ErrorProfile {
        rows,
        constant_sqrt_b: c_sqrt,
        constant_b: c_lin,
    })
}

/// CSV with columns `k,r_k,b,approx_p,exact_p,ratio`; missing values are `NA`.
pub fn saddle_csv(spec: &Spectrum, rows: &[SaddleResult], ctx: &PrecisionContext) -> String {
    let mut out = String::new();
    write_header(&mut out, spec.source(), spec.len() + 1, ctx);
    out.push_str("k,r_k,b,approx_p,exact_p,ratio\n");
    let opt = |x: &Option<Float>| {
        x.as_ref()
            .map_or_else(|| "NA".to_string(), |v| ctx.format(v))
    };
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.k,
            ctx.format(&row.r_k),
            ctx.format(&row.b_at_r),
            ctx.format(&row.approx_p),
            opt(&row.exact_p),
            opt(&row.ratio)
        );
    }
    out
}
