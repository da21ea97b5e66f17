//! Special functions at arbitrary precision: log-gamma, Hermite polynomials,
//! modified Bessel functions `I_0`/`I_1`, the Gauss hypergeometric `₂F₁` for
//! nonpositive arguments, and the weak-nonsymmetry constant `c(α)`.
//!
//! Every routine computes with [`GUARD_BITS`] extra bits and rounds once to
//! the caller's precision.

use std::sync::{Mutex, OnceLock};

use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::precision::{half_ln_two_pi, pi, pow2, PrecisionContext};

pub const GUARD_BITS: u32 = 32;

/// Half-integer and integer arguments at or below this use the exact product
/// recurrence instead of the asymptotic series.
const RECURRENCE_LIMIT: u32 = 1 << 16;

const HYP2F1_MAX_TERMS: usize = 500_000;

/// `ln Γ(x)` for `x > 0`.
///
/// Integers and half-integers up to 65536 go through the product recurrence
/// from `Γ(1) = 1` or `Γ(1/2) = √π`; everything else through the Stirling series
/// after raising the argument.
pub fn log_gamma(x: &Float, ctx: &PrecisionContext) -> Result<Float> {
    if x.is_nan() || *x <= 0 {
        return Err(Error::Domain {
            op: "log_gamma",
            detail: format!("x = {x} must be positive"),
        });
    }
    if !x.is_finite() {
        return Err(Error::PrecisionOverflow { op: "log_gamma" });
    }
    let prec = ctx.bits() + GUARD_BITS;
    let value = match twice_if_half_integer(x) {
        Some(twice) if twice <= 2 * RECURRENCE_LIMIT => log_gamma_recurrence(twice, prec),
        _ => log_gamma_stirling(x, prec),
    };
    Ok(Float::with_val(ctx.bits(), value))
}

/// `2x` when it is a positive integer that fits in `u32`.
fn twice_if_half_integer(x: &Float) -> Option<u32> {
    let twice = Float::with_val(x.prec() + 1, x * 2u32);
    if !twice.is_integer() {
        return None;
    }
    twice.to_u32_saturating().filter(|&t| t < u32::MAX)
}

/// `ln Γ(twice / 2)` by the product recurrence.
fn log_gamma_recurrence(twice: u32, prec: u32) -> Float {
    // extra bits absorb the rounding of up to 65536 multiplications
    let work = prec + 20;
    if twice % 2 == 0 {
        let n = twice / 2;
        let mut product = Float::with_val(work, 1u32);
        for i in 2..n {
            product *= i;
        }
        Float::with_val(prec, product.ln())
    } else {
        // Γ(m + 1/2) = √π Π_{i=0}^{m-1} (i + 1/2)
        let m = twice / 2;
        let mut product = Float::with_val(work, 1u32);
        for i in 0..m {
            product *= 2 * i + 1;
        }
        product >>= m;
        let ln_sqrt_pi = pi(work).ln() / 2u32;
        Float::with_val(prec, product.ln() + ln_sqrt_pi)
    }
}

/// Stirling series with argument raising; valid for any positive `x`.
pub(crate) fn log_gamma_stirling(x: &Float, prec: u32) -> Float {
    let work = prec + 16;
    // the series' smallest term is about e^{-2πz}; this keeps it below 2^-work
    let z_min = (work as f64 * std::f64::consts::LN_2 / (2.0 * std::f64::consts::PI)).ceil() + 4.0;
    let mut z = Float::with_val(work, x);
    let mut shift = Float::with_val(work, 1u32);
    while z < z_min {
        shift *= &z;
        z += 1u32;
    }
    // (z - 1/2) ln z - z + ln(2π)/2
    let ln_z = Float::with_val(work, z.ln_ref());
    let mut sum = Float::with_val(work, &z - 0.5f64) * &ln_z;
    sum -= &z;
    sum += half_ln_two_pi(work);

    let tol = pow2(work, -(work as i32));
    let z_sq = Float::with_val(work, z.square_ref());
    let mut z_pow = z.clone(); // z^{2k-1}
    let mut k = 1u32;
    loop {
        let b2k = bernoulli(2 * k as usize);
        let denom = Integer::from(2 * k) * (2 * k - 1);
        let coeff = Float::with_val(work, &b2k) / Float::with_val(work, &denom);
        let term = coeff / &z_pow;
        sum += &term;
        if Float::with_val(work, term.abs_ref()) < Float::with_val(work, sum.abs_ref()) * &tol
            || k > 4 * work
        {
            break;
        }
        z_pow *= &z_sq;
        k += 1;
    }
    Float::with_val(prec, sum - shift.ln())
}

/// `B_n` as an exact rational, cached.
fn bernoulli(n: usize) -> Rational {
    static TABLE: OnceLock<Mutex<Vec<Rational>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| Mutex::new(vec![Rational::from(1)]));
    let mut table = table.lock().unwrap_or_else(|e| e.into_inner());
    // B_m = -1/(m+1) Σ_{j<m} C(m+1, j) B_j
    while table.len() <= n {
        let m = table.len();
        let mut acc = Rational::new();
        let mut binom = Integer::from(1);
        for (j, b) in table.iter().enumerate() {
            acc += Rational::from(&binom * b.numer()) / b.denom();
            binom *= (m + 1 - j) as u32;
            binom /= (j + 1) as u32;
        }
        table.push(-acc / Integer::from(m as u32 + 1));
    }
    table[n].clone()
}

/// `(ln |Γ(x)|, sign Γ(x))` for any real `x` that is not a pole.
///
/// Negative arguments use the reflection `Γ(x) Γ(1-x) = π / sin(πx)`.
pub fn log_gamma_signed(x: &Float, ctx: &PrecisionContext) -> Result<(Float, i8)> {
    if *x > 0 {
        return Ok((log_gamma(x, ctx)?, 1));
    }
    if x.is_integer() || !x.is_finite() {
        return Err(Error::Pole {
            op: "gamma",
            detail: format!("x = {x}"),
        });
    }
    let work = ctx.guarded(GUARD_BITS);
    let one_minus = Float::with_val(work.bits(), 1u32 - x);
    let lg = log_gamma(&one_minus, &work)?;
    let sin = sin_pi(x, work.bits());
    let sign = if sin.is_sign_negative() { -1 } else { 1 };
    let value = pi(work.bits()).ln() - Float::with_val(work.bits(), sin.abs().ln()) - lg;
    Ok((Float::with_val(ctx.bits(), value), sign))
}

/// `sin(πx)` with the argument reduced mod 2 before scaling by π.
fn sin_pi(x: &Float, prec: u32) -> Float {
    let half = Float::with_val(prec + 64, x / 2u32);
    let reduced = Float::with_val(
        prec + 64,
        x - Float::with_val(prec + 64, half.floor_ref()) * 2u32,
    );
    Float::with_val(prec, reduced * pi(prec + 64)).sin()
}

/// Physicists' Hermite polynomial `H_n(x)` by the three-term recurrence.
pub fn hermite(n: usize, x: &Float, ctx: &PrecisionContext) -> Result<Float> {
    let table = hermite_table(n, x, ctx.bits() + GUARD_BITS);
    let value = table.into_iter().nth(n).expect("table has n + 1 entries");
    if !value.is_finite() {
        return Err(Error::PrecisionOverflow { op: "hermite" });
    }
    Ok(Float::with_val(ctx.bits(), value))
}

/// `H_0(x), …, H_n(x)` at precision `prec`.
pub(crate) fn hermite_table(n: usize, x: &Float, prec: u32) -> Vec<Float> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(Float::with_val(prec, 1u32));
    if n == 0 {
        return out;
    }
    let two_x = Float::with_val(prec, x * 2u32);
    out.push(two_x.clone());
    for k in 1..n {
        // H_{k+1} = 2x H_k - 2k H_{k-1}
        let mut next = Float::with_val(prec, &two_x * &out[k]);
        next -= Float::with_val(prec, &out[k - 1] * (2 * k as u64));
        out.push(next);
    }
    out
}

/// Modified Bessel function `I_ν(x)` for `ν ∈ {0, 1}` and `x ≥ 0`, by its power
/// series (all terms positive, so no cancellation).
pub fn bessel_i(nu: u32, x: &Float, ctx: &PrecisionContext) -> Result<Float> {
    if nu > 1 {
        return Err(Error::Domain {
            op: "bessel_i",
            detail: format!("order {nu} is not 0 or 1"),
        });
    }
    if x.is_nan() || *x < 0 {
        return Err(Error::Domain {
            op: "bessel_i",
            detail: format!("x = {x} must be nonnegative"),
        });
    }
    if x.is_zero() {
        return Ok(ctx.float(if nu == 0 { 1u32 } else { 0u32 }));
    }
    let prec = ctx.bits() + GUARD_BITS;
    let half = Float::with_val(prec, x / 2u32);
    let quarter_sq = Float::with_val(prec, half.square_ref());
    let mut term = if nu == 0 {
        Float::with_val(prec, 1u32)
    } else {
        half
    };
    let mut sum = term.clone();
    let tol = pow2(prec, -(prec as i32));
    let mut m = 0u64;
    loop {
        m += 1;
        term *= &quarter_sq;
        term /= m * (m + nu as u64);
        sum += &term;
        if term < Float::with_val(prec, &tol * &sum) {
            break;
        }
        if !sum.is_finite() {
            return Err(Error::PrecisionOverflow { op: "bessel_i" });
        }
    }
    Ok(Float::with_val(ctx.bits(), sum))
}

/// `c(α) = e^{-α²/2} (I_0(α²/2) + I_1(α²/2))`, the limiting fraction of real
/// eigenvalues in the weakly non-symmetric regime.
pub fn c_alpha(alpha: &Float, ctx: &PrecisionContext) -> Result<Float> {
    if alpha.is_nan() || *alpha < 0 {
        return Err(Error::Domain {
            op: "c_alpha",
            detail: format!("alpha = {alpha} must be nonnegative"),
        });
    }
    let work = ctx.guarded(GUARD_BITS);
    let y = Float::with_val(work.bits(), alpha.square_ref()) / 2u32;
    let sum = bessel_i(0, &y, &work)? + bessel_i(1, &y, &work)?;
    let damp = Float::with_val(work.bits(), -&y).exp();
    Ok(Float::with_val(ctx.bits(), sum * damp))
}

/// Gauss hypergeometric function `₂F₁(a, b; c; x)` for `x ≤ 0`.
///
/// For `x < -1/2` the Pfaff transformation maps the argument to
/// `x/(x-1) ∈ (1/3, 1)`; when one of the two Pfaff forms is a terminating
/// series that one is used. Cancellation in the partial sums is measured and
/// the sum is repeated with more bits when it eats into the guard digits.
pub fn hyp2f1(a: &Float, b: &Float, c: &Float, x: &Float, ctx: &PrecisionContext) -> Result<Float> {
    if *c <= 0 && c.is_integer() {
        return Err(Error::Pole {
            op: "hyp2f1",
            detail: format!("c = {c} is a nonpositive integer"),
        });
    }
    if x.is_nan() || *x > 0 || !x.is_finite() {
        return Err(Error::Domain {
            op: "hyp2f1",
            detail: format!("x = {x} must be a finite nonpositive number"),
        });
    }
    if x.is_zero() {
        return Ok(ctx.float(1u32));
    }
    let prec = ctx.bits() + GUARD_BITS;
    let value = if *x >= -0.5f64 {
        hyp2f1_series(a, b, c, x, prec)?
    } else {
        let one_minus_x = Float::with_val(prec + 32, 1u32 - x);
        let y = -Float::with_val(prec + 32, x / &one_minus_x);
        let c_minus_b = Float::with_val(prec, c - b);
        let c_minus_a = Float::with_val(prec, c - a);
        let first = terminating_length(a).min(terminating_length(&c_minus_b));
        let second = terminating_length(&c_minus_a).min(terminating_length(b));
        // (1-x)^{-a} F(a, c-b; c; y)  or  (1-x)^{-b} F(c-a, b; c; y)
        let (power, p, q) = if second < first {
            (b, &c_minus_a, b)
        } else {
            (a, a, &c_minus_b)
        };
        let series = hyp2f1_series(p, q, c, &y, prec)?;
        let scale = Float::with_val(prec, one_minus_x.ln_ref()) * power;
        series * Float::with_val(prec, -scale).exp()
    };
    if !value.is_finite() {
        return Err(Error::PrecisionOverflow { op: "hyp2f1" });
    }
    Ok(Float::with_val(ctx.bits(), value))
}

/// Number of nonzero terms when `a` is a nonpositive integer, `usize::MAX` otherwise.
fn terminating_length(a: &Float) -> usize {
    if *a <= 0 && a.is_integer() {
        a.to_f64().abs() as usize + 1
    } else {
        usize::MAX
    }
}

/// Plain power series in `z` with |z| < 1, retried at higher precision when
/// the partial sums cancel.
fn hyp2f1_series(a: &Float, b: &Float, c: &Float, z: &Float, prec: u32) -> Result<Float> {
    let mut work = prec;
    for _ in 0..4 {
        let (sum, loss_bits) = hyp2f1_series_at(a, b, c, z, work)?;
        if loss_bits + 8.0 <= (work - prec + GUARD_BITS) as f64 {
            return Ok(sum);
        }
        work = prec + loss_bits.ceil() as u32 + GUARD_BITS;
    }
    Err(Error::Convergence {
        op: "hyp2f1",
        iterations: 4,
        residual: "cancellation kept exceeding the guard digits".into(),
    })
}

/// Returns the sum and the number of bits lost to cancellation.
fn hyp2f1_series_at(a: &Float, b: &Float, c: &Float, z: &Float, prec: u32) -> Result<(Float, f64)> {
    let z = Float::with_val(prec, z);
    let z_abs = z.to_f64().abs();
    let mut term = Float::with_val(prec, 1u32);
    let mut sum = Float::with_val(prec, 1u32);
    let mut max_abs = Float::with_val(prec, 1u32);
    let tol = pow2(prec, -(prec as i32));
    let mut an = Float::with_val(prec, a);
    let mut bn = Float::with_val(prec, b);
    let mut cn = Float::with_val(prec, c);
    for n in 0..HYP2F1_MAX_TERMS {
        let ratio = Float::with_val(prec, &an * &bn) / &cn / (n as u64 + 1);
        term *= &ratio;
        term *= &z;
        if term.is_zero() {
            return Ok((sum.clone(), cancellation_bits(&max_abs, &sum)));
        }
        sum += &term;
        let term_abs = Float::with_val(prec, term.abs_ref());
        if term_abs > max_abs {
            max_abs.clone_from(&term_abs);
        }
        // tail bound for a ratio that is eventually monotone in n
        let rho = (ratio.to_f64().abs() * z_abs).max(z_abs);
        if rho < 1.0 {
            let tail = term_abs * (rho / (1.0 - rho));
            if tail <= Float::with_val(prec, sum.abs_ref()) * &tol {
                return Ok((sum.clone(), cancellation_bits(&max_abs, &sum)));
            }
        }
        an += 1u32;
        bn += 1u32;
        cn += 1u32;
    }
    Err(Error::Convergence {
        op: "hyp2f1",
        iterations: HYP2F1_MAX_TERMS,
        residual: format!("last partial sum {}", sum.to_f64()),
    })
}

fn cancellation_bits(max_abs: &Float, sum: &Float) -> f64 {
    if sum.is_zero() {
        return f64::INFINITY;
    }
    let ratio = Float::with_val(53, max_abs / Float::with_val(max_abs.prec(), sum.abs_ref()));
    ratio.log2().to_f64().max(0.0)
}
