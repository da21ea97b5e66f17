//! Working precision and the helpers every arbitrary-precision routine shares.
//!
//! All high-precision values are MPFR floats ([`rug::Float`]). A
//! [`PrecisionContext`] fixes the binary precision of results; routines add
//! their own guard bits internally and round once on the way out.

use rug::float::Round;
use rug::{Assign, Float};

use crate::error::{Error, Result};

/// Binary working precision plus the elevated precision used for
/// self-verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrecisionContext {
    bits: u32,
    verify_bits: u32,
}

impl PrecisionContext {
    pub const DEFAULT_BITS: u32 = 256;
    pub const MIN_BITS: u32 = 64;
    /// Largest precision accepted; keeps `verify_bits` and guard arithmetic well
    /// inside MPFR limits.
    pub const MAX_BITS: u32 = 1 << 20;

    /// Context with `verify_bits = 2 * bits`.
    pub fn new(bits: u32) -> Result<Self> {
        Self::with_verify_bits(bits, bits.saturating_mul(2))
    }

    pub fn with_verify_bits(bits: u32, verify_bits: u32) -> Result<Self> {
        if bits < Self::MIN_BITS {
            return Err(Error::InvalidPrecision(format!(
                "bits = {bits} is below the minimum of {}",
                Self::MIN_BITS
            )));
        }
        if bits > Self::MAX_BITS || verify_bits > 2 * Self::MAX_BITS {
            return Err(Error::InvalidPrecision(format!(
                "bits = {bits} is too large"
            )));
        }
        if verify_bits < bits {
            return Err(Error::InvalidPrecision(format!(
                "verify_bits = {verify_bits} is below bits = {bits}"
            )));
        }
        Ok(Self { bits, verify_bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn verify_bits(&self) -> u32 {
        self.verify_bits
    }

    /// `2^(1 - bits)`, exactly.
    pub fn eps(&self) -> Float {
        pow2(self.bits, 1 - self.bits as i32)
    }

    /// The context one would use to certify results computed in `self`.
    pub fn elevated(&self) -> Self {
        Self {
            bits: self.verify_bits,
            verify_bits: self.verify_bits.saturating_mul(2),
        }
    }

    /// Same context with `extra` more working bits. Used internally for guard digits.
    pub fn guarded(&self, extra: u32) -> Self {
        Self {
            bits: self.bits + extra,
            verify_bits: self.verify_bits + extra,
        }
    }

    /// A float at this context's precision.
    pub fn float<T>(&self, value: T) -> Float
    where
        Float: Assign<T>,
    {
        Float::with_val(self.bits, value)
    }

    /// Decimal digits printed for values at this precision:
    /// `floor(bits * log10 2) - 8`, at least 6.
    pub fn output_digits(&self) -> usize {
        let digits = (self.bits as f64 * std::f64::consts::LOG10_2).floor() as usize;
        digits.saturating_sub(8).max(6)
    }

    /// Scientific-notation rendering with [`Self::output_digits`] significant digits.
    pub fn format(&self, x: &Float) -> String {
        format_sci(x, self.output_digits())
    }

    /// Parses a decimal string at this context's precision.
    pub fn parse(&self, s: &str) -> Result<Float> {
        parse_float(s, self.bits)
    }
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self {
            bits: Self::DEFAULT_BITS,
            verify_bits: 2 * Self::DEFAULT_BITS,
        }
    }
}

/// `2^exp` at precision `prec` (exact).
pub fn pow2(prec: u32, exp: i32) -> Float {
    Float::with_val(prec, Float::i_exp(1, exp))
}

/// `|a - b| / |b|`, or `|a - b|` when `b` is zero.
pub fn rel_diff(a: &Float, b: &Float) -> Float {
    let prec = a.prec().max(b.prec());
    let diff = Float::with_val(prec, a - b).abs();
    if b.is_zero() {
        diff
    } else {
        diff / Float::with_val(prec, b.abs_ref())
    }
}

/// `2^(-bits)` style tolerance: true when `|a - b| <= tol * max(|b|, floor)`.
pub fn close(a: &Float, b: &Float, tol: &Float) -> bool {
    let prec = a.prec().max(b.prec());
    let diff = Float::with_val(prec, a - b).abs();
    let scale = Float::with_val(prec, b.abs_ref());
    diff <= Float::with_val(prec, tol * &scale)
}

/// Scientific notation `d.ddd…e±x` with `digits` significant digits.
pub fn format_sci(x: &Float, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x.is_sign_negative() {
            "-inf".into()
        } else {
            "inf".into()
        };
    }
    if x.is_zero() {
        let mantissa = "0".repeat(digits.saturating_sub(1).max(1));
        return format!("0.{mantissa}e0");
    }
    let (negative, mantissa, exp) =
        x.to_sign_string_exp_round(10, Some(digits.max(1)), Round::Nearest);
    // mantissa is the digit string of 0.ddd… × 10^exp
    let exp = exp.unwrap_or(0) - 1;
    let (head, tail) = mantissa.split_at(1);
    let sign = if negative { "-" } else { "" };
    if tail.is_empty() {
        format!("{sign}{head}e{exp}")
    } else {
        format!("{sign}{head}.{tail}e{exp}")
    }
}

pub fn parse_float(s: &str, prec: u32) -> Result<Float> {
    let s = s.trim();
    match s {
        "inf" => return Ok(Float::with_val(prec, rug::float::Special::Infinity)),
        "-inf" => return Ok(Float::with_val(prec, rug::float::Special::NegInfinity)),
        "nan" => return Ok(Float::with_val(prec, rug::float::Special::Nan)),
        _ => {}
    }
    Float::parse(s)
        .map(|p| Float::with_val(prec, p))
        .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
}

/// `ln(2π)/2` at precision `prec`.
pub(crate) fn half_ln_two_pi(prec: u32) -> Float {
    let two_pi = Float::with_val(prec, rug::float::Constant::Pi) * 2u32;
    two_pi.ln() / 2u32
}

pub(crate) fn pi(prec: u32) -> Float {
    Float::with_val(prec, rug::float::Constant::Pi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_precision() {
        assert!(PrecisionContext::new(32).is_err());
        assert!(PrecisionContext::with_verify_bits(128, 64).is_err());
        let ctx = PrecisionContext::new(64).unwrap();
        assert_eq!(ctx.verify_bits(), 128);
    }

    #[test]
    fn eps_is_exact_power_of_two() {
        let ctx = PrecisionContext::new(256).unwrap();
        let eps = ctx.eps();
        assert_eq!(eps.get_exp(), Some(1 - 256 + 1));
        assert_eq!(eps, Float::with_val(10, Float::i_exp(1, -255)));
    }

    #[test]
    fn output_digits_follow_precision() {
        assert_eq!(PrecisionContext::new(256).unwrap().output_digits(), 69);
        assert_eq!(PrecisionContext::new(512).unwrap().output_digits(), 146);
    }

    #[test]
    fn format_round_trips() {
        let ctx = PrecisionContext::default();
        let x = ctx.parse("7.946014632966e-23").unwrap();
        let s = ctx.format(&x);
        assert!(s.starts_with("7.946014632966"), "{s}");
        assert!(s.ends_with("e-23"), "{s}");
        let back = ctx.parse(&s).unwrap();
        assert_eq!(ctx.format(&back), s);
        assert_eq!(format_sci(&ctx.float(-2.5), 3), "-2.50e0");
        assert_eq!(format_sci(&ctx.float(0), 3), "0.00e0");
    }
}
