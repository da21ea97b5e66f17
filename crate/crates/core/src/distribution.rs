//! The generating function `Z(z) = Π(1 + (z-1)λ)` and the distribution of
//! `N_ℝ/2` it encodes.

use std::fmt::Write as _;

use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};
use crate::kernel::EnsembleParams;
use crate::precision::{format_sci, parse_float, pi, pow2, rel_diff, PrecisionContext};
use crate::special::{c_alpha, GUARD_BITS};
use crate::spectral::{bernoulli_decomposition, Spectrum};

/// Complex number as a pair of MPFR floats (only what the generating
/// function and its transforms need).
#[derive(Debug, Clone, PartialEq)]
pub struct BigComplex {
    pub re: Float,
    pub im: Float,
}

impl BigComplex {
    pub fn new(re: Float, im: Float) -> Self {
        Self { re, im }
    }

    pub fn real(re: Float) -> Self {
        let im = Float::new(re.prec());
        Self { re, im }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec().max(self.im.prec())
    }

    /// `e^{iθ}`.
    pub fn cis(theta: &Float) -> Self {
        let (s, c) = theta.clone().sin_cos(Float::new(theta.prec()));
        Self { re: c, im: s }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let prec = self.prec().max(other.prec());
        let rr = Float::with_val(prec, &self.re * &other.re);
        let ii = Float::with_val(prec, &self.im * &other.im);
        let ri = Float::with_val(prec, &self.re * &other.im);
        let ir = Float::with_val(prec, &self.im * &other.re);
        Self {
            re: rr - ii,
            im: ri + ir,
        }
    }

    pub fn abs(&self) -> Float {
        let prec = self.prec();
        Float::with_val(prec, self.re.hypot_ref(&self.im))
    }
}

/// `Z(z) = Π (1 + (z-1)λ_l)`, multiplied left to right at `z`'s precision.
pub fn gf_eval(spec: &Spectrum, z: &BigComplex) -> BigComplex {
    let prec = z.prec();
    let mut acc = BigComplex::real(Float::with_val(prec, 1u32));
    let z_minus_one = BigComplex::new(Float::with_val(prec, &z.re - 1u32), z.im.clone());
    for l in spec.lambdas() {
        let factor = BigComplex::new(
            Float::with_val(prec, &z_minus_one.re * l) + 1u32,
            Float::with_val(prec, &z_minus_one.im * l),
        );
        acc = acc.mul(&factor);
    }
    acc
}

/// Probabilities `p_{2k}` of `N_ℝ = 2k`, `k = 0..N/2`, with the exact moments.
#[derive(Debug, Clone)]
pub struct RealCountDistribution {
    params: Option<EnsembleParams>,
    probs: Vec<Float>,
    mean_nr: Float,
    var_nr: Float,
}

impl RealCountDistribution {
    /// A distribution over `k = 0..probs.len()-1` with moments taken from the
    /// probabilities themselves. Used for synthetic inputs.
    pub fn from_probs(probs: Vec<Float>) -> Self {
        let (mean_nr, var_nr) = moments_from_probs(&probs);
        Self {
            params: None,
            probs,
            mean_nr,
            var_nr,
        }
    }

    pub fn params(&self) -> Option<&EnsembleParams> {
        self.params.as_ref()
    }

    pub fn probs(&self) -> &[Float] {
        &self.probs
    }

    /// `p_{2k}`.
    pub fn prob(&self, k: usize) -> &Float {
        &self.probs[k]
    }

    /// Largest `k`, i.e. `N/2`.
    pub fn max_k(&self) -> usize {
        self.probs.len() - 1
    }

    /// `E(N_ℝ) = 2Σλ`.
    pub fn mean_nr(&self) -> &Float {
        &self.mean_nr
    }

    /// `σ²(N_ℝ) = 4Σλ(1-λ)`.
    pub fn var_nr(&self) -> &Float {
        &self.var_nr
    }

    pub fn prec(&self) -> u32 {
        self.probs[0].prec()
    }

    pub fn total(&self) -> Float {
        let mut s = Float::with_val(self.prec(), 0u32);
        for p in &self.probs {
            s += p;
        }
        s
    }

    /// `(Σ 2k p_{2k}, Σ (2k)² p_{2k} - mean²)`.
    pub fn moments_from_probs(&self) -> (Float, Float) {
        moments_from_probs(&self.probs)
    }

    /// CSV with `# key=value` header lines and columns
    /// `k,two_k,p,log10_p,confidence_flag`. `log10_p` is derived from the
    /// printed `p`, so re-deriving it from the file reproduces it exactly.
    pub fn to_csv(&self, ctx: &PrecisionContext) -> String {
        let mut out = String::new();
        write_header(&mut out, self.params.as_ref(), self.probs.len(), ctx);
        let _ = writeln!(out, "# mean_NR={}", ctx.format(&self.mean_nr));
        let _ = writeln!(out, "# var_NR={}", ctx.format(&self.var_nr));
        out.push_str("k,two_k,p,log10_p,confidence_flag\n");
        for row in self.csv_rows(ctx) {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                row.k,
                2 * row.k,
                row.p,
                row.log10_p,
                row.flag
            );
        }
        out
    }

    /// Rows of [`Self::to_csv`] as printed strings.
    pub fn csv_rows(&self, ctx: &PrecisionContext) -> Vec<ProbabilityRow> {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let printed = ctx.format(p);
                let reparsed = parse_float(&printed, ctx.bits()).expect("formatted value parses");
                derive_row(k, printed, &reparsed, ctx)
            })
            .collect()
    }
}

/// One printed line of the probability CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbabilityRow {
    pub k: usize,
    pub p: String,
    pub log10_p: String,
    pub flag: &'static str,
}

/// Recomputes the derived columns of a probability row from the printed `p`.
pub fn derive_row(k: usize, printed: String, p: &Float, ctx: &PrecisionContext) -> ProbabilityRow {
    let log10_p = if p.is_zero() {
        "-inf".to_string()
    } else {
        ctx.format(&Float::with_val(ctx.bits(), p.log10_ref()))
    };
    ProbabilityRow {
        k,
        p: printed,
        log10_p,
        flag: confidence_flag(p, ctx),
    }
}

/// `"low"` below the precision floor `2^(32-bits)`, `"ok"` otherwise.
pub fn confidence_flag(p: &Float, ctx: &PrecisionContext) -> &'static str {
    if *p < pow2(64, 32 - ctx.bits() as i32) {
        "low"
    } else {
        "ok"
    }
}

/// Writes the `# N=`, `# tau=`, optional `# alpha=` and `# bits=` header lines.
pub fn write_header(
    out: &mut String,
    params: Option<&EnsembleParams>,
    len: usize,
    ctx: &PrecisionContext,
) {
    match params {
        Some(p) => {
            let _ = writeln!(out, "# N={}", p.n());
            let _ = writeln!(out, "# tau={}", p.tau_label());
            if let Some(alpha) = p.alpha_f64() {
                let _ = writeln!(out, "# alpha={alpha}");
            }
        }
        None => {
            let _ = writeln!(out, "# N={}", 2 * (len - 1));
            let _ = writeln!(out, "# tau=NA");
        }
    }
    let _ = writeln!(out, "# bits={}", ctx.bits());
}

fn moments_from_probs(probs: &[Float]) -> (Float, Float) {
    let prec = probs[0].prec();
    let mut m1 = Float::with_val(prec, 0u32);
    let mut m2 = Float::with_val(prec, 0u32);
    for (k, p) in probs.iter().enumerate() {
        let two_k = 2 * k as u64;
        m1 += Float::with_val(prec, p * two_k);
        m2 += Float::with_val(prec, p * (two_k * two_k));
    }
    let var = m2 - Float::with_val(prec, m1.square_ref());
    (m1, var)
}

/// `(E(N_ℝ), σ²(N_ℝ)) = (2Σλ, 4Σλ(1-λ))`.
pub fn moments_exact(spec: &Spectrum) -> (Float, Float) {
    let prec = spec.prec() + GUARD_BITS;
    let mut mean = Float::with_val(prec, 0u32);
    let mut var = Float::with_val(prec, 0u32);
    for l in spec.lambdas() {
        mean += l;
        var += Float::with_val(prec, l * Float::with_val(prec, 1u32 - l));
    }
    let out = spec.prec();
    (
        Float::with_val(out, mean * 2u32),
        Float::with_val(out, var * 4u32),
    )
}

/// Coefficients of `Π((1-λ) + zλ)` by repeated convolution. Every term is
/// nonnegative, so there is no cancellation.
pub fn probabilities_convolution(
    spec: &Spectrum,
    ctx: &PrecisionContext,
) -> Result<RealCountDistribution> {
    let pairs = bernoulli_decomposition(spec, ctx)?;
    let prec = ctx.bits() + GUARD_BITS;
    let mut poly = vec![Float::with_val(prec, 1u32)];
    for (l, q) in &pairs {
        let mut next = vec![Float::new(prec); poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] += Float::with_val(prec, c * q);
            next[i + 1] += Float::with_val(prec, c * l);
        }
        poly = next;
    }
    let probs = poly
        .into_iter()
        .map(|c| Float::with_val(ctx.bits(), c))
        .collect();
    let (mean_nr, var_nr) = moments_exact(spec);
    Ok(RealCountDistribution {
        params: spec.source().cloned(),
        probs,
        mean_nr: Float::with_val(ctx.bits(), mean_nr),
        var_nr: Float::with_val(ctx.bits(), var_nr),
    })
}

/// `c_k = (1/L) Σ_l Z(ω^l) ω^{-lk}` for `k = 0..L-1`, `ω = e^{2πi/L}`, at `prec`
/// bits. With `L ≤ M` the coefficients alias: `c_k = Σ_j p_{k + jL}`.
pub fn dft_coefficients(spec: &Spectrum, points: usize, prec: u32) -> Vec<Float> {
    let two_pi = Float::with_val(prec, pi(prec) * 2u32);
    let roots: Vec<BigComplex> = (0..points)
        .map(|l| BigComplex::cis(&(Float::with_val(prec, &two_pi * l as u64) / points as u64)))
        .collect();
    let lifted = Spectrum::from_lambdas(
        spec.lambdas()
            .iter()
            .map(|l| Float::with_val(prec, l))
            .collect(),
    );
    let values: Vec<BigComplex> = roots.iter().map(|w| gf_eval(&lifted, w)).collect();
    (0..points)
        .map(|k| {
            let mut sum = Float::with_val(prec, 0u32);
            for (l, z) in values.iter().enumerate() {
                // ω^{-lk} = conj(ω^{lk mod L})
                let w = &roots[(l * k) % points];
                sum += Float::with_val(prec, &z.re * &w.re);
                sum += Float::with_val(prec, &z.im * &w.im);
            }
            sum / points as u64
        })
        .collect()
}

/// Probabilities from the discrete Fourier transform of `Z` on `M+1` roots of
/// unity, evaluated at `verify_bits` and cross-checked against
/// [`probabilities_convolution`]: entries above `10^(-bits/4)` must agree to
/// `2^(-bits/2)` relative.
pub fn probabilities_dft(spec: &Spectrum, ctx: &PrecisionContext) -> Result<RealCountDistribution> {
    bernoulli_decomposition(spec, ctx)?;
    let m = spec.len();
    let coeffs = dft_coefficients(spec, m + 1, ctx.verify_bits() + GUARD_BITS);
    let reference = probabilities_convolution(spec, ctx)?;

    let floor = Float::with_val(64, 10u32).pow(-(ctx.bits() as i32) / 4);
    let floor = Float::with_val(ctx.bits(), floor);
    let tol = pow2(64, -(ctx.bits() as i32) / 2);
    for (k, (c, p)) in coeffs.iter().zip(reference.probs()).enumerate() {
        if *p > floor && rel_diff(c, p) > tol {
            return Err(Error::CrossCheck {
                what: "probabilities_dft",
                detail: format!(
                    "k = {k}: DFT {} vs convolution {} (relative difference {:.3e})",
                    format_sci(c, 20),
                    format_sci(p, 20),
                    rel_diff(c, p).to_f64()
                ),
            });
        }
    }
    Ok(RealCountDistribution {
        probs: coeffs
            .into_iter()
            .map(|c| Float::with_val(ctx.bits(), c))
            .collect(),
        ..reference
    })
}

/// Zeros `z_p = 1 - 1/λ_p` of the generating function with a residual check.
#[derive(Debug, Clone)]
pub struct GFZeros {
    pub zeros: Vec<Float>,
    /// `|Z(z_p)|` divided by `Π(1 + |z_p - 1|λ)`.
    pub scaled_residuals: Vec<Float>,
    pub all_negative: bool,
    /// Every scaled residual is at most `2^(-bits/2)`.
    pub certified: bool,
}

pub fn zeros(spec: &Spectrum, ctx: &PrecisionContext) -> Result<GFZeros> {
    for (index, l) in spec.lambdas().iter().enumerate() {
        if *l <= 0 || *l >= 1 {
            return Err(Error::FactorizationViolation {
                index,
                value: format_sci(l, 20),
            });
        }
    }
    let prec = ctx.bits() + GUARD_BITS;
    let tol = pow2(64, -(ctx.bits() as i32) / 2);
    let zeros: Vec<Float> = spec
        .lambdas()
        .iter()
        .map(|l| Float::with_val(ctx.bits(), 1u32 - Float::with_val(prec, l.recip_ref())))
        .collect();
    let scaled_residuals: Vec<Float> = zeros
        .iter()
        .map(|z| {
            let z_minus_one = Float::with_val(prec, z - 1u32);
            let mut value = Float::with_val(prec, 1u32);
            let mut bound = Float::with_val(prec, 1u32);
            for l in spec.lambdas() {
                let step = Float::with_val(prec, &z_minus_one * l);
                value *= Float::with_val(prec, 1u32 + &step);
                bound *= Float::with_val(prec, 1u32 + step.abs());
            }
            Float::with_val(64, value.abs() / bound)
        })
        .collect();
    Ok(GFZeros {
        all_negative: zeros.iter().all(|z| *z < 0),
        certified: scaled_residuals.iter().all(|r| *r <= tol),
        zeros,
        scaled_residuals,
    })
}

/// Leading-order asymptotics of `(E(N_ℝ), σ²(N_ℝ))`.
///
/// Fixed `τ`: `E ~ √((2/π)(1+τ)/(1-τ) N)`, `σ² ~ (2-√2)E`.
/// Weak non-symmetry `τ = 1 - α²/N`: `E ~ c(α)N`, `σ² ~ (2 - 2c(√2α)/c(α))E`.
pub fn moments_asymptotic(
    params: &EnsembleParams,
    ctx: &PrecisionContext,
) -> Result<(Float, Float)> {
    let prec = ctx.bits() + GUARD_BITS;
    let n = params.n() as u64;
    if let Some(alpha) = params.alpha() {
        return moments_weak(n, &Float::with_val(prec, alpha), ctx);
    }
    if *params.tau_exact() >= 1 {
        return Err(Error::Domain {
            op: "moments_asymptotic",
            detail: "tau = 1 needs the weak non-symmetry parameter alpha".into(),
        });
    }
    let tau = params.tau(prec);
    let ratio = Float::with_val(prec, 1u32 + &tau) / Float::with_val(prec, 1u32 - &tau);
    let mean = (ratio * 2u32 * n / pi(prec)).sqrt();
    let factor = Float::with_val(prec, 2u32) - Float::with_val(prec, 2u32).sqrt();
    let var = Float::with_val(prec, &factor * &mean);
    Ok((
        Float::with_val(ctx.bits(), mean),
        Float::with_val(ctx.bits(), var),
    ))
}

/// Weak non-symmetry asymptotics at an arbitrary real `α`:
/// `E ~ c(α)N`, `σ² ~ (2 - 2c(√2α)/c(α))E`.
pub fn moments_weak(n: u64, alpha: &Float, ctx: &PrecisionContext) -> Result<(Float, Float)> {
    let prec = ctx.bits() + GUARD_BITS;
    let work = ctx.guarded(GUARD_BITS);
    let alpha = Float::with_val(prec, alpha);
    let c = c_alpha(&alpha, &work)?;
    let c2 = c_alpha(
        &Float::with_val(prec, &alpha * Float::with_val(prec, 2u32).sqrt()),
        &work,
    )?;
    let mean = Float::with_val(prec, &c * n);
    let ratio = Float::with_val(prec, 2u32) - Float::with_val(prec, &c2 * 2u32) / &c;
    let var = Float::with_val(prec, &ratio * &mean);
    Ok((
        Float::with_val(ctx.bits(), mean),
        Float::with_val(ctx.bits(), var),
    ))
}

/// Outcome of checking `p_k² ≥ p_{k+1} p_{k-1}` at every interior `k` with `p_k > 0`.
#[derive(Debug, Clone)]
pub struct LogConcavityCertificate {
    pub passed: bool,
    pub checked: usize,
    /// Smallest `(p_k² - p_{k+1}p_{k-1}) / p_k²` and where it occurs.
    pub worst_margin: Option<(usize, Float)>,
}

pub fn log_concavity_check(dist: &RealCountDistribution) -> LogConcavityCertificate {
    let probs = dist.probs();
    let prec = dist.prec() * 2;
    let mut worst: Option<(usize, Float)> = None;
    let mut checked = 0;
    for k in 1..probs.len().saturating_sub(1) {
        if probs[k] <= 0 {
            continue;
        }
        checked += 1;
        let sq = Float::with_val(prec, probs[k].square_ref());
        let cross = Float::with_val(prec, &probs[k + 1] * &probs[k - 1]);
        let margin = Float::with_val(prec, &sq - &cross) / &sq;
        if worst.as_ref().is_none_or(|(_, w)| margin < *w) {
            worst = Some((k, margin));
        }
    }
    LogConcavityCertificate {
        passed: worst.as_ref().is_none_or(|(_, w)| *w >= 0),
        checked,
        worst_margin: worst,
    }
}
