//! The real symmetric kernel matrix whose eigenvalues factorize the generating
//! function of the real-eigenvalue counts.
//!
//! Entries are `M(j,k) = (2π)^{-1/2} (τ/2)^{j+k-2} / √(Γ(2j-1)Γ(2k-1))
//! ∫ e^{-x²/(1+τ)} H_{2j-2}(x/√(2τ)) H_{2k-2}(x/√(2τ)) dx` for `j, k = 1..N/2`.
//! Three builders are provided:
//!
//! * [`build_kernel_integral`], the reference route: after `x = √(1+τ) u` the
//!   integrand is a polynomial of degree `≤ 2N-4` against `e^{-u²}`, which the
//!   order-`N` Gauss–Hermite rule integrates exactly.
//! * [`build_kernel_hypergeometric`], a `₂F₁` closed form checked entry by entry
//!   against the integral route.
//! * [`build_kernel_ginoe`], the `τ = 0` matrix `Γ(j+k-3/2)/√(2π Γ(2j-1)Γ(2k-1))`.

use std::fmt;

use rayon::prelude::*;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::precision::{format_sci, parse_float, pi, pow2, PrecisionContext};
use crate::quadrature::gauss_hermite_rule;
use crate::special::{hermite_table, hyp2f1, log_gamma, log_gamma_signed, GUARD_BITS};

/// Matrix size `N` and ellipticity `τ`, optionally given through the weak
/// non-symmetry parameter `α` with `τ = 1 - α²/N`.
///
/// `τ` is held as an exact rational so every precision sees the same value.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleParams {
    n: usize,
    tau: Rational,
    alpha: Option<Rational>,
    label: String,
}

impl EnsembleParams {
    /// Fixed-`τ` ensemble; `tau` is taken exactly as the given double.
    pub fn new(n: usize, tau: f64) -> Result<Self> {
        if !tau.is_finite() {
            return Err(Error::InvalidParams(format!("tau = {tau} is not finite")));
        }
        let exact = Rational::from_f64(tau).expect("finite");
        Self::with_tau(n, exact, format!("{tau}"))
    }

    /// Fixed-`τ` ensemble from a decimal string such as `"0.99"` or `"1e-6"`.
    pub fn from_decimal(n: usize, tau: &str) -> Result<Self> {
        let exact = parse_decimal(tau)?;
        Self::with_tau(n, exact, tau.trim().to_string())
    }

    fn with_tau(n: usize, tau: Rational, label: String) -> Result<Self> {
        check_n(n)?;
        if tau < 0 || tau >= 1 {
            return Err(Error::InvalidParams(format!(
                "tau = {label} must lie in [0, 1)"
            )));
        }
        Ok(Self {
            n,
            tau,
            alpha: None,
            label,
        })
    }

    /// Weakly non-symmetric ensemble `τ = 1 - α²/N`.
    ///
    /// `α = 0` (the symmetric limit `τ = 1`) is accepted so that the asymptotic
    /// formulas can be evaluated there; the exact builders reject it.
    pub fn weak(n: usize, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::InvalidParams(format!(
                "alpha = {alpha} is not finite"
            )));
        }
        let exact = Rational::from_f64(alpha).expect("finite");
        Self::with_alpha(n, exact)
    }

    pub fn weak_decimal(n: usize, alpha: &str) -> Result<Self> {
        Self::with_alpha(n, parse_decimal(alpha)?)
    }

    fn with_alpha(n: usize, alpha: Rational) -> Result<Self> {
        check_n(n)?;
        if alpha < 0 {
            return Err(Error::InvalidParams(format!(
                "alpha = {} must be nonnegative",
                alpha.to_f64()
            )));
        }
        let alpha_sq = Rational::from(alpha.square_ref());
        if alpha_sq > n as u64 {
            return Err(Error::InvalidParams(format!(
                "alpha^2 = {} exceeds N = {n}, which would make tau negative",
                alpha_sq.to_f64()
            )));
        }
        let tau = Rational::from(1) - alpha_sq / Integer::from(n);
        let label = format!("{}", tau.to_f64());
        Ok(Self {
            n,
            tau,
            alpha: Some(alpha),
            label,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Kernel dimension `N/2`.
    pub fn dim(&self) -> usize {
        self.n / 2
    }

    pub fn tau_exact(&self) -> &Rational {
        &self.tau
    }

    pub fn tau(&self, prec: u32) -> Float {
        Float::with_val(prec, &self.tau)
    }

    pub fn tau_f64(&self) -> f64 {
        self.tau.to_f64()
    }

    pub fn is_ginoe(&self) -> bool {
        self.tau == 0
    }

    pub fn alpha(&self) -> Option<&Rational> {
        self.alpha.as_ref()
    }

    pub fn alpha_f64(&self) -> Option<f64> {
        self.alpha.as_ref().map(Rational::to_f64)
    }

    /// Decimal rendering of `τ` used in file headers.
    pub fn tau_label(&self) -> &str {
        &self.label
    }
}

impl fmt::Display for EnsembleParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.alpha {
            Some(a) => write!(f, "N={} alpha={} tau={}", self.n, a.to_f64(), self.label),
            None => write!(f, "N={} tau={}", self.n, self.label),
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidParams(format!(
            "N = {n} must be even and at least 2"
        )));
    }
    if n > 100_000 {
        return Err(Error::InvalidParams(format!(
            "N = {n} is unreasonably large"
        )));
    }
    Ok(())
}

/// Exact rational value of a decimal literal (`"0.99"`, `"-1.5e-3"`, `"2"`).
pub fn parse_decimal(s: &str) -> Result<Rational> {
    let bad = || Error::Parse(format!("{s:?} is not a decimal number"));
    let t = s.trim();
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    if exp.unsigned_abs() > 10_000 {
        return Err(bad());
    }
    let all: String = format!("{int_part}{frac_part}");
    let numer =
        Integer::from_str_radix(if all.is_empty() { "0" } else { &all }, 10).map_err(|_| bad())?;
    let scale = exp - frac_part.len() as i32;
    let mut value = Rational::from(numer);
    if scale >= 0 {
        value *= Integer::from(Integer::u_pow_u(10, scale as u32));
    } else {
        value /= Integer::from(Integer::u_pow_u(10, (-scale) as u32));
    }
    if negative {
        value = -value;
    }
    Ok(value)
}

/// Which route produced a [`KernelMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Integral,
    Hypergeometric,
    Ginoe,
    /// Entries supplied directly by the caller.
    Supplied,
}

impl Provenance {
    pub fn tag(self) -> &'static str {
        match self {
            Provenance::Integral => "integral",
            Provenance::Hypergeometric => "hypergeometric",
            Provenance::Ginoe => "ginoe",
            Provenance::Supplied => "supplied",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "integral" => Provenance::Integral,
            "hypergeometric" => Provenance::Hypergeometric,
            "ginoe" => Provenance::Ginoe,
            "supplied" => Provenance::Supplied,
            _ => return None,
        })
    }
}

/// Dense real symmetric matrix, row-major. Indices are zero-based: `get(0, 0)`
/// is the `(1,1)` entry.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    dim: usize,
    entries: Vec<Float>,
    provenance: Provenance,
    params: Option<EnsembleParams>,
}

impl KernelMatrix {
    /// Builds a matrix from rows; the rows must be exactly symmetric.
    pub fn from_rows(rows: Vec<Vec<Float>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidParams(
                "matrix must be square and non-empty".into(),
            ));
        }
        for j in 0..dim {
            for k in 0..j {
                if rows[j][k] != rows[k][j] {
                    return Err(Error::InvalidParams(format!(
                        "entry ({j},{k}) differs from ({k},{j})"
                    )));
                }
            }
        }
        Ok(Self {
            dim,
            entries: rows.into_iter().flatten().collect(),
            provenance: Provenance::Supplied,
            params: None,
        })
    }

    /// Fills a symmetric matrix from the upper triangle, row by row.
    fn from_upper(
        dim: usize,
        upper: Vec<Vec<Float>>,
        provenance: Provenance,
        params: EnsembleParams,
    ) -> Self {
        let prec = upper[0][0].prec();
        let mut entries = vec![Float::new(prec); dim * dim];
        for (j, row) in upper.into_iter().enumerate() {
            for (offset, value) in row.into_iter().enumerate() {
                let k = j + offset;
                entries[k * dim + j] = value.clone();
                entries[j * dim + k] = value;
            }
        }
        Self {
            dim,
            entries,
            provenance,
            params: Some(params),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, j: usize, k: usize) -> &Float {
        &self.entries[j * self.dim + k]
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn params(&self) -> Option<&EnsembleParams> {
        self.params.as_ref()
    }

    pub fn prec(&self) -> u32 {
        self.entries[0].prec()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Float]> {
        self.entries.chunks(self.dim)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|j| (0..j).all(|k| self.get(j, k) == self.get(k, j)))
    }

    pub fn trace(&self) -> Float {
        let mut t = Float::with_val(self.prec(), 0u32);
        for j in 0..self.dim {
            t += self.get(j, j);
        }
        t
    }

    /// Plain-text dump: a `# N=… tau=… provenance=… bits=…` header, then one
    /// row per line in scientific notation.
    pub fn to_dump(&self, ctx: &PrecisionContext) -> String {
        let (n, tau) = match &self.params {
            Some(p) => (p.n().to_string(), p.tau_label().to_string()),
            None => ((2 * self.dim).to_string(), "NA".to_string()),
        };
        let digits = ctx.output_digits();
        let mut out = format!(
            "# N={n} tau={tau} provenance={} bits={}\n",
            self.provenance.tag(),
            ctx.bits()
        );
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|x| format_sci(x, digits)).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parses [`Self::to_dump`] output. Returns the header's `bits` along with
    /// the matrix (without ensemble parameters).
    pub fn parse_dump(text: &str) -> Result<(u32, Self)> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty dump".into()))?;
        let field = |name: &str| -> Result<&str> {
            header
                .split_whitespace()
                .find_map(|tok| tok.strip_prefix(name).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| Error::Parse(format!("header lacks {name}")))
        };
        let bits: u32 = field("bits")?
            .parse()
            .map_err(|_| Error::Parse("bad bits".into()))?;
        let provenance = Provenance::from_tag(field("provenance")?)
            .ok_or_else(|| Error::Parse("bad provenance".into()))?;
        let rows = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_whitespace()
                    .map(|t| parse_float(t, bits))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut m = Self::from_rows(rows)?;
        m.provenance = provenance;
        Ok((bits, m))
    }
}

fn check_open_tau(params: &EnsembleParams, op: &'static str) -> Result<()> {
    if params.is_ginoe() {
        return Err(Error::DegenerateArgument {
            op,
            detail: "tau = 0 makes H(x/√(2τ)) singular; use build_kernel_ginoe".into(),
        });
    }
    if *params.tau_exact() >= 1 {
        return Err(Error::Domain {
            op,
            detail: format!("tau = {} must be below 1", params.tau_label()),
        });
    }
    Ok(())
}

/// Kernel by exact Gauss–Hermite quadrature of the defining integral.
pub fn build_kernel_integral(
    params: &EnsembleParams,
    ctx: &PrecisionContext,
) -> Result<KernelMatrix> {
    check_open_tau(params, "build_kernel_integral")?;
    let n = params.n();
    let dim = params.dim();
    let work = ctx.guarded(GUARD_BITS);
    let prec = work.bits();
    let tau = params.tau(prec);

    let rule = gauss_hermite_rule(n, &work)?;
    // N is even, so the nodes pair up as ±u with equal weights; the integrand is even.
    let half_nodes = &rule.nodes()[n / 2..];
    let half_weights = &rule.weights()[n / 2..];

    let one_plus = Float::with_val(prec, 1u32 + &tau);
    let stretch = Float::with_val(prec, &one_plus / Float::with_val(prec, &tau * 2u32)).sqrt();
    let ln_half_tau = Float::with_val(prec, &tau / 2u32).ln();

    // (τ/2)^j / √Γ(2j+1), zero-based j
    let scales: Vec<Float> = (0..dim)
        .map(|j| {
            let lg = log_gamma(&Float::with_val(prec, 2 * j as u32 + 1), &work)?;
            Ok((Float::with_val(prec, &ln_half_tau * j as u32) - lg / 2u32).exp())
        })
        .collect::<Result<_>>()?;

    // basis[i][j] = scale_j H_{2j}(stretch u_i)
    let basis: Vec<Vec<Float>> = half_nodes
        .par_iter()
        .map(|u| {
            let y = Float::with_val(prec, u * &stretch);
            let table = hermite_table(2 * dim.saturating_sub(1), &y, prec);
            table
                .into_iter()
                .step_by(2)
                .zip(&scales)
                .map(|(h, s)| h * s)
                .collect::<Vec<_>>()
        })
        .collect();
    if basis.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::PrecisionOverflow {
            op: "build_kernel_integral",
        });
    }

    // 2 √(1+τ)/√(2π) covers the mirrored half of the rule and the change of variables
    let prefactor = Float::with_val(prec, one_plus.sqrt_ref()) * 2u32 / (pi(prec) * 2u32).sqrt();
    let bits = ctx.bits();
    let upper: Vec<Vec<Float>> = (0..dim)
        .into_par_iter()
        .map(|j| {
            (j..dim)
                .map(|k| {
                    let mut sum = Float::with_val(prec, 0u32);
                    for (row, w) in basis.iter().zip(half_weights) {
                        let term = Float::with_val(prec, &row[j] * &row[k]);
                        sum += term * w;
                    }
                    Float::with_val(bits, sum * &prefactor)
                })
                .collect()
        })
        .collect();
    Ok(KernelMatrix::from_upper(
        dim,
        upper,
        Provenance::Integral,
        params.clone(),
    ))
}

/// The `τ = 0` (GinOE) kernel `Γ(j+k-3/2) / √(2π Γ(2j-1) Γ(2k-1))`.
pub fn build_kernel_ginoe(n: usize, ctx: &PrecisionContext) -> Result<KernelMatrix> {
    let params = EnsembleParams::new(n, 0.0)?;
    let dim = params.dim();
    let work = ctx.guarded(GUARD_BITS);
    let prec = work.bits();
    let half_ln_norm: Vec<Float> = (0..dim)
        .map(|j| Ok(log_gamma(&Float::with_val(prec, 2 * j as u32 + 1), &work)? / 2u32))
        .collect::<Result<_>>()?;
    let ln_prefactor = -Float::with_val(prec, pi(prec) * 2u32).ln() / 2u32;
    let bits = ctx.bits();
    let upper = (0..dim)
        .map(|j| {
            (j..dim)
                .map(|k| {
                    // zero-based: Γ(j + k + 1/2)
                    let arg = Float::with_val(prec, (j + k) as f64 + 0.5);
                    let lg = log_gamma(&arg, &work)?;
                    let ln_entry = lg - &half_ln_norm[j] - &half_ln_norm[k] + &ln_prefactor;
                    Ok(Float::with_val(bits, ln_entry.exp()))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelMatrix::from_upper(
        dim,
        upper,
        Provenance::Ginoe,
        params,
    ))
}

/// Kernel for any admissible `τ`: the GinOE builder at `τ = 0`, the integral
/// builder otherwise.
pub fn build_kernel(params: &EnsembleParams, ctx: &PrecisionContext) -> Result<KernelMatrix> {
    if params.is_ginoe() {
        build_kernel_ginoe(params.n(), ctx)
    } else {
        build_kernel_integral(params, ctx)
    }
}

/// One entry of the closed-form cross-check. `j`, `k` are one-based.
#[derive(Debug, Clone)]
pub struct EntryReconciliation {
    pub j: usize,
    pub k: usize,
    /// The closed form with prefactor `1/(2√(2π))` and `Γ(k-j-3/2)`, or the
    /// reason it could not be evaluated.
    pub printed: std::result::Result<Float, String>,
    /// The closed form with prefactor `1/√(2π)` and `Γ(j+k-3/2)`.
    pub reconciled: Float,
    pub integral: Float,
    /// Deviations in units of `√(M(j,j) M(k,k))` from the integral route.
    pub printed_deviation: Option<Float>,
    pub reconciled_deviation: Float,
    pub reconciled_ok: bool,
}

#[derive(Debug, Clone)]
pub struct ReconciliationReport {
    pub entries: Vec<EntryReconciliation>,
    pub tolerance: Float,
    pub max_reconciled_deviation: Float,
    pub max_printed_deviation: Option<Float>,
}

impl ReconciliationReport {
    pub fn reconciled_agrees(&self) -> bool {
        self.entries.iter().all(|e| e.reconciled_ok)
    }

    pub fn printed_agrees(&self) -> bool {
        self.entries.iter().all(|e| {
            e.printed_deviation
                .as_ref()
                .is_some_and(|d| *d <= self.tolerance)
        })
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let printed = match &self.max_printed_deviation {
            Some(d) => format!("{:.3e}", d.to_f64()),
            None => "n/a".into(),
        };
        format!(
            "{} entries; reconciled max deviation {:.3e} (tolerance {:.3e}, {}); printed form max deviation {} ({})",
            self.entries.len(),
            self.max_reconciled_deviation.to_f64(),
            self.tolerance.to_f64(),
            if self.reconciled_agrees() { "agrees" } else { "DISAGREES" },
            printed,
            if self.printed_agrees() { "agrees" } else { "disagrees" },
        )
    }
}

#[derive(Debug, Clone)]
pub struct HypergeometricKernel {
    /// Reconciled closed-form entries; an entry that misses the tolerance is
    /// replaced by the integral value and flagged in the report.
    pub matrix: KernelMatrix,
    pub report: ReconciliationReport,
}

/// Kernel from the `₂F₁` closed form, validated against the integral builder.
///
/// The closed form in circulation,
/// `(1/(2√(2π))) √((1+τ)/(1-τ)) Γ(k-j-3/2)/√(Γ(2j-1)Γ(2k-1)) ₂F₁(k-j+1/2, j-k+1/2; -j-k+5/2; -τ/(1-τ))`,
/// is evaluated as written and reported, but it is not symmetric and does not
/// reduce to the GinOE kernel at `τ = 0`. The matrix is built from the
/// reconciled form that replaces `1/(2√(2π))` by `1/√(2π)` and `Γ(k-j-3/2)` by
/// `Γ(j+k-3/2)`, which matches the integral to working precision.
pub fn build_kernel_hypergeometric(
    params: &EnsembleParams,
    ctx: &PrecisionContext,
) -> Result<HypergeometricKernel> {
    check_open_tau(params, "build_kernel_hypergeometric")?;
    let integral = build_kernel_integral(params, ctx)?;
    let dim = params.dim();
    let work = ctx.guarded(GUARD_BITS);
    let prec = work.bits();

    let tau_q = params.tau_exact();
    let one_minus = Rational::from(1) - tau_q;
    let arg = Float::with_val(prec, -Rational::from(tau_q / &one_minus));
    let ratio = Float::with_val(prec, Rational::from(1 + tau_q) / &one_minus).sqrt();
    let sqrt_two_pi = Float::with_val(prec, pi(prec) * 2u32).sqrt();
    let reconciled_prefactor = Float::with_val(prec, &ratio / &sqrt_two_pi);
    let printed_prefactor = Float::with_val(prec, &reconciled_prefactor / 2u32);
    let half_ln_norm: Vec<Float> = (1..=dim)
        .map(|j| Ok(log_gamma(&Float::with_val(prec, 2 * j as u32 - 1), &work)? / 2u32))
        .collect::<Result<_>>()?;

    let tolerance = pow2(64, 32 - ctx.bits() as i32);
    let bits = ctx.bits();
    let pairs: Vec<(usize, usize)> = (1..=dim)
        .flat_map(|j| (j..=dim).map(move |k| (j, k)))
        .collect();
    let entries = pairs
        .par_iter()
        .map(|&(j, k)| -> Result<EntryReconciliation> {
            let half = |x: i64| Float::with_val(prec, x as f64 + 0.5);
            let (ji, ki) = (j as i64, k as i64);
            let f = hyp2f1(
                &half(ki - ji),
                &half(ji - ki),
                &half(2 - ji - ki),
                &arg,
                &work,
            )?;
            let norm = Float::with_val(prec, &half_ln_norm[j - 1] + &half_ln_norm[k - 1]);

            let lg = log_gamma(&Float::with_val(prec, (ji + ki) as f64 - 1.5), &work)?;
            let reconciled = Float::with_val(prec, (lg - &norm).exp() * &f) * &reconciled_prefactor;

            let printed = log_gamma_signed(&Float::with_val(prec, (ki - ji) as f64 - 1.5), &work)
                .map(|(lg, sign)| {
                    let v = Float::with_val(prec, (lg - &norm).exp() * &f) * &printed_prefactor;
                    Float::with_val(bits, if sign < 0 { -v } else { v })
                })
                .map_err(|e| e.to_string());

            let scale = Float::with_val(
                prec,
                integral.get(j - 1, j - 1) * integral.get(k - 1, k - 1),
            )
            .sqrt();
            let exact = integral.get(j - 1, k - 1).clone();
            let deviation =
                |v: &Float| Float::with_val(64, Float::with_val(prec, v - &exact).abs() / &scale);
            let reconciled_deviation = deviation(&reconciled);
            let printed_deviation = printed.as_ref().ok().map(deviation);
            Ok(EntryReconciliation {
                j,
                k,
                printed,
                reconciled: Float::with_val(bits, reconciled),
                reconciled_ok: reconciled_deviation <= tolerance,
                integral: exact,
                printed_deviation,
                reconciled_deviation,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let max_reconciled_deviation = entries
        .iter()
        .map(|e| e.reconciled_deviation.clone())
        .fold(Float::with_val(64, 0u32), |a, b| a.max(&b));
    let max_printed_deviation = entries
        .iter()
        .map(|e| e.printed_deviation.clone())
        .try_fold(Float::with_val(64, 0u32), |a, b| b.map(|b| a.max(&b)));

    let mut upper: Vec<Vec<Float>> = (0..dim).map(|j| Vec::with_capacity(dim - j)).collect();
    for e in &entries {
        let value = if e.reconciled_ok {
            e.reconciled.clone()
        } else {
            e.integral.clone()
        };
        upper[e.j - 1].push(value);
    }
    let matrix = KernelMatrix::from_upper(dim, upper, Provenance::Hypergeometric, params.clone());
    Ok(HypergeometricKernel {
        matrix,
        report: ReconciliationReport {
            entries,
            tolerance,
            max_reconciled_deviation,
            max_printed_deviation,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::rel_diff;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(256).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(EnsembleParams::new(3, 0.5).is_err());
        assert!(EnsembleParams::new(0, 0.5).is_err());
        assert!(EnsembleParams::new(4, 1.0).is_err());
        assert!(EnsembleParams::new(4, -0.1).is_err());
        assert!(EnsembleParams::new(4, f64::NAN).is_err());
        assert!(EnsembleParams::weak(4, 2.5).is_err());
        let p = EnsembleParams::weak(100, 1.0).unwrap();
        assert_eq!(*p.tau_exact(), Rational::from((99, 100)));
        assert_eq!(p.dim(), 50);
        let p = EnsembleParams::from_decimal(80, "0.99").unwrap();
        assert_eq!(*p.tau_exact(), Rational::from((99, 100)));
        assert_eq!(p.tau_label(), "0.99");
    }

    #[test]
    fn decimal_parsing() {
        assert_eq!(
            parse_decimal("1e-6").unwrap(),
            Rational::from((1, 1_000_000))
        );
        assert_eq!(parse_decimal("-2.50").unwrap(), Rational::from((-5, 2)));
        assert_eq!(parse_decimal(".25E1").unwrap(), Rational::from((5, 2)));
        assert!(parse_decimal("abc").is_err());
        assert!(parse_decimal("").is_err());
        assert!(parse_decimal("1e").is_err());
    }

    #[test]
    fn integral_corner_entry_is_closed_form() {
        let ctx = ctx();
        for &tau in &[0.1, 0.5, 0.9] {
            let params = EnsembleParams::new(6, tau).unwrap();
            let m = build_kernel_integral(&params, &ctx).unwrap();
            let expected = Float::with_val(300, (1.0 + tau) / 2.0).sqrt();
            // tau is not exact in binary for 0.1 and 0.9: compare against the rational
            let exact_tau = params.tau(400);
            let expected_exact = Float::with_val(400, (exact_tau + 1u32) / 2u32).sqrt();
            assert!(rel_diff(m.get(0, 0), &expected_exact) <= ctx.eps() * 2u32);
            assert!((m.get(0, 0).to_f64() - expected.to_f64()).abs() < 1e-15);
            assert!(m.is_symmetric());
            assert_eq!(m.provenance(), Provenance::Integral);
        }
        let m = build_kernel_integral(&EnsembleParams::new(4, 0.5).unwrap(), &ctx).unwrap();
        assert!((m.get(0, 0).to_f64() - 0.866_025_403_784_438_6).abs() < 1e-15);
    }

    #[test]
    fn quadrature_exact_for_low_entries() {
        // (1,2) with an order-4 rule and an order-40 rule: both are exact
        let ctx = ctx();
        let small = build_kernel_integral(&EnsembleParams::new(4, 0.3).unwrap(), &ctx).unwrap();
        let large = build_kernel_integral(&EnsembleParams::new(40, 0.3).unwrap(), &ctx).unwrap();
        for (j, k) in [(0, 0), (0, 1), (1, 1)] {
            assert!(rel_diff(small.get(j, k), large.get(j, k)) <= ctx.eps() * 16u32);
        }
    }

    #[test]
    fn integral_rejects_degenerate_tau() {
        let ctx = ctx();
        let zero = EnsembleParams::new(4, 0.0).unwrap();
        assert!(matches!(
            build_kernel_integral(&zero, &ctx),
            Err(Error::DegenerateArgument { .. })
        ));
        let one = EnsembleParams::weak(4, 0.0).unwrap();
        assert!(matches!(
            build_kernel_integral(&one, &ctx),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn ginoe_entries() {
        let ctx = ctx();
        let m = build_kernel_ginoe(8, &ctx).unwrap();
        let inv_sqrt2 = Float::with_val(300, 0.5f64).sqrt();
        assert!(rel_diff(m.get(0, 0), &inv_sqrt2) <= ctx.eps() * 2u32);
        assert_eq!(m.get(0, 1), m.get(1, 0));
        assert!(m.is_symmetric());
        // (1,2): Γ(3/2)/√(2π Γ(3)) = (√π/2)/√(4π) = 1/4
        assert!(rel_diff(m.get(0, 1), &ctx.float(0.25)) <= ctx.eps() * 2u32);
    }

    #[test]
    fn small_tau_approaches_ginoe() {
        let ctx = ctx();
        let params = EnsembleParams::from_decimal(20, "1e-6").unwrap();
        let near = build_kernel_integral(&params, &ctx).unwrap();
        let ginoe = build_kernel_ginoe(20, &ctx).unwrap();
        let mut worst = 0.0f64;
        for j in 0..10 {
            for k in 0..10 {
                let d = Float::with_val(256, near.get(j, k) - ginoe.get(j, k))
                    .abs()
                    .to_f64();
                worst = worst.max(d);
            }
        }
        assert!(worst <= 1e-4, "max deviation {worst}");
        assert!(worst > 0.0);
    }

    #[test]
    fn hypergeometric_reconciles_and_flags_printed_form() {
        let ctx = ctx();
        let params = EnsembleParams::new(8, 0.5).unwrap();
        let hk = build_kernel_hypergeometric(&params, &ctx).unwrap();
        assert!(hk.report.reconciled_agrees(), "{}", hk.report.summary());
        assert!(!hk.report.printed_agrees());
        assert!(hk.report.max_reconciled_deviation < 1e-60);
        let e23 = hk
            .report
            .entries
            .iter()
            .find(|e| e.j == 2 && e.k == 3)
            .unwrap();
        assert!(e23.reconciled_deviation < 1e-40);
        // j = k = 1 at τ = 1/2: √3/2 through ₂F₁(1/2, 1/2; 1/2; -1) = 1/√2
        let e11 = &hk.report.entries[0];
        assert!((e11.reconciled.to_f64() - 0.866_025_403_784_438_6).abs() < 1e-15);
        assert!(hk.matrix.is_symmetric());
        assert_eq!(hk.matrix.provenance(), Provenance::Hypergeometric);
    }

    #[test]
    fn hypergeometric_near_zero_tau_matches_ginoe_corner() {
        let ctx = ctx();
        let params = EnsembleParams::from_decimal(4, "1e-12").unwrap();
        let hk = build_kernel_hypergeometric(&params, &ctx).unwrap();
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert!((hk.matrix.get(0, 0).to_f64() - inv_sqrt2).abs() < 1e-11);
    }

    #[test]
    fn dump_round_trip() {
        let ctx = ctx();
        let m = build_kernel_integral(&EnsembleParams::new(6, 0.5).unwrap(), &ctx).unwrap();
        let text = m.to_dump(&ctx);
        assert!(text.starts_with("# N=6 tau=0.5 provenance=integral bits=256\n"));
        let (bits, back) = KernelMatrix::parse_dump(&text).unwrap();
        assert_eq!(bits, 256);
        assert_eq!(back.provenance(), Provenance::Integral);
        assert_eq!(
            back.to_dump(&ctx).lines().skip(1).collect::<Vec<_>>(),
            text.lines().skip(1).collect::<Vec<_>>()
        );
    }
}
