//! Symmetric eigendecomposition of the kernel matrix by cyclic Jacobi rotations.

use rug::Float;

use crate::error::{Error, Result};
use crate::kernel::{EnsembleParams, KernelMatrix};
use crate::precision::{format_sci, parse_float, pow2, PrecisionContext};
use crate::special::GUARD_BITS;

/// Eigenvalues of a kernel matrix, sorted descending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    lambdas: Vec<Float>,
    source: Option<EnsembleParams>,
    residual: Float,
}

impl Spectrum {
    /// Spectrum from given eigenvalues (sorted here); no source parameters.
    pub fn from_lambdas(mut lambdas: Vec<Float>) -> Self {
        lambdas.sort_by(|a, b| b.partial_cmp(a).expect("eigenvalues are not NaN"));
        Self {
            lambdas,
            source: None,
            residual: Float::with_val(64, 0u32),
        }
    }

    pub fn lambdas(&self) -> &[Float] {
        &self.lambdas
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn source(&self) -> Option<&EnsembleParams> {
        self.source.as_ref()
    }

    /// Largest off-diagonal magnitude at termination over the Frobenius norm.
    pub fn residual(&self) -> &Float {
        &self.residual
    }

    pub fn prec(&self) -> u32 {
        self.lambdas.first().map_or(64, Float::prec)
    }

    pub fn sum(&self) -> Float {
        let mut s = Float::with_val(self.prec(), 0u32);
        for l in &self.lambdas {
            s += l;
        }
        s
    }

    pub fn product(&self) -> Float {
        let mut p = Float::with_val(self.prec(), 1u32);
        for l in &self.lambdas {
            p *= l;
        }
        p
    }

    /// `# N=… tau=… bits=… residual=…` header, then one eigenvalue per line.
    pub fn to_dump(&self, ctx: &PrecisionContext) -> String {
        let (n, tau) = match &self.source {
            Some(p) => (p.n().to_string(), p.tau_label().to_string()),
            None => ((2 * self.len()).to_string(), "NA".to_string()),
        };
        let mut out = format!(
            "# N={n} tau={tau} bits={} residual={}\n",
            ctx.bits(),
            format_sci(&self.residual, 6)
        );
        for l in &self.lambdas {
            out.push_str(&ctx.format(l));
            out.push('\n');
        }
        out
    }

    pub fn parse_dump(text: &str, ctx: &PrecisionContext) -> Result<Self> {
        let lambdas = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .map(|l| parse_float(l, ctx.bits()))
            .collect::<Result<Vec<_>>>()?;
        if lambdas.is_empty() {
            return Err(Error::Parse("spectrum dump has no eigenvalues".into()));
        }
        Ok(Self::from_lambdas(lambdas))
    }
}

/// Eigenvalues of a symmetric matrix by cyclic-by-row Jacobi rotations.
///
/// Sweeps stop once every off-diagonal entry is negligible against the
/// geometric mean of its two diagonal entries (which gives small eigenvalues
/// to high relative accuracy); the result is accepted only if the largest
/// off-diagonal entry is below `2^(8-bits)` times the Frobenius norm.
pub fn eigen_sym(m: &KernelMatrix, ctx: &PrecisionContext) -> Result<Spectrum> {
    let order: Vec<usize> = (0..m.dim()).collect();
    eigen_sym_permuted(m, &order, ctx)
}

/// [`eigen_sym`] applied to `P M Pᵀ` for the permutation `order`, which
/// changes the sequence of rotations but not the eigenvalues.
pub fn eigen_sym_permuted(
    m: &KernelMatrix,
    order: &[usize],
    ctx: &PrecisionContext,
) -> Result<Spectrum> {
    let n = m.dim();
    let mut seen = vec![false; n];
    if order.len() != n
        || order
            .iter()
            .any(|&i| i >= n || std::mem::replace(&mut seen[i], true))
    {
        return Err(Error::InvalidParams(
            "order is not a permutation of the matrix indices".into(),
        ));
    }
    if !m.is_symmetric() {
        return Err(Error::InvalidParams(
            "eigen_sym needs a symmetric matrix".into(),
        ));
    }
    let prec = ctx.bits() + GUARD_BITS;
    let mut a: Vec<Vec<Float>> = order
        .iter()
        .map(|&i| {
            order
                .iter()
                .map(|&j| Float::with_val(prec, m.get(i, j)))
                .collect()
        })
        .collect();

    let mut frobenius = Float::with_val(prec, 0u32);
    for row in &a {
        for x in row {
            frobenius += Float::with_val(prec, x.square_ref());
        }
    }
    let frobenius = frobenius.sqrt();
    let rotate_tol = pow2(prec, 4 - prec as i32);
    let accept_tol = Float::with_val(prec, &frobenius * pow2(prec, 8 - ctx.bits() as i32));
    let max_sweeps = (ctx.bits() as usize).max(64);

    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].is_zero() {
                    continue;
                }
                let scale = Float::with_val(prec, &a[p][p] * &a[q][q]).abs().sqrt();
                let negligible = Float::with_val(prec, &scale * &rotate_tol);
                if Float::with_val(prec, a[p][q].abs_ref()) <= negligible {
                    continue;
                }
                rotate(&mut a, p, q, prec);
                rotated = true;
            }
        }
        sweeps += 1;
        if !rotated {
            break;
        }
        if sweeps >= max_sweeps {
            return Err(Error::Convergence {
                op: "eigen_sym",
                iterations: sweeps,
                residual: format!("{:.3e}", off_diagonal_max(&a, prec).to_f64()),
            });
        }
    }

    let off = off_diagonal_max(&a, prec);
    if off > accept_tol {
        return Err(Error::Convergence {
            op: "eigen_sym",
            iterations: sweeps,
            residual: format!("{:.3e}", off.to_f64()),
        });
    }
    let residual = if frobenius.is_zero() {
        Float::with_val(64, 0u32)
    } else {
        Float::with_val(64, off / &frobenius)
    };
    let lambdas = (0..n)
        .map(|i| Float::with_val(ctx.bits(), &a[i][i]))
        .collect();
    let mut spectrum = Spectrum::from_lambdas(lambdas);
    spectrum.source = m.params().cloned();
    spectrum.residual = residual;
    Ok(spectrum)
}

/// Annihilates `a[p][q]` with the stable Rutishauser form of the rotation.
fn rotate(a: &mut [Vec<Float>], p: usize, q: usize, prec: u32) {
    let apq = a[p][q].clone();
    let theta = Float::with_val(prec, &a[q][q] - &a[p][p]) / Float::with_val(prec, &apq * 2u32);
    let root = (Float::with_val(prec, theta.square_ref()) + 1u32).sqrt();
    let mut t = (Float::with_val(prec, theta.abs_ref()) + &root).recip();
    if theta.is_sign_negative() {
        t = -t;
    }
    let c = (Float::with_val(prec, t.square_ref()) + 1u32)
        .sqrt()
        .recip();
    let s = Float::with_val(prec, &t * &c);
    let tau = Float::with_val(prec, &s / Float::with_val(prec, 1u32 + &c));
    let shift = Float::with_val(prec, &t * &apq);
    a[p][p] -= &shift;
    a[q][q] += &shift;
    a[p][q] = Float::with_val(prec, 0u32);
    a[q][p] = Float::with_val(prec, 0u32);
    for r in 0..a.len() {
        if r == p || r == q {
            continue;
        }
        let g = a[r][p].clone();
        let h = a[r][q].clone();
        let gp = Float::with_val(
            prec,
            &g - Float::with_val(
                prec,
                &s * Float::with_val(prec, &h + Float::with_val(prec, &g * &tau)),
            ),
        );
        let hq = Float::with_val(
            prec,
            &h + Float::with_val(
                prec,
                &s * Float::with_val(prec, &g - Float::with_val(prec, &h * &tau)),
            ),
        );
        a[r][p] = gp.clone();
        a[p][r] = gp;
        a[r][q] = hq.clone();
        a[q][r] = hq;
    }
}

fn off_diagonal_max(a: &[Vec<Float>], prec: u32) -> Float {
    let mut max = Float::with_val(prec, 0u32);
    for (i, row) in a.iter().enumerate() {
        for x in &row[i + 1..] {
            let v = Float::with_val(prec, x.abs_ref());
            if v > max {
                max = v;
            }
        }
    }
    max
}

/// The Bernoulli parameters `(λ, 1-λ)`. Eigenvalues outside `(0,1)` by more
/// than `eps` are reported, never clipped.
pub fn bernoulli_decomposition(
    spec: &Spectrum,
    ctx: &PrecisionContext,
) -> Result<Vec<(Float, Float)>> {
    let eps = ctx.eps();
    let upper = Float::with_val(ctx.bits() + 8, 1u32 + &eps);
    let lower = Float::with_val(ctx.bits() + 8, -&eps);
    spec.lambdas
        .iter()
        .enumerate()
        .map(|(index, l)| {
            if *l <= lower || *l >= upper || l.is_nan() {
                return Err(Error::FactorizationViolation {
                    index,
                    value: format_sci(l, 20),
                });
            }
            let complement = Float::with_val(l.prec(), 1u32 - l);
            Ok((l.clone(), complement))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, build_kernel_integral};
    use crate::precision::rel_diff;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(256).unwrap()
    }

    fn matrix(rows: &[&[f64]]) -> KernelMatrix {
        KernelMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| Float::with_val(256, x)).collect())
                .collect(),
        )
        .unwrap()
    }

    /// Determinant by fraction-free (Bareiss) elimination at `prec` bits.
    fn bareiss_det(m: &KernelMatrix, prec: u32) -> Float {
        let n = m.dim();
        let mut a: Vec<Vec<Float>> = m
            .rows()
            .map(|r| r.iter().map(|x| Float::with_val(prec, x)).collect())
            .collect();
        let mut prev = Float::with_val(prec, 1u32);
        for k in 0..n - 1 {
            assert!(!a[k][k].is_zero());
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = Float::with_val(prec, &a[i][j] * &a[k][k])
                        - Float::with_val(prec, &a[i][k] * &a[k][j]);
                    a[i][j] = v / &prev;
                }
            }
            prev = a[k][k].clone();
        }
        a[n - 1][n - 1].clone()
    }

    #[test]
    fn one_by_one() {
        let spec = eigen_sym(&matrix(&[&[0.25]]), &ctx()).unwrap();
        assert_eq!(spec.lambdas(), &[Float::with_val(256, 0.25)]);
    }

    #[test]
    fn two_by_two_equal_diagonal() {
        let spec = eigen_sym(&matrix(&[&[0.5, 0.125], &[0.125, 0.5]]), &ctx()).unwrap();
        assert_eq!(spec.lambdas()[0], 0.625);
        assert_eq!(spec.lambdas()[1], 0.375);
    }

    #[test]
    fn trace_and_determinant_oracles() {
        let ctx = ctx();
        let params = EnsembleParams::new(8, 0.5).unwrap();
        let m = build_kernel_integral(&params, &ctx).unwrap();
        let spec = eigen_sym(&m, &ctx).unwrap();
        let tol = pow2(64, 16 - 256);
        assert!(rel_diff(&spec.sum(), &m.trace()) <= tol);
        let det = bareiss_det(&m, ctx.verify_bits());
        assert!(rel_diff(&spec.product(), &det) <= tol);
        assert!(spec.residual() < &pow2(64, 8 - 256));
        assert!(spec.lambdas().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rotation_order_does_not_matter() {
        let ctx = ctx();
        let params = EnsembleParams::new(24, 0.75).unwrap();
        let m = build_kernel_integral(&params, &ctx).unwrap();
        let base = eigen_sym(&m, &ctx).unwrap();
        let order: Vec<usize> = (0..12).map(|i| (i * 5 + 3) % 12).collect();
        let shuffled = eigen_sym_permuted(&m, &order, &ctx).unwrap();
        let tol = pow2(64, 12 - 256);
        let largest = base.lambdas()[0].clone();
        for (a, b) in base.lambdas().iter().zip(shuffled.lambdas()) {
            let diff = Float::with_val(256, a - b).abs();
            assert!(diff <= Float::with_val(256, &largest * &tol));
        }
        assert!(eigen_sym_permuted(&m, &[0, 0, 1], &ctx).is_err());
    }

    #[test]
    fn tiny_eigenvalues_have_relative_accuracy() {
        // GinOE N=40: smallest eigenvalue ~ 4e-18; compare against a 512-bit run
        let ctx = ctx();
        let params = EnsembleParams::new(40, 0.0).unwrap();
        let low = eigen_sym(&build_kernel(&params, &ctx).unwrap(), &ctx).unwrap();
        let hi_ctx = ctx.elevated();
        let high = eigen_sym(&build_kernel(&params, &hi_ctx).unwrap(), &hi_ctx).unwrap();
        let smallest = low.lambdas().last().unwrap();
        assert!(*smallest < 1e-15 && *smallest > 0);
        // the kernel entries carry 2^-256 relative error, so λ_min keeps about 2^-256 / λ_min
        let tol = pow2(64, 80 - 256);
        for (a, b) in low.lambdas().iter().zip(high.lambdas()) {
            assert!(rel_diff(a, b) <= tol);
        }
    }

    #[test]
    fn bernoulli_pairs_and_violations() {
        let ctx = ctx();
        let half = Spectrum::from_lambdas(vec![ctx.float(0.5)]);
        let pairs = bernoulli_decomposition(&half, &ctx).unwrap();
        assert_eq!(pairs, vec![(ctx.float(0.5), ctx.float(0.5))]);
        let bad = Spectrum::from_lambdas(vec![ctx.float(0.5), ctx.float(1.25)]);
        assert!(matches!(
            bernoulli_decomposition(&bad, &ctx),
            Err(Error::FactorizationViolation { index: 0, .. })
        ));
        let neg = Spectrum::from_lambdas(vec![ctx.float(-0.01)]);
        assert!(bernoulli_decomposition(&neg, &ctx).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let ctx = ctx();
        let params = EnsembleParams::new(10, 0.25).unwrap();
        let spec = eigen_sym(&build_kernel(&params, &ctx).unwrap(), &ctx).unwrap();
        let text = spec.to_dump(&ctx);
        assert!(text.starts_with("# N=10 tau=0.25 bits=256 residual="));
        let back = Spectrum::parse_dump(&text, &ctx).unwrap();
        assert_eq!(back.len(), 5);
        assert_eq!(
            back.to_dump(&ctx).lines().skip(1).collect::<Vec<_>>(),
            text.lines().skip(1).collect::<Vec<_>>()
        );
    }
}
