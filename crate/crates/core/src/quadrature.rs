//! Gauss–Hermite quadrature at arbitrary precision.

use rug::Float;

use crate::error::{Error, Result};
use crate::precision::{pi, pow2, PrecisionContext};
use crate::special::GUARD_BITS;

const NEWTON_MAX_ITERATIONS: usize = 200;

/// Nodes and weights integrating against `e^{-x²}` on the real line.
///
/// Nodes are sorted ascending and exactly symmetric about zero.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<Float>,
    weights: Vec<Float>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Float] {
        &self.nodes
    }

    pub fn weights(&self) -> &[Float] {
        &self.weights
    }

    /// `Σ w_i f(x_i)` at the rule's precision.
    pub fn integrate<F>(&self, mut f: F) -> Float
    where
        F: FnMut(&Float) -> Float,
    {
        let prec = self.weights.first().map_or(64, Float::prec);
        let mut sum = Float::with_val(prec, 0u32);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += Float::with_val(prec, w * f(x));
        }
        sum
    }
}

/// Order-`m` Gauss–Hermite rule: nodes are the roots of `H_m`, found by Newton
/// iteration on the orthonormal Hermite recurrence from double-precision
/// starting guesses found by Sturm bisection.
/// Weights are `2 / h̃_m'(x)²` with `h̃` the orthonormal polynomials, which
/// equals `2^{m-1} m! √π / (m² H_{m-1}(x)²)`.
pub fn gauss_hermite_rule(m: usize, ctx: &PrecisionContext) -> Result<QuadratureRule> {
    if m == 0 {
        return Err(Error::Domain {
            op: "gauss_hermite_rule",
            detail: "order must be at least 1".into(),
        });
    }
    let prec = ctx.bits() + GUARD_BITS;
    let coeffs = RecurrenceCoefficients::new(m, prec);
    let guesses = f64_roots(m);

    let half = m / 2;
    let mut positive: Vec<(Float, Float)> = Vec::with_capacity(half);
    let tol = pow2(prec, -(prec as i32) + 6);
    for (i, &guess) in guesses.iter().enumerate().take(half) {
        let mut z = Float::with_val(prec, guess);
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITERATIONS {
            let (p, dp) = coeffs.eval(&z);
            let step = Float::with_val(prec, &p / &dp);
            z -= &step;
            if Float::with_val(prec, step.abs_ref())
                <= Float::with_val(prec, Float::with_val(prec, z.abs_ref()) * &tol)
            {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence {
                op: "gauss_hermite_rule",
                iterations: NEWTON_MAX_ITERATIONS,
                residual: format!("root {i} of H_{m} near {guess}"),
            });
        }
        let (_, dp) = coeffs.eval(&z);
        let weight = Float::with_val(prec, 2u32) / Float::with_val(prec, dp.square_ref());
        positive.push((z, weight));
    }
    // roots were found largest first; they must be strictly decreasing and positive
    for (i, pair) in positive.windows(2).enumerate() {
        if pair[1].0 >= pair[0].0 {
            return Err(Error::Convergence {
                op: "gauss_hermite_rule",
                iterations: NEWTON_MAX_ITERATIONS,
                residual: format!("roots {i} and {} of H_{m} coincide", i + 1),
            });
        }
    }
    if positive.last().is_some_and(|(z, _)| *z <= 0) {
        return Err(Error::Convergence {
            op: "gauss_hermite_rule",
            iterations: NEWTON_MAX_ITERATIONS,
            residual: format!("smallest positive root of H_{m} is not positive"),
        });
    }

    let bits = ctx.bits();
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for (z, w) in &positive {
        nodes.push(Float::with_val(bits, -z));
        weights.push(Float::with_val(bits, w));
    }
    if m % 2 == 1 {
        let zero = Float::with_val(prec, 0u32);
        let (_, dp) = coeffs.eval(&zero);
        nodes.push(Float::with_val(bits, 0u32));
        weights.push(Float::with_val(
            bits,
            Float::with_val(prec, 2u32) / dp.square(),
        ));
    }
    for (z, w) in positive.iter().rev() {
        nodes.push(Float::with_val(bits, z));
        weights.push(Float::with_val(bits, w));
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Constants of `h̃_{j+1} = x √(2/(j+1)) h̃_j − √(j/(j+1)) h̃_{j−1}`, `h̃_0 = π^{-1/4}`.
struct RecurrenceCoefficients {
    h0: Float,
    scale: Vec<Float>,
    back: Vec<Float>,
    deriv: Float,
}

impl RecurrenceCoefficients {
    fn new(m: usize, prec: u32) -> Self {
        let h0 = Float::with_val(prec, pi(prec).recip_sqrt().sqrt());
        let scale = (0..m)
            .map(|j| (Float::with_val(prec, 2u32) / (j as u32 + 1)).sqrt())
            .collect();
        let back = (0..m)
            .map(|j| (Float::with_val(prec, j as u32) / (j as u32 + 1)).sqrt())
            .collect();
        let deriv = Float::with_val(prec, 2 * m as u32).sqrt();
        Self {
            h0,
            scale,
            back,
            deriv,
        }
    }

    /// `(h̃_m(x), h̃_m'(x))`, using `h̃_m' = √(2m) h̃_{m-1}`.
    fn eval(&self, x: &Float) -> (Float, Float) {
        let prec = self.h0.prec();
        let mut prev = Float::with_val(prec, 0u32);
        let mut cur = self.h0.clone();
        for (scale, back) in self.scale.iter().zip(&self.back) {
            let mut next = Float::with_val(prec, x * scale);
            next *= &cur;
            next -= Float::with_val(prec, back * &prev);
            prev = std::mem::replace(&mut cur, next);
        }
        let dp = Float::with_val(prec, &self.deriv * &prev);
        (cur, dp)
    }
}

/// Positive roots of `H_m` in double precision, largest first, by Sturm
/// bisection on the symmetric tridiagonal Jacobi matrix of the Hermite
/// recurrence (zero diagonal, off-diagonal `√(j/2)`).
fn f64_roots(m: usize) -> Vec<f64> {
    let beta_sq: Vec<f64> = (1..m).map(|j| j as f64 / 2.0).collect();
    // eigenvalues strictly below x
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut d = -x;
        for i in 0..m {
            if i > 0 {
                d = -x - beta_sq[i - 1] / d;
            }
            if d == 0.0 {
                d = -f64::EPSILON * (1.0 + x.abs());
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let upper = (2.0 * m as f64 + 1.0).sqrt() + 1.0;
    (0..m / 2)
        .map(|i| {
            // the (i+1)-th largest eigenvalue has m - 1 - i eigenvalues below it
            let target = m - 1 - i;
            let (mut lo, mut hi) = (0.0f64, upper);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if count_below(mid) > target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::rel_diff;
    use crate::special::log_gamma;
    use rug::ops::Pow;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(256).unwrap()
    }

    #[test]
    fn order_one_and_two() {
        let ctx = ctx();
        let rule = gauss_hermite_rule(1, &ctx).unwrap();
        assert_eq!(rule.nodes(), &[ctx.float(0u32)]);
        let sqrt_pi = pi(256).sqrt();
        assert!(rel_diff(&rule.weights()[0], &sqrt_pi) <= ctx.eps());

        let rule = gauss_hermite_rule(2, &ctx).unwrap();
        let r = ctx.float(0.5).sqrt();
        assert!(rel_diff(&rule.nodes()[1], &r) <= ctx.eps());
        assert_eq!(rule.nodes()[0], -rule.nodes()[1].clone());
        assert!(gauss_hermite_rule(0, &ctx).is_err());
    }

    #[test]
    fn fourth_moment_with_three_nodes() {
        let ctx = ctx();
        let rule = gauss_hermite_rule(3, &ctx).unwrap();
        let m4 = rule.integrate(|x| Float::with_val(300, x.square_ref()).square());
        let expected = pi(300).sqrt() * 3u32 / 4u32;
        assert!(rel_diff(&m4, &expected) <= ctx.eps() * 4u32);
    }

    #[test]
    fn symmetric_positive_normalized_exact() {
        let ctx = ctx();
        let eps = ctx.eps();
        for &m in &[5usize, 16, 40, 101] {
            let rule = gauss_hermite_rule(m, &ctx).unwrap();
            assert_eq!(rule.order(), m);
            for i in 0..m {
                assert_eq!(rule.nodes()[i], -rule.nodes()[m - 1 - i].clone());
                assert!(rule.weights()[i] > 0);
            }
            assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
            // even moments Γ(n + 1/2) for 2n ≤ 2m - 1; summed at elevated precision
            for n in 0..m {
                let mut sum = Float::with_val(600, 0u32);
                for (x, w) in rule.nodes().iter().zip(rule.weights()) {
                    let x2n = Float::with_val(600, x.square_ref()).pow(n as u32);
                    sum += x2n * w;
                }
                let ln_expected = log_gamma(
                    &Float::with_val(600, n as f64 + 0.5),
                    &PrecisionContext::new(600).unwrap(),
                )
                .unwrap();
                let expected = ln_expected.exp();
                let tol = Float::with_val(64, &eps * (2 * n as u32 + 2));
                assert!(rel_diff(&sum, &expected) <= tol, "m={m} n={n}");
            }
        }
    }

    #[test]
    fn weights_sum_to_sqrt_pi() {
        let ctx = ctx();
        let rule = gauss_hermite_rule(200, &ctx).unwrap();
        let mut sum = Float::with_val(600, 0u32);
        for w in rule.weights() {
            sum += w;
        }
        assert!(rel_diff(&sum, &pi(600).sqrt()) <= ctx.eps());
    }
}
