//! Local and global central limit diagnostics for the real-eigenvalue count.
//!
//! `N_ℝ` lives on the lattice `2ℤ`, so the Gaussian mass at `2k` is
//! `2 φ(x_k)/σ` with `x_k = (2k - E)/σ`. The profile's `gauss` column is that
//! lattice mass and `sup_lclt` compares `(σ/2) p_{2k}` with `φ(x_k)`; the
//! unit-span versions (`density`, `sup_lclt_literal`) are reported alongside.

use std::fmt::Write as _;

use rug::Float;

use crate::distribution::{write_header, RealCountDistribution};
use crate::kernel::EnsembleParams;
use crate::precision::{parse_float, pi, PrecisionContext};
use crate::special::GUARD_BITS;

#[derive(Debug, Clone)]
pub struct LCLTRow {
    pub k: usize,
    pub x_k: Float,
    pub p_exact: Float,
    /// `exp(-(2k-E)²/(2σ²)) / √(2πσ²)`.
    pub density: Float,
    /// Lattice mass `2 × density`.
    pub gauss: Float,
    /// `p_exact - gauss`.
    pub diff: Float,
    /// `σ² × diff`.
    pub scaled_diff: Float,
}

#[derive(Debug, Clone)]
pub struct LCLTProfile {
    pub params: Option<EnsembleParams>,
    pub mean_nr: Float,
    pub var_nr: Float,
    pub rows: Vec<LCLTRow>,
    /// `max_k |(σ/2) p_{2k} - φ(x_k)|`.
    pub sup_lclt: Float,
    /// `max_k |σ p_{2k} - φ(x_k)|`.
    pub sup_lclt_literal: Float,
    /// `max|φ'| × 2/σ`, the gap between the lattice and continuous suprema.
    pub lattice_slack: Float,
    pub sup_diff: Float,
    pub sup_scaled_diff: Float,
}

/// One profile row computed from `p`, `E(N_ℝ)` and `σ²(N_ℝ)`.
pub fn profile_row(k: usize, p: &Float, mean: &Float, var: &Float, prec: u32) -> LCLTRow {
    let work = prec + GUARD_BITS;
    let sigma = Float::with_val(work, var.sqrt_ref());
    let offset = Float::with_val(work, 2 * k as u64) - mean;
    let x_k = Float::with_val(work, &offset / &sigma);
    let two_pi_var = Float::with_val(work, pi(work) * 2u32) * var;
    let log_density = -Float::with_val(work, offset.square_ref())
        / Float::with_val(work, var * 2u32)
        - two_pi_var.ln() / 2u32;
    let density = log_density.exp();
    let gauss = Float::with_val(work, &density * 2u32);
    let diff = Float::with_val(work, p - &gauss);
    let scaled_diff = Float::with_val(work, &diff * var);
    LCLTRow {
        k,
        x_k: Float::with_val(prec, x_k),
        p_exact: Float::with_val(prec, p),
        density: Float::with_val(prec, density),
        gauss: Float::with_val(prec, gauss),
        diff: Float::with_val(prec, diff),
        scaled_diff: Float::with_val(prec, scaled_diff),
    }
}

pub fn diff_profile(dist: &RealCountDistribution) -> LCLTProfile {
    let prec = dist.prec();
    let work = prec + GUARD_BITS;
    let mean = dist.mean_nr();
    let var = dist.var_nr();
    let rows: Vec<LCLTRow> = dist
        .probs()
        .iter()
        .enumerate()
        .map(|(k, p)| profile_row(k, p, mean, var, prec))
        .collect();
    let sigma = Float::with_val(work, var.sqrt_ref());
    let half_sigma = Float::with_val(work, &sigma / 2u32);

    let max_abs = |f: &dyn Fn(&LCLTRow) -> Float| -> Float {
        rows.iter()
            .map(|r| f(r).abs())
            .fold(Float::with_val(prec, 0u32), |a, b| a.max(&b))
    };
    // φ(x_k) = σ × density
    let sup_lclt = max_abs(&|r| {
        Float::with_val(work, &half_sigma * &r.p_exact) - Float::with_val(work, &sigma * &r.density)
    });
    let sup_lclt_literal = max_abs(&|r| {
        Float::with_val(work, &sigma * &r.p_exact) - Float::with_val(work, &sigma * &r.density)
    });
    let sup_diff = max_abs(&|r| r.diff.clone());
    let sup_scaled_diff = max_abs(&|r| r.scaled_diff.clone());

    // max|φ'| = φ(1) = 1/√(2πe)
    let max_phi_prime = (Float::with_val(work, pi(work) * 2u32)
        * Float::with_val(work, 1u32).exp())
    .sqrt()
    .recip();
    let lattice_slack = Float::with_val(prec, max_phi_prime * 2u32 / &sigma);

    LCLTProfile {
        params: dist.params().cloned(),
        mean_nr: mean.clone(),
        var_nr: var.clone(),
        rows,
        sup_lclt: Float::with_val(prec, sup_lclt),
        sup_lclt_literal: Float::with_val(prec, sup_lclt_literal),
        lattice_slack,
        sup_diff: Float::with_val(prec, sup_diff),
        sup_scaled_diff: Float::with_val(prec, sup_scaled_diff),
    }
}

/// `sup_x |(σ/2) p_{2k} - φ(x)|` over the attained lattice points.
pub fn sup_lclt(dist: &RealCountDistribution) -> Float {
    diff_profile(dist).sup_lclt
}

/// Standardized CDF of `N_ℝ` against `Φ` at one jump point.
#[derive(Debug, Clone)]
pub struct CltRow {
    pub k: usize,
    pub x_k: Float,
    /// `P(N_ℝ < 2k)`.
    pub cdf_left: Float,
    /// `P(N_ℝ ≤ 2k)`.
    pub cdf_right: Float,
    pub normal_cdf: Float,
}

impl CltRow {
    pub fn deviation(&self) -> Float {
        let prec = self.cdf_left.prec();
        let left = Float::with_val(prec, &self.cdf_left - &self.normal_cdf).abs();
        let right = Float::with_val(prec, &self.cdf_right - &self.normal_cdf).abs();
        left.max(&right)
    }
}

pub fn clt_rows(dist: &RealCountDistribution) -> Vec<CltRow> {
    let prec = dist.prec() + GUARD_BITS;
    let out = dist.prec();
    let mean = Float::with_val(prec, dist.mean_nr());
    let sigma = Float::with_val(prec, dist.var_nr().sqrt_ref());
    let sqrt2 = Float::with_val(prec, 2u32).sqrt();
    let mut below = Float::with_val(prec, 0u32);
    let mut rows = Vec::with_capacity(dist.probs().len());
    for (k, p) in dist.probs().iter().enumerate() {
        let offset = Float::with_val(prec, 2 * k as u64) - &mean;
        let (x_k, normal_cdf) = if sigma.is_zero() {
            let phi = match offset.cmp0() {
                Some(std::cmp::Ordering::Less) => Float::with_val(prec, 0u32),
                Some(std::cmp::Ordering::Greater) => Float::with_val(prec, 1u32),
                _ => Float::with_val(prec, 0.5f64),
            };
            (Float::with_val(prec, &offset * f64::INFINITY), phi)
        } else {
            let z = Float::with_val(prec, &offset / &sigma);
            // Φ(z) = erfc(-z/√2)/2
            let phi = Float::with_val(prec, -Float::with_val(prec, &z / &sqrt2)).erfc() / 2u32;
            (z, phi)
        };
        let left = below.clone();
        below += p;
        rows.push(CltRow {
            k,
            x_k: Float::with_val(out, x_k),
            cdf_left: Float::with_val(out, left),
            cdf_right: Float::with_val(out, &below),
            normal_cdf: Float::with_val(out, normal_cdf),
        });
    }
    rows
}

/// Kolmogorov distance between the standardized law of `N_ℝ` and the normal
/// law, comparing both one-sided limits of the step CDF at each jump.
pub fn clt_distance(dist: &RealCountDistribution) -> Float {
    clt_rows(dist)
        .iter()
        .map(CltRow::deviation)
        .fold(Float::with_val(dist.prec(), 0u32), |a, b| a.max(&b))
}

/// RMS difference of `σ² × diff` between two profiles, with `coarse`
/// interpolated linearly in `x` at the points of `fine` that lie in `[-3, 3]`
/// and inside `coarse`'s range.
pub fn overlay_rms(coarse: &LCLTProfile, fine: &LCLTProfile) -> f64 {
    let xs: Vec<(f64, f64)> = coarse
        .rows
        .iter()
        .map(|r| (r.x_k.to_f64(), r.scaled_diff.to_f64()))
        .collect();
    let mut total = 0.0;
    let mut count = 0usize;
    for row in &fine.rows {
        let x = row.x_k.to_f64();
        if !(-3.0..=3.0).contains(&x) {
            continue;
        }
        let Some(i) = xs.windows(2).position(|w| w[0].0 <= x && x <= w[1].0) else {
            continue;
        };
        let ((x0, y0), (x1, y1)) = (xs[i], xs[i + 1]);
        let y = y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        total += (row.scaled_diff.to_f64() - y).powi(2);
        count += 1;
    }
    if count == 0 {
        f64::NAN
    } else {
        (total / count as f64).sqrt()
    }
}

/// Plot-ready CSV: columns `k,x_k,p_exact,gauss,diff,scaled_diff`. The derived
/// columns are computed from the printed `p`, `mean_NR` and `var_NR`, so they
/// can be reproduced exactly from the file.
pub fn lclt_csv(profile: &LCLTProfile, ctx: &PrecisionContext) -> String {
    let mut out = String::new();
    write_header(&mut out, profile.params.as_ref(), profile.rows.len(), ctx);
    let mean_s = ctx.format(&profile.mean_nr);
    let var_s = ctx.format(&profile.var_nr);
    let mean = parse_float(&mean_s, ctx.bits()).expect("formatted value parses");
    let var = parse_float(&var_s, ctx.bits()).expect("formatted value parses");
    let _ = writeln!(out, "# mean_NR={mean_s}");
    let _ = writeln!(out, "# var_NR={var_s}");
    let _ = writeln!(
        out,
        "# mean_NR/2={}",
        ctx.format(&Float::with_val(ctx.bits(), &mean / 2u32))
    );
    let _ = writeln!(out, "# sup_lclt={}", ctx.format(&profile.sup_lclt));
    let _ = writeln!(
        out,
        "# sup_lclt_literal={}",
        ctx.format(&profile.sup_lclt_literal)
    );
    let _ = writeln!(
        out,
        "# lattice_slack={}",
        ctx.format(&profile.lattice_slack)
    );
    let _ = writeln!(out, "# sup_diff={}", ctx.format(&profile.sup_diff));
    let _ = writeln!(
        out,
        "# sup_scaled_diff={}",
        ctx.format(&profile.sup_scaled_diff)
    );
    out.push_str("k,x_k,p_exact,gauss,diff,scaled_diff\n");
    for r in &profile.rows {
        let p_s = ctx.format(&r.p_exact);
        let p = parse_float(&p_s, ctx.bits()).expect("formatted value parses");
        out.push_str(&lclt_line(r.k, &p_s, &p, &mean, &var, ctx));
        out.push('\n');
    }
    out
}

/// A data line of [`lclt_csv`] from the printed `p` and its parsed value.
pub fn lclt_line(
    k: usize,
    p_printed: &str,
    p: &Float,
    mean: &Float,
    var: &Float,
    ctx: &PrecisionContext,
) -> String {
    let row = profile_row(k, p, mean, var, ctx.bits());
    format!(
        "{},{},{},{},{},{}",
        k,
        ctx.format(&row.x_k),
        p_printed,
        ctx.format(&row.gauss),
        ctx.format(&row.diff),
        ctx.format(&row.scaled_diff)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::probabilities_convolution;
    use crate::kernel::build_kernel;
    use crate::spectral::{eigen_sym, Spectrum};

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(256).unwrap()
    }

    fn dist(ctx: &PrecisionContext, n: usize, tau: f64) -> RealCountDistribution {
        let params = EnsembleParams::new(n, tau).unwrap();
        let spec = eigen_sym(&build_kernel(&params, ctx).unwrap(), ctx).unwrap();
        probabilities_convolution(&spec, ctx).unwrap()
    }

    #[test]
    fn discretized_gaussian_has_zero_diff() {
        // masses 2φ(x_k)/σ for a chosen mean and variance
        let mean = Float::with_val(256, 10.3);
        let var = Float::with_val(256, 6u32);
        let probs: Vec<Float> = (0..=10)
            .map(|k| profile_row(k, &Float::with_val(256, 0u32), &mean, &var, 256).gauss)
            .collect();
        let rows: Vec<LCLTRow> = probs
            .iter()
            .enumerate()
            .map(|(k, p)| profile_row(k, p, &mean, &var, 256))
            .collect();
        let eps = PrecisionContext::new(256).unwrap().eps();
        for r in &rows {
            let bound = Float::with_val(256, &r.gauss * &eps);
            assert!(Float::with_val(256, r.diff.abs_ref()) <= bound, "k={}", r.k);
        }
        // the lattice masses sum to 1 up to O(1/σ²) normalization error
        let mut total = Float::with_val(256, 0u32);
        for p in &probs {
            total += p;
        }
        assert!((total.to_f64() - 1.0).abs() < 1.0 / 6.0);
    }

    #[test]
    fn lattice_slack_formula() {
        let ctx = ctx();
        let d = dist(&ctx, 40, 0.5);
        let profile = diff_profile(&d);
        let sigma = d.var_nr().to_f64().sqrt();
        let expected = 2.0 / (sigma * (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt());
        assert!((profile.lattice_slack.to_f64() - expected).abs() < 1e-15);
        assert!(profile.sup_lclt < profile.sup_lclt_literal);
        assert_eq!(sup_lclt(&d), profile.sup_lclt);
    }

    #[test]
    fn trends_over_n_at_half() {
        let ctx = PrecisionContext::new(128).unwrap();
        let profiles: Vec<LCLTProfile> = [40, 80, 160]
            .iter()
            .map(|&n| diff_profile(&dist(&ctx, n, 0.5)))
            .collect();
        assert!(profiles[0].sup_lclt > profiles[1].sup_lclt);
        assert!(profiles[1].sup_lclt > profiles[2].sup_lclt);
        assert!(profiles[0].sup_diff > profiles[2].sup_diff);
        let c: Vec<f64> = [40, 80, 160]
            .iter()
            .map(|&n| clt_distance(&dist(&ctx, n, 0.5)).to_f64())
            .collect();
        assert!(c[0] > c[1] && c[1] > c[2], "{c:?}");
    }

    #[test]
    fn point_mass_clt_distance_is_half() {
        let ctx = ctx();
        let point = RealCountDistribution::from_probs(vec![
            ctx.float(0u32),
            ctx.float(1u32),
            ctx.float(0u32),
        ]);
        let d = clt_distance(&point).to_f64();
        assert!((d - 0.5).abs() < 1e-12, "{d}");
    }

    #[test]
    fn binomial_clt_distance_is_berry_esseen_scale() {
        let ctx = ctx();
        let spec = Spectrum::from_lambdas(vec![ctx.float(0.5); 20]);
        let d = clt_distance(&probabilities_convolution(&spec, &ctx).unwrap()).to_f64();
        let scale = 0.4 / (20.0f64 * 0.25).sqrt();
        assert!(d > 0.0 && d < scale, "{d} vs {scale}");
    }

    #[test]
    fn lclt_lines_reproduce_from_printed_values() {
        let ctx = ctx();
        let profile = diff_profile(&dist(&ctx, 10, 0.5));
        let csv = lclt_csv(&profile, &ctx);
        let header = |key: &str| {
            let line = csv
                .lines()
                .find(|l| l.starts_with(&format!("# {key}=")))
                .unwrap();
            parse_float(line.split_once('=').unwrap().1, 256).unwrap()
        };
        let (mean, var) = (header("mean_NR"), header("var_NR"));
        let data: Vec<&str> = csv
            .lines()
            .skip_while(|l| !l.starts_with("k,"))
            .skip(1)
            .collect();
        assert_eq!(data.len(), 6);
        for line in data {
            let cols: Vec<&str> = line.split(',').collect();
            let k = cols[0].parse().unwrap();
            let p = parse_float(cols[2], 256).unwrap();
            assert_eq!(lclt_line(k, cols[2], &p, &mean, &var, &ctx), line);
        }
    }
}
