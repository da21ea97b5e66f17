//! Acceptance criteria 1-12. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ginoe_cli::config::Task;
use ginoe_core::distribution::{log_concavity_check, moments_asymptotic, zeros};
use ginoe_core::gaussian::sup_lclt;
use ginoe_core::precision::{parse_float, rel_diff};
use ginoe_core::special::c_alpha;
use ginoe_core::spectral::bernoulli_decomposition;
use ginoe_core::{
    build_kernel, build_kernel_ginoe, build_kernel_hypergeometric, eigen_sym,
    probabilities_convolution, probabilities_dft, EnsembleParams, PrecisionContext,
    RealCountDistribution,
};
use ginoe_montecarlo::{compare, run_trials};
use ginoe_verify::{cli, outcome, Outcome, Report};
use rayon::prelude::*;
use rug::Float;

const TAU_GRID: [&str; 6] = ["0", "0.25", "0.5", "0.75", "0.9", "0.99"];

fn ctx(bits: u32) -> PrecisionContext {
    PrecisionContext::new(bits).unwrap()
}

fn distribution(params: &EnsembleParams, ctx: &PrecisionContext) -> RealCountDistribution {
    let spec = eigen_sym(&build_kernel(params, ctx).unwrap(), ctx).unwrap();
    probabilities_convolution(&spec, ctx).unwrap()
}

fn exact_checkpoint(bits: u32) -> (Float, Duration) {
    let start = Instant::now();
    let csv = cli(Task::Probs, 80, "0.5", bits);
    let p = parse_float(&csv.row("k", "20")["p"], bits).unwrap();
    (p, start.elapsed())
}

fn criterion_1() -> Outcome {
    let (p, elapsed) = exact_checkpoint(256);
    let target = parse_float("7.946014632966e-23", 256).unwrap();
    let rel = rel_diff(&p, &target).to_f64();
    outcome(
        rel <= 5e-11 && elapsed < Duration::from_secs(120),
        format!(
            "p_40 = {:.13e}; relative gap {rel:.2e}; {:.1}s",
            p.to_f64(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let csv = cli(Task::Saddle { k: Some(20) }, 80, "0.5", 256);
    let row = csv.row("k", "20");
    let approx: f64 = row["approx_p"].parse().unwrap();
    let ratio: f64 = row["ratio"].parse().unwrap();
    let b: f64 = row["b"].parse().unwrap();
    let approx_ok = (approx - 7.943e-23).abs() <= 0.0005e-23;
    let ratio_ok = (ratio - 0.9996).abs() <= 0.0001;
    let b_ok = (b - 1.249).abs() <= 0.002;
    outcome(
        approx_ok && ratio_ok && b_ok,
        format!("approx {approx:.4e}; ratio {ratio:.5}; b {b:.4}"),
    )
}

fn criterion_3() -> Outcome {
    let csv = cli(Task::Lclt, 100, "0.99", 256);
    let half_mean = csv.meta_f64("mean_NR/2");
    let var = csv.meta_f64("var_NR");
    let constant = csv.meta_f64("sup_scaled_diff");
    let finite = csv.rows.iter().all(|r| {
        ["diff", "scaled_diff", "gauss"]
            .iter()
            .all(|c| r[*c].parse::<f64>().is_ok_and(f64::is_finite))
    });
    let sup_diff = csv
        .rows
        .iter()
        .map(|r| r["diff"].parse::<f64>().unwrap().abs())
        .fold(0.0, f64::max);
    let mean_ok = (half_mean - 41.1).abs() <= 0.05;
    let var_ok = (var - 25.9).abs() <= 0.05;
    let bound_ok = sup_diff <= constant / var * (1.0 + 1e-12);
    outcome(
        mean_ok && var_ok && finite && bound_ok,
        format!(
            "mean_NR/2 = {half_mean:.4} (target 41.1 +- 0.05: {}); var_NR = {var:.4} (target 25.9 +- 0.05: {}); \
             finite = {finite}; sup|diff| = {sup_diff:.3e} <= {constant:.3e}/var_NR: {bound_ok}",
            ok(mean_ok),
            ok(var_ok)
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "off"
    }
}

struct GridPoint {
    n: usize,
    tau: &'static str,
    normalized: bool,
    lambdas_in_unit: bool,
    zeros_negative: bool,
    log_concave: bool,
}

fn grid() -> Vec<GridPoint> {
    let c = ctx(256);
    let floor = ginoe_core::precision::pow2(64, 24 - 256);
    let points: Vec<(usize, &'static str)> = (1..=50)
        .flat_map(|h| TAU_GRID.iter().map(move |t| (2 * h, *t)))
        .collect();
    points
        .par_iter()
        .map(|&(n, tau)| {
            let params = EnsembleParams::from_decimal(n, tau).unwrap();
            let spec = eigen_sym(&build_kernel(&params, &c).unwrap(), &c).unwrap();
            let dist = probabilities_convolution(&spec, &c).unwrap();
            let gap = Float::with_val(64, dist.total() - 1u32).abs();
            GridPoint {
                n,
                tau,
                normalized: gap <= floor,
                lambdas_in_unit: bernoulli_decomposition(&spec, &c).is_ok()
                    && spec.lambdas().iter().all(|l| *l > 0 && *l < 1),
                zeros_negative: zeros(&spec, &c).is_ok_and(|z| z.all_negative),
                log_concave: log_concavity_check(&dist).passed,
            }
        })
        .collect()
}

fn grid_outcome(points: &[GridPoint], what: &str, pick: impl Fn(&GridPoint) -> bool) -> Outcome {
    let bad: Vec<String> = points
        .iter()
        .filter(|p| !pick(p))
        .map(|p| format!("N={} tau={}", p.n, p.tau))
        .collect();
    outcome(
        bad.is_empty(),
        format!(
            "{what} at {}/{} grid points{}",
            points.len() - bad.len(),
            points.len(),
            if bad.is_empty() {
                String::new()
            } else {
                format!("; failing: {}", bad.join(" "))
            }
        ),
    )
}

fn criterion_7() -> Outcome {
    let c = ctx(256);
    let mut dft_ok = true;
    let mut dft_points = 0;
    for n in [10, 40, 80] {
        for tau in ["0.25", "0.5", "0.75", "0.99"] {
            let params = EnsembleParams::from_decimal(n, tau).unwrap();
            let spec = eigen_sym(&build_kernel(&params, &c).unwrap(), &c).unwrap();
            dft_ok &= probabilities_dft(&spec, &c).is_ok();
            dft_points += 1;
        }
    }
    let mut worst = 0.0f64;
    let mut hyp_ok = true;
    for n in [10, 20, 40] {
        for tau in ["0.25", "0.5", "0.75"] {
            let params = EnsembleParams::from_decimal(n, tau).unwrap();
            let hk = build_kernel_hypergeometric(&params, &c).unwrap();
            for e in &hk.report.entries {
                let gap = Float::with_val(64, &e.reconciled - &e.integral)
                    .abs()
                    .to_f64();
                worst = worst.max(gap);
            }
            hyp_ok &= hk.report.reconciled_agrees();
        }
    }
    hyp_ok &= worst < 1e-40;
    outcome(
        dft_ok && hyp_ok,
        format!(
            "convolution vs DFT agree at {dft_points} points: {dft_ok}; integral vs reconciled hypergeometric \
             max |gap| {worst:.2e} (N <= 40)"
        ),
    )
}

fn criterion_8() -> Outcome {
    let c = ctx(256);
    let mut worst = 0.0f64;
    for n in [10, 40, 80, 100] {
        let small = distribution(&EnsembleParams::from_decimal(n, "1e-6").unwrap(), &c);
        let kernel = build_kernel_ginoe(n, &c).unwrap();
        let ginoe = probabilities_convolution(&eigen_sym(&kernel, &c).unwrap(), &c).unwrap();
        for (p, q) in small.probs().iter().zip(ginoe.probs()) {
            if *q > 1e-10 {
                worst = worst.max(rel_diff(p, q).to_f64());
            }
        }
    }
    outcome(
        worst <= 1e-4,
        format!("max relative gap {worst:.3e} over N in {{10, 40, 80, 100}} (p > 1e-10)"),
    )
}

fn criterion_9() -> Outcome {
    let c = ctx(256);
    let ns = [50usize, 100, 200];
    let limit = 2.0 - 2f64.sqrt();
    let mut mean_ratio = Vec::new();
    let mut var_ratio = Vec::new();
    let mut weak_gap = Vec::new();
    let c1 = c_alpha(&Float::with_val(256, 1u32), &c).unwrap().to_f64();
    for n in ns {
        let params = EnsembleParams::from_decimal(n, "0.5").unwrap();
        let dist = distribution(&params, &c);
        let (asym, _) = moments_asymptotic(&params, &c).unwrap();
        let mean = dist.mean_nr().to_f64();
        mean_ratio.push(mean / asym.to_f64());
        var_ratio.push(dist.var_nr().to_f64() / mean);
        let weak = distribution(&EnsembleParams::weak(n, 1.0).unwrap(), &c);
        weak_gap.push((weak.mean_nr().to_f64() / n as f64 - c1).abs());
    }
    let in_band = (0.98..=1.02).contains(&mean_ratio[2]);
    let closer = (mean_ratio[2] - 1.0).abs() < (mean_ratio[0] - 1.0).abs();
    let var_monotone = var_ratio
        .windows(2)
        .all(|w| (w[1] - limit).abs() < (w[0] - limit).abs());
    let weak_monotone = weak_gap.windows(2).all(|w| w[1] < w[0]);
    outcome(
        in_band && closer && var_monotone && weak_monotone,
        format!(
            "E/E_asym at N=50,100,200: {:.5} {:.5} {:.5} (N=200 in [0.98, 1.02]: {}; closer than N=50: {closer}); \
             var/E: {:.5} {:.5} {:.5} -> {limit:.6} monotone: {var_monotone}; |E/N - c(1)| at alpha=1: \
             {:.3e} {:.3e} {:.3e} decreasing: {weak_monotone}",
            mean_ratio[0],
            mean_ratio[1],
            mean_ratio[2],
            ok(in_band),
            var_ratio[0],
            var_ratio[1],
            var_ratio[2],
            weak_gap[0],
            weak_gap[1],
            weak_gap[2]
        ),
    )
}

fn criterion_10() -> Outcome {
    let c = ctx(256);
    let ns = [40usize, 80, 160];
    let fixed: Vec<f64> = ns
        .iter()
        .map(|&n| {
            sup_lclt(&distribution(
                &EnsembleParams::from_decimal(n, "0.5").unwrap(),
                &c,
            ))
            .to_f64()
        })
        .collect();
    let weak: Vec<f64> = ns
        .iter()
        .map(|&n| sup_lclt(&distribution(&EnsembleParams::weak(n, 1.0).unwrap(), &c)).to_f64())
        .collect();
    let dec = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    outcome(
        dec(&fixed) && dec(&weak),
        format!(
            "sup_lclt at N=40,80,160: tau=0.5 {:.4e} {:.4e} {:.4e}; alpha=1 {:.4e} {:.4e} {:.4e}",
            fixed[0], fixed[1], fixed[2], weak[0], weak[1], weak[2]
        ),
    )
}

fn criterion_11() -> Outcome {
    let start = Instant::now();
    let c = ctx(256);
    let trials = 200_000;
    let params = EnsembleParams::new(8, 0.5).unwrap();
    let exact: Vec<f64> = distribution(&params, &c)
        .probs()
        .iter()
        .map(Float::to_f64)
        .collect();
    let mc = run_trials(8, 0.5, trials, 20240611).unwrap();
    let worst = compare(&mc, &exact)
        .iter()
        .map(|r| r.z_score.abs())
        .fold(0.0, f64::max);
    let bins_ok = worst < 4.0;

    let ginoe = run_trials(2, 0.0, trials, 20240612).unwrap();
    let p2 = 0.5f64.sqrt();
    let se = (p2 * (1.0 - p2) / trials as f64).sqrt();
    let observed = ginoe.empirical_p()[1];
    let ginoe_ok = (observed - p2).abs() < 3.0 * se;

    let symmetric = run_trials(8, 1.0, 10_000, 20240613).unwrap();
    let all_real = symmetric.counts_nr[8] == symmetric.trials;

    let parity = mc.parity_violations + ginoe.parity_violations + symmetric.parity_violations;
    let elapsed = start.elapsed();
    outcome(
        bins_ok && ginoe_ok && all_real && parity == 0 && elapsed < Duration::from_secs(300),
        format!(
            "N=8 tau=0.5 max |z| {worst:.3}; N=2 GinOE p_2 {observed:.5} vs {p2:.5} ({:.2} SE); tau=1 all real: \
             {all_real}; parity violations {parity}; {:.1}s",
            (observed - p2).abs() / se,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_12() -> Outcome {
    let (p256, _) = exact_checkpoint(256);
    let (p512, _) = exact_checkpoint(512);
    let rel = rel_diff(&p256, &p512).to_f64();
    outcome(
        rel < 1e-15,
        format!("relative change 256 -> 512 bits {rel:.3e}"),
    )
}

fn main() -> ExitCode {
    let mut report = Report::default();
    report.record(1, criterion_1());
    report.record(2, criterion_2());
    report.record(3, criterion_3());
    let points = grid();
    report.record(
        4,
        grid_outcome(&points, "normalized within 2^-232", |p| p.normalized),
    );
    report.record(
        5,
        grid_outcome(&points, "eigenvalues in (0,1) and zeros negative", |p| {
            p.lambdas_in_unit && p.zeros_negative
        }),
    );
    report.record(6, grid_outcome(&points, "log-concave", |p| p.log_concave));
    report.record(7, criterion_7());
    report.record(8, criterion_8());
    report.record(9, criterion_9());
    report.record(10, criterion_10());
    report.record(11, criterion_11());
    report.record(12, criterion_12());
    report.finish()
}
