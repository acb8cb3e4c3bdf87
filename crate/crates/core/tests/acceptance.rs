// End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use robust_gibbs::abc::{abc_rejection, AbcConfig};
use robust_gibbs::diagnostics::{ks_one_sample, ks_two_sample, summarize, ParamSummary};
use robust_gibbs::distributions::{Family, FamilyKind, Interval};
use robust_gibbs::order_stats::{joint_orderstat_logdensity, mad, median, OrderStatSpec};
use robust_gibbs::posterior_updates::{nig_approx_medmad, nig_posterior_given_x, NigParams, Prior};
use robust_gibbs::sampler::{run_chain, GibbsConfig, RobustConstraint};
use robust_gibbs::validate::{run_suite, Suite, SuiteOptions};

fn report(criterion: u32, passed: bool, detail: &str) {
    use std::io::Write;
    // straight to the stream so the line shows without --nocapture
    let line = format!(
        "criterion {criterion}: {} {detail}\n",
        if passed { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(passed, "criterion {criterion}: {detail}");
}

#[test]
fn criterion_1_constraint_preservation() {
    let start = Instant::now();
    let opts = SuiteOptions {
        iterations: 10_000,
        ..Default::default()
    };
    let mut failed = Vec::new();
    let mut runs = 0;
    for suite in [
        Suite::QuantileInvariants,
        Suite::MedIqrInvariants,
        Suite::MedMadInvariants,
    ] {
        let rep = run_suite(suite, &opts).unwrap();
        runs += rep.checks.len();
        failed.extend(
            rep.checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("{}: {}", c.name, c.detail)),
        );
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        failed.is_empty() && secs < 120.0,
        &format!("{runs} runs, failures {failed:?}, {secs:.1}s"),
    );
}

#[test]
fn criterion_2_gaussian_matches_nig_approximation() {
    let start = Instant::now();
    let prior = NigParams::new(0.0, 0.001, 0.001, 0.001).unwrap();
    let approx = nig_approx_medmad(-2.0, 3.0, 1000, &prior).unwrap();
    let c = RobustConstraint::med_mad(1000, -2.0, 3.0).unwrap();
    let cfg = GibbsConfig {
        iterations: 25_000,
        burn_in: Some(5000),
        seed: 2,
        ..Default::default()
    };
    let out = run_chain(FamilyKind::Gaussian, &c, &Prior::Nig(prior), &cfg).unwrap();
    assert_eq!(out.draws.len(), 20_000);
    let mu = out.column(0);
    let s2 = out.column(1);
    let mu_mean = summarize(&mu).unwrap().mean;
    let s2_mean = summarize(&s2).unwrap().mean;
    let ks_mu = ks_one_sample(&mu, |x| approx.mu_marginal_cdf(x));
    let ks_s2 = ks_one_sample(&s2, |x| approx.sigma2_marginal_cdf(x));
    let rel = (s2_mean / approx.sigma2_mean() - 1.0).abs();
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        (mu_mean - approx.mu0).abs() < 0.05
            && rel < 0.05
            && ks_mu < 0.05
            && ks_s2 < 0.05
            && secs < 300.0,
        &format!(
            "mu mean {mu_mean:.4} vs {:.4}, sigma2 mean {s2_mean:.3} vs {:.3}, \
             KS mu {ks_mu:.4}, KS sigma2 {ks_s2:.4}, {secs:.1}s",
            approx.mu0,
            approx.sigma2_mean()
        ),
    );
}

#[test]
fn criterion_3_small_sample_oracle() {
    // With a flat prior on mu and known unit variance, X = mu + Z and the
    // posterior of mu given (median, MAD) is the law of m - med(Z) given
    // MAD(Z) = s. Rejection on |MAD(Z) - s| < eps gives the oracle.
    let (m, s, eps) = (0.0, 0.7, 0.005);
    let sims = 10_000_000u64;
    let oracle: Vec<f64> = (0..sims / 10_000)
        .into_par_iter()
        .flat_map_iter(|chunk| {
            let mut r = ChaCha8Rng::seed_from_u64(3);
            r.set_stream(chunk);
            let mut z = [0.0; 5];
            (0..10_000)
                .filter_map(|_| {
                    for v in z.iter_mut() {
                        *v = r.sample(StandardNormal);
                    }
                    ((mad(&z).unwrap() - s).abs() < eps).then(|| m - median(&z).unwrap())
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let c = RobustConstraint::med_mad(5, m, s).unwrap();
    let cfg = GibbsConfig {
        iterations: 110_000,
        burn_in: Some(10_000),
        seed: 3,
        ..Default::default()
    };
    let out = run_chain(
        FamilyKind::Gaussian,
        &c,
        &Prior::GaussianKnownVariance { sigma2: 1.0 },
        &cfg,
    )
    .unwrap();
    let chain = out.column(0);
    let ks = ks_two_sample(&chain, &oracle);
    report(
        3,
        ks < 0.05,
        &format!("KS {ks:.4}, {} oracle draws", oracle.len()),
    );
}

#[test]
fn criterion_4_reachability() {
    let start = Instant::now();
    let rep = run_suite(Suite::Reachability, &SuiteOptions::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let failed: Vec<_> = rep.checks.iter().filter(|c| !c.passed).collect();
    report(
        4,
        rep.passed && secs < 60.0,
        &format!(
            "{} starts checked, failures {failed:?}, {secs:.1}s",
            rep.checks.len()
        ),
    );
}

#[test]
fn criterion_5_cauchy_more_peaked_than_abc() {
    let start = Instant::now();
    let (x0, gamma, n) = (-2.0, 3.0, 1000);
    // observed summaries at their population values
    let c = RobustConstraint::med_mad(n, x0, gamma).unwrap();
    let prior = Prior::default_for(FamilyKind::Cauchy);
    let cfg = GibbsConfig {
        iterations: 6000,
        burn_in: Some(1000),
        seed: 5,
        ..Default::default()
    };
    let chain = run_chain(FamilyKind::Cauchy, &c, &prior, &cfg).unwrap();
    let kept = chain.draws.len();
    // ABC gets ten times as many simulations and keeps as many draws
    let abc = abc_rejection(
        FamilyKind::Cauchy,
        &c,
        &prior,
        &AbcConfig {
            n_sims: 10 * cfg.iterations,
            keep: kept,
            seed: 5,
            time_limit_secs: None,
        },
    )
    .unwrap();
    let g: Vec<ParamSummary> = (0..2)
        .map(|k| summarize(&chain.column(k)).unwrap())
        .collect();
    let a: Vec<ParamSummary> = (0..2).map(|k| summarize(&abc.column(k)).unwrap()).collect();
    let secs = start.elapsed().as_secs_f64();
    report(
        5,
        g[0].sd < a[0].sd
            && g[1].sd < a[1].sd
            && (g[0].q50 - x0).abs() < 0.3
            && (g[1].q50 - gamma).abs() < 0.3
            && secs < 600.0,
        &format!(
            "Gibbs sd ({:.3}, {:.3}) medians ({:.3}, {:.3}); ABC sd ({:.3}, {:.3}); {secs:.1}s",
            g[0].sd, g[1].sd, g[0].q50, g[1].q50, a[0].sd, a[1].sd
        ),
    );
}

fn weibull_run(m: usize) -> Vec<ParamSummary> {
    let truth = Family::weibull3(10.0, 2.0, 3.0).unwrap();
    let pairs: Vec<(f64, f64)> = (1..=m)
        .map(|j| {
            let p = j as f64 / (m + 1) as f64;
            (p, truth.quantile(p).unwrap())
        })
        .collect();
    let c = RobustConstraint::quantiles(1000, &pairs).unwrap();
    let cfg = GibbsConfig {
        iterations: 20_000,
        burn_in: Some(5000),
        seed: 6,
        ..Default::default()
    };
    let out = run_chain(
        FamilyKind::Weibull3,
        &c,
        &Prior::default_for(FamilyKind::Weibull3),
        &cfg,
    )
    .unwrap();
    (0..3).map(|k| summarize(&out.column(k)).unwrap()).collect()
}

#[test]
fn criterion_6_weibull_needs_three_quantiles() {
    let start = Instant::now();
    let truth = [10.0, 2.0, 3.0];
    let runs: Vec<Vec<ParamSummary>> = [2, 3, 9].into_par_iter().map(weibull_run).collect();
    let (m2, m3, m9) = (&runs[0], &runs[1], &runs[2]);
    let covers =
        |s: &[ParamSummary]| (0..3).all(|k| s[k].q025 <= truth[k] && truth[k] <= s[k].q975);
    let width = |s: &ParamSummary| s.q975 - s.q025;
    let shrinking = (0..3).filter(|&k| width(&m9[k]) < width(&m3[k])).count();
    let spread = (0..3).any(|k| m2[k].sd > 5.0 * m9[k].sd);
    let secs = start.elapsed().as_secs_f64();
    let fmt = |s: &[ParamSummary]| {
        s.iter()
            .map(|p| format!("[{:.2}, {:.2}]", p.q025, p.q975))
            .collect::<Vec<_>>()
            .join(" ")
    };
    report(
        6,
        covers(m3) && covers(m9) && shrinking >= 2 && spread && secs < 900.0,
        &format!(
            "M=3 {} M=9 {} shrinking {shrinking}/3, M=2 sd {:.2?} vs M=9 sd {:.2?}; {secs:.1}s",
            fmt(m3),
            fmt(m9),
            m2.iter().map(|p| p.sd).collect::<Vec<_>>(),
            m9.iter().map(|p| p.sd).collect::<Vec<_>>()
        ),
    );
}

/// Integral of `f` over `lo < v_1 < ... < v_k < hi` by nested Simpson rules.
fn ordered_integral(f: &dyn Fn(&[f64]) -> f64, k: usize, lo: f64, hi: f64, n: usize) -> f64 {
    fn rec(
        f: &dyn Fn(&[f64]) -> f64,
        v: &mut Vec<f64>,
        k: usize,
        lo: f64,
        hi: f64,
        n: usize,
    ) -> f64 {
        if v.len() == k {
            return f(v);
        }
        let a = v.last().copied().unwrap_or(lo);
        if a >= hi {
            return 0.0;
        }
        let h = (hi - a) / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            // the density vanishes on ties, so take the left endpoint as a limit
            v.push(a + (i as f64).max(1e-9) * h);
            s += w * rec(f, v, k, lo, hi, n);
            v.pop();
        }
        s * h / 3.0
    }
    rec(f, &mut Vec::with_capacity(k), k, lo, hi, n)
}

fn nig_ln_pdf(p: &NigParams, mu: f64, s2: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let normal = -0.5 * (2.0 * std::f64::consts::PI * s2 / p.nu).ln()
        - p.nu * (mu - p.mu0).powi(2) / (2.0 * s2);
    let ig = p.alpha * p.beta.ln() - ln_gamma(p.alpha) - (p.alpha + 1.0) * s2.ln() - p.beta / s2;
    normal + ig
}

#[test]
fn criterion_7_densities_and_samplers() {
    let mut notes = Vec::new();
    let mut ok = true;

    // order-statistic densities for N <= 3
    let g = Family::gaussian(0.3, 1.7).unwrap();
    let mut worst = 0.0f64;
    for n in 1..=3usize {
        for mask in 1u32..(1 << n) {
            let idx: Vec<usize> = (1..=n).filter(|i| mask & (1 << (i - 1)) != 0).collect();
            let spec = OrderStatSpec::new(n, idx.clone()).unwrap();
            let dens = |v: &[f64]| joint_orderstat_logdensity(&g, &spec, v).unwrap().exp();
            let total = ordered_integral(&dens, idx.len(), -12.0, 12.0, 200);
            worst = worst.max((total - 1.0).abs());
        }
    }
    ok &= worst < 1e-3;
    notes.push(format!("density integral error {worst:.2e}"));

    // truncated samplers
    let fams = [
        Family::gaussian(0.0, 1.0).unwrap(),
        Family::cauchy(0.0, 1.0).unwrap(),
        Family::weibull3(0.0, 1.0, 2.0).unwrap(),
    ];
    let ivs = [
        Interval::new(0.2, 0.9).unwrap(),
        Interval::new(-1.0, 3.0).unwrap(),
        Interval::above(2.5),
        Interval::below(0.5),
    ];
    let mut r = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for f in &fams {
        for iv in &ivs {
            if f.mass(iv) == 0.0 {
                continue;
            }
            let draws: Vec<f64> = (0..100_000)
                .map(|_| f.sample_truncated(iv, &mut r).unwrap())
                .collect();
            // both tails in the same direction to avoid cancellation
            let cdf = |x: f64| {
                if iv.lo.is_finite() && f.sf(iv.lo) < 0.5 {
                    (f.sf(iv.lo) - f.sf(x)) / (f.sf(iv.lo) - f.sf(iv.hi))
                } else {
                    (f.cdf(x) - f.cdf(iv.lo)) / (f.cdf(iv.hi) - f.cdf(iv.lo))
                }
            };
            worst = worst.max(ks_one_sample(&draws, cdf));
        }
    }
    ok &= worst < 0.01;
    notes.push(format!("truncated KS max {worst:.4}"));

    // conjugate update against prior x likelihood on a grid
    let prior = NigParams::new(0.5, 2.0, 3.0, 2.0).unwrap();
    let x = [0.3, -1.2, 2.2, 0.9, 1.4, -0.4, 0.1];
    let post = nig_posterior_given_x(&x, &prior).unwrap();
    let (n_mu, n_s2) = (400, 400);
    let (mu_lo, mu_hi, s2_lo, s2_hi) = (-2.0, 3.0, 0.05, 6.0);
    let mut p = Vec::with_capacity(n_mu * n_s2);
    let mut q = Vec::with_capacity(n_mu * n_s2);
    for i in 0..n_mu {
        let mu = mu_lo + (i as f64 + 0.5) * (mu_hi - mu_lo) / n_mu as f64;
        for j in 0..n_s2 {
            let s2 = s2_lo + (j as f64 + 0.5) * (s2_hi - s2_lo) / n_s2 as f64;
            let lik: f64 = x
                .iter()
                .map(|v| {
                    -0.5 * (2.0 * std::f64::consts::PI * s2).ln() - (v - mu).powi(2) / (2.0 * s2)
                })
                .sum();
            p.push(nig_ln_pdf(&prior, mu, s2) + lik);
            q.push(nig_ln_pdf(&post, mu, s2));
        }
    }
    let normalise = |v: &mut Vec<f64>| {
        let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        v.iter_mut().for_each(|e| *e = (*e - mx).exp());
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|e| *e /= s);
    };
    normalise(&mut p);
    normalise(&mut q);
    let tv = 0.5 * p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>();
    ok &= tv < 1e-3;
    notes.push(format!("NIG grid TV {tv:.2e}"));

    report(7, ok, &notes.join(", "));
}
