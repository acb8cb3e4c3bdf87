//! Cauchy parameters given three deterministic quartiles of N = 21 points.
//!
//! Here the likelihood of the statistics is the joint density of three order
//! statistics, so the posterior of (x0, gamma) can be tabulated on a grid.

use std::f64::consts::PI;

use robust_gibbs::diagnostics::ks_one_sample;
use robust_gibbs::distributions::FamilyKind;
use robust_gibbs::posterior_updates::{CauchyPriors, Prior};
use robust_gibbs::sampler::{run_chain, GibbsConfig, RobustConstraint};

const N: usize = 21;
// with N = 21 the quartiles are X_(6), X_(11), X_(16)
const IDX: [usize; 3] = [6, 11, 16];
const Q: [f64; 3] = [-1.0, 0.2, 1.5];

fn ln_post(x0: f64, g: f64) -> f64 {
    let cdf = |x: f64| 0.5 + ((x - x0) / g).atan() / PI;
    let ln_pdf = |x: f64| -(PI * g * (1.0 + ((x - x0) / g).powi(2))).ln();
    let mut lp = -(1.0 + (x0 / 10.0).powi(2)).ln() - 0.01 * g;
    let mut prev = (0usize, 0.0);
    for (&i, &q) in IDX.iter().zip(&Q) {
        lp += ln_pdf(q) + (i - prev.0 - 1) as f64 * (cdf(q) - prev.1).ln();
        prev = (i, cdf(q));
    }
    lp + (N - prev.0) as f64 * (1.0 - prev.1).ln()
}

/// Marginal CDFs of x0 and gamma tabulated on a grid.
struct Grid {
    x0: Vec<f64>,
    g: Vec<f64>,
    cdf_x0: Vec<f64>,
    cdf_g: Vec<f64>,
}

impl Grid {
    fn new() -> Self {
        let k = 600;
        let x0: Vec<f64> = (0..k)
            .map(|a| -4.0 + 8.0 * (a as f64 + 0.5) / k as f64)
            .collect();
        let g: Vec<f64> = (0..k).map(|b| 6.0 * (b as f64 + 0.5) / k as f64).collect();
        let lps: Vec<Vec<f64>> = x0
            .iter()
            .map(|&a| g.iter().map(|&b| ln_post(a, b)).collect())
            .collect();
        let top = lps
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<Vec<f64>> = lps
            .iter()
            .map(|r| r.iter().map(|l| (l - top).exp()).collect())
            .collect();
        let total: f64 = w.iter().flatten().sum();
        let cum = |v: Vec<f64>| {
            v.iter()
                .scan(0.0, |acc, x| {
                    *acc += x / total;
                    Some(*acc)
                })
                .collect::<Vec<_>>()
        };
        let cdf_x0 = cum(w.iter().map(|r| r.iter().sum()).collect());
        let cdf_g = cum((0..k).map(|b| w.iter().map(|r| r[b]).sum()).collect());
        Grid {
            x0,
            g,
            cdf_x0,
            cdf_g,
        }
    }
}

fn interp(xs: &[f64], cdf: &[f64], x: f64) -> f64 {
    let h = xs[1] - xs[0];
    let t = (x - xs[0]) / h + 0.5;
    if t <= 0.0 {
        return 0.0;
    }
    let i = t.floor() as usize;
    if i >= cdf.len() {
        return 1.0;
    }
    let lo = if i == 0 { 0.0 } else { cdf[i - 1] };
    lo + (t - i as f64) * (cdf[i] - lo)
}

fn check(collapsed_steps: usize, iterations: usize) -> (f64, f64) {
    let grid = Grid::new();
    // the tabulated mass must sit well inside the grid
    assert!(grid.cdf_g[grid.cdf_g.len() - 1] > 0.999 && grid.cdf_x0[0] < 1e-4);
    let c = RobustConstraint::quantiles(N, &[(0.25, Q[0]), (0.5, Q[1]), (0.75, Q[2])]).unwrap();
    let cfg = GibbsConfig {
        iterations,
        burn_in: Some(5000),
        seed: 17,
        collapsed_steps,
        ..Default::default()
    };
    let out = run_chain(
        FamilyKind::Cauchy,
        &c,
        &Prior::Cauchy(CauchyPriors::default()),
        &cfg,
    )
    .unwrap();
    let d_x0 = ks_one_sample(&out.column(0), |x| interp(&grid.x0, &grid.cdf_x0, x));
    let d_g = ks_one_sample(&out.column(1), |x| interp(&grid.g, &grid.cdf_g, x));
    (d_x0, d_g)
}

#[test]
fn collapsed_sampler_matches_grid_posterior() {
    let (a, b) = check(50, 45_000);
    assert!(a < 0.02 && b < 0.02, "KS x0 {a:.4}, gamma {b:.4}");
}

#[test]
fn plain_two_block_sampler_matches_grid_posterior() {
    let (a, b) = check(0, 105_000);
    assert!(a < 0.02 && b < 0.02, "KS x0 {a:.4}, gamma {b:.4}");
}
