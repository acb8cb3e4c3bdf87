//! The median/MAD latent kernel against an importance-sampling oracle for
//! Gaussian data.
//!
//! If Z is an iid N(0,1) sample and U = (Z - med Z) / MAD Z, then X = m + s U
//! has median m and MAD s. Weighting X by prod phi(X_i) * V(U)^((N-1)/2),
//! with V the centred sum of squares of U, gives the conditional law of an
//! iid N(0,1) sample given (median, MAD) = (m, s): the weight undoes the
//! density of the affine standardisation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_gibbs::distributions::Family;
use robust_gibbs::med_iqr_conditional::InitMode;
use robust_gibbs::med_mad_conditional::{KernelMode, MedMadConstraints, MedMadEngine};
use robust_gibbs::order_stats::{mad, median};

const M: f64 = 0.3;
const S: f64 = 0.8;

/// Means of the order statistics, then the mean count above `m + s`.
fn moments(x: &mut [f64]) -> Vec<f64> {
    x.sort_by(f64::total_cmp);
    let mut out = x.to_vec();
    out.push(x.iter().filter(|&&a| a > M + S * (1.0 + 1e-9)).count() as f64);
    out
}

fn oracle(n: usize, draws: usize) -> Vec<f64> {
    let f = Family::gaussian(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut acc = vec![0.0; n + 1];
    let mut wsum = 0.0;
    let mut z = vec![0.0; n];
    for _ in 0..draws {
        z.iter_mut().for_each(|v| *v = f.sample(&mut rng));
        let (mz, sz) = (median(&z).unwrap(), mad(&z).unwrap());
        let u: Vec<f64> = z.iter().map(|v| (v - mz) / sz).collect();
        let ubar = u.iter().sum::<f64>() / n as f64;
        let v: f64 = u.iter().map(|a| (a - ubar).powi(2)).sum();
        let mut x: Vec<f64> = u.iter().map(|a| M + S * a).collect();
        let lw = -0.5 * x.iter().map(|a| a * a).sum::<f64>() + 0.5 * (n as f64 - 1.0) * v.ln();
        let w = lw.exp();
        for (a, m) in acc.iter_mut().zip(moments(&mut x)) {
            *a += w * m;
        }
        wsum += w;
    }
    acc.iter().map(|a| a / wsum).collect()
}

fn kernel(n: usize, sweeps: usize, mode: KernelMode) -> Vec<f64> {
    let f = Family::gaussian(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = MedMadConstraints::new(n, M, S).unwrap();
    let mut e = MedMadEngine::new(c, &f, &mut rng, InitMode::Linear, None)
        .unwrap()
        .with_mode(mode);
    let burn = 1000;
    let mut acc = vec![0.0; n + 1];
    for t in 0..sweeps + burn {
        e.update(&f, &mut rng).unwrap();
        if t >= burn {
            let mut x = e.values().to_vec();
            for (a, m) in acc.iter_mut().zip(moments(&mut x)) {
                *a += m;
            }
        }
    }
    acc.iter().map(|a| a / sweeps as f64).collect()
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn exact_kernel_matches_oracle() {
    for n in [5usize, 8, 9, 10] {
        let o = oracle(n, 1_500_000);
        let k = kernel(n, 150_000, KernelMode::Exact);
        let gap = max_gap(&o, &k);
        assert!(
            gap < 0.015,
            "N={n}: max gap {gap:.4}\noracle {o:.3?}\nkernel {k:.3?}"
        );
    }
}

#[test]
fn literal_kernel_is_detectably_off() {
    let o = oracle(9, 1_500_000);
    let k = kernel(9, 150_000, KernelMode::Literal);
    let gap = max_gap(&o, &k);
    assert!(gap > 0.03, "literal kernel unexpectedly close: {gap:.4}");
}
