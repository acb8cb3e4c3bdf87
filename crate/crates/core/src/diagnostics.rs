//! Chain diagnostics and summary statistics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::order_stats::quantile_sorted;

/// Effective sample size from the autocorrelation sum, truncated at the
/// first non-positive pair of consecutive autocorrelations. Clamped to
/// `[1, n]`; a constant chain has ESS 1.
pub fn effective_sample_size(draws: &[f64]) -> Result<f64> {
    let n = draws.len();
    if n < 100 {
        return Err(Error::Diagnostics(format!(
            "ESS needs at least 100 draws, got {n}"
        )));
    }
    let mean = draws.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = draws.iter().map(|v| v - mean).collect();
    let c0 = centred.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(c0 > 0.0) {
        return Ok(1.0);
    }
    let acf = |lag: usize| -> f64 {
        centred[..n - lag]
            .iter()
            .zip(&centred[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / (n as f64 * c0)
    };
    let mut sum = 0.0;
    let mut lag = 1;
    while lag + 1 < n {
        let pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    let tau = 1.0 + 2.0 * sum;
    Ok((n as f64 / tau).clamp(1.0, n as f64))
}

/// Posterior summary of one parameter.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamSummary {
    pub mean: f64,
    pub sd: f64,
    #[serde(rename = "q2.5")]
    pub q025: f64,
    #[serde(rename = "q50")]
    pub q50: f64,
    #[serde(rename = "q97.5")]
    pub q975: f64,
    pub ess: Option<f64>,
}

pub fn summarize(draws: &[f64]) -> Result<ParamSummary> {
    if draws.is_empty() {
        return Err(Error::Diagnostics("no draws to summarise".into()));
    }
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = if draws.len() > 1 {
        draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let mut s = draws.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(ParamSummary {
        mean,
        sd: var.sqrt(),
        q025: quantile_sorted(&s, 0.025)?,
        q50: quantile_sorted(&s, 0.5)?,
        q975: quantile_sorted(&s, 0.975)?,
        ess: effective_sample_size(draws).ok(),
    })
}

/// Column `k` of a list of parameter vectors.
pub fn column(draws: &[Vec<f64>], k: usize) -> Vec<f64> {
    draws.iter().map(|d| d[k]).collect()
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0f64, |d, (k, &x)| {
        let f = cdf(x);
        d.max((f - k as f64 / n).abs())
            .max(((k + 1) as f64 / n - f).abs())
    })
}

/// Two-sample KS statistic where the second sample carries weights.
pub fn ks_weighted(a: &[f64], b: &[(f64, f64)]) -> f64 {
    let mut a = a.to_vec();
    a.sort_by(f64::total_cmp);
    let mut b = b.to_vec();
    b.sort_by(|x, y| x.0.total_cmp(&y.0));
    let wb: f64 = b.iter().map(|p| p.1).sum();
    let na = a.len() as f64;
    let (mut i, mut j, mut cb, mut d) = (0, 0, 0.0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j].0);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j].0 <= x {
            cb += b[j].1;
            j += 1;
        }
        d = d.max((i as f64 / na - cb / wb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn ess_white_noise() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..10_000).map(|_| r.sample(StandardNormal)).collect();
        let ess = effective_sample_size(&x).unwrap();
        assert!((ess / 10_000.0 - 1.0).abs() < 0.1, "{ess}");
    }

    #[test]
    fn ess_bounds() {
        assert_eq!(effective_sample_size(&vec![2.0; 500]).unwrap(), 1.0);
        let ramp: Vec<f64> = (0..1000).map(|k| k as f64).collect();
        assert!(effective_sample_size(&ramp).unwrap() < 5.0);
        assert!(effective_sample_size(&[1.0; 50]).is_err());
        // strongly anti-correlated chains cannot exceed n
        let alt: Vec<f64> = (0..1000)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        assert!(effective_sample_size(&alt).unwrap() <= 1000.0);
    }

    #[test]
    fn ks_statistics() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        let u: Vec<f64> = (0..100).map(|k| (k as f64 + 0.5) / 100.0).collect();
        assert!(ks_one_sample(&u, |x| x) <= 0.005 + 1e-12);
        let w: Vec<(f64, f64)> = u.iter().map(|&x| (x, 2.0)).collect();
        assert_eq!(ks_weighted(&u, &w), 0.0);
    }

    #[test]
    fn summary_quantiles() {
        let x: Vec<f64> = (0..=100).map(f64::from).collect();
        let s = summarize(&x).unwrap();
        assert_eq!((s.mean, s.q50, s.q025, s.q975), (50.0, 50.0, 2.5, 97.5));
    }
}
