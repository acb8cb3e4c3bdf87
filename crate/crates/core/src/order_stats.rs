//! Empirical quantiles, robust summaries and order-statistic densities.

use statrs::function::gamma::ln_gamma;

use crate::distributions::{Family, Interval};
use crate::error::{Error, Result};

/// Integer snapping tolerance for `h = (N-1)p + 1`, so that levels such as
/// `p = j/(M+1)` that should land on an order statistic are not treated as
/// interpolations with a vanishing weight.
const INDEX_SNAP: f64 = 1e-9;

/// Position of the empirical `p`-quantile among the order statistics of a
/// sample of size `N`: `Q = (1-g) X_(i) + g X_(i+1)` with `h = (N-1)p + 1`,
/// `i = floor(h)` and `g = h - i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantileIndex {
    pub p: f64,
    pub h: f64,
    /// 1-based order-statistic index.
    pub i: usize,
    pub g: f64,
}

impl QuantileIndex {
    /// The quantile equals a single order statistic.
    pub fn is_deterministic(&self) -> bool {
        self.g == 0.0
    }
}

pub fn quantile_index(p: f64, n: usize) -> QuantileIndex {
    let mut h = (n as f64 - 1.0) * p + 1.0;
    let r = h.round();
    if (h - r).abs() < INDEX_SNAP {
        h = r;
    }
    let i = h.floor();
    QuantileIndex {
        p,
        h,
        i: i as usize,
        g: h - i,
    }
}

/// Empirical quantile of an already sorted sample.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Domain(
            "empirical quantile of an empty sample".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("quantile level {p} not in [0, 1]")));
    }
    let idx = quantile_index(p, sorted.len());
    let lo = sorted[idx.i - 1];
    if idx.g == 0.0 {
        Ok(lo)
    } else {
        Ok((1.0 - idx.g) * lo + idx.g * sorted[idx.i])
    }
}

/// Linear-interpolation empirical quantile (the default estimator of R's
/// `quantile()` and `numpy.quantile`).
pub fn empirical_quantile(x: &[f64], p: f64) -> Result<f64> {
    quantile_sorted(&sorted_copy(x), p)
}

pub fn sorted_copy(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(x: &[f64]) -> Result<f64> {
    empirical_quantile(x, 0.5)
}

/// Median absolute deviation around the median (unscaled).
pub fn mad(x: &[f64]) -> Result<f64> {
    let m = median(x)?;
    let dev: Vec<f64> = x.iter().map(|v| (v - m).abs()).collect();
    median(&dev)
}

/// Interquartile range `Q(X, 0.75) - Q(X, 0.25)`.
pub fn iqr(x: &[f64]) -> Result<f64> {
    let s = sorted_copy(x);
    Ok(quantile_sorted(&s, 0.75)? - quantile_sorted(&s, 0.25)?)
}

/// A set of order-statistic indices `i_1 < ... < i_M` of a sample of size `N`
/// together with the normalising constant of their joint density.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderStatSpec {
    n: usize,
    indices: Vec<usize>,
    gaps: Vec<usize>,
    ln_const: f64,
}

impl OrderStatSpec {
    pub fn new(n: usize, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() || n == 0 {
            return Err(Error::Domain(
                "order-statistic spec needs N >= 1 and indices".into(),
            ));
        }
        if indices[0] < 1 || *indices.last().unwrap() > n {
            return Err(Error::Domain(format!(
                "indices {indices:?} outside 1..={n}"
            )));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(format!(
                "indices {indices:?} not strictly increasing"
            )));
        }
        let mut gaps = Vec::with_capacity(indices.len() + 1);
        let mut prev = 0;
        for &i in indices.iter().chain(std::iter::once(&(n + 1))) {
            gaps.push(i - prev - 1);
            prev = i;
        }
        let ln_const = ln_factorial(n) - gaps.iter().map(|&g| ln_factorial(g)).sum::<f64>();
        Ok(OrderStatSpec {
            n,
            indices,
            gaps,
            ln_const,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Number of sample points strictly between consecutive order statistics,
    /// including the two unbounded end zones (length `M + 1`).
    pub fn gaps(&self) -> &[usize] {
        &self.gaps
    }
}

pub(crate) fn ln_factorial(k: usize) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

/// Log joint density of the order statistics `spec.indices()` evaluated at
/// `values`. Returns `-inf` when `values` is not strictly increasing or a
/// density factor vanishes.
pub fn joint_orderstat_logdensity(
    family: &Family,
    spec: &OrderStatSpec,
    values: &[f64],
) -> Result<f64> {
    if values.len() != spec.indices.len() {
        return Err(Error::Domain(format!(
            "{} values for {} order statistics",
            values.len(),
            spec.indices.len()
        )));
    }
    Ok(joint_logdensity_unchecked(family, spec, values))
}

pub(crate) fn joint_logdensity_unchecked(
    family: &Family,
    spec: &OrderStatSpec,
    values: &[f64],
) -> f64 {
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        return f64::NEG_INFINITY;
    }
    let mut total = spec.ln_const;
    for &v in values {
        total += family.ln_pdf(v);
        if total == f64::NEG_INFINITY {
            return total;
        }
    }
    let mut lo = f64::NEG_INFINITY;
    for (k, &gap) in spec.gaps.iter().enumerate() {
        let hi = values.get(k).copied().unwrap_or(f64::INFINITY);
        if gap > 0 {
            total += gap as f64 * family.ln_mass(&Interval::raw(lo, hi));
        }
        lo = hi;
    }
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}

/// Large-sample variance approximation of the `i`-th order statistic,
/// `p(1-p) / ((N+2) f(Q(p))^2)` with `p = i/(N-1)` clamped to
/// `[1/(N+1), N/(N+1)]`. Finite even where the exact variance is not.
pub fn orderstat_variance_approx(family: &Family, i: usize, n: usize) -> Result<f64> {
    if i < 1 || i > n {
        return Err(Error::Domain(format!(
            "order-statistic index {i} outside 1..={n}"
        )));
    }
    let nf = n as f64;
    let raw = if n > 1 { i as f64 / (nf - 1.0) } else { 0.5 };
    let p = raw.clamp(1.0 / (nf + 1.0), nf / (nf + 1.0));
    let dens = family.pdf(family.quantile(p)?);
    if !(dens > 0.0) || !dens.is_finite() {
        return Err(Error::Domain(format!(
            "degenerate proposal scale: density {dens} at the {p}-quantile"
        )));
    }
    Ok(p * (1.0 - p) / ((nf + 2.0) * dens * dens))
}
