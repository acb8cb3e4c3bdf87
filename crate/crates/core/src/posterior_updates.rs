//! Parameter block of the Gibbs sampler: `theta | X`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, InverseGamma, StudentsT};

use crate::distributions::{norm_ppf, Family, FamilyKind, FamilyParams};
use crate::error::{Error, Result};
use crate::layout::RwTuning;

/// Normal-Inverse-Gamma parameters: `sigma2 ~ IG(alpha, beta)` and
/// `mu | sigma2 ~ N(mu0, sigma2 / nu)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NigParams {
    pub mu0: f64,
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl NigParams {
    pub fn new(mu0: f64, nu: f64, alpha: f64, beta: f64) -> Result<Self> {
        let p = NigParams {
            mu0,
            nu,
            alpha,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu0.is_finite()
            || [self.nu, self.alpha, self.beta]
                .iter()
                .any(|v| !(*v > 0.0) || !v.is_finite())
        {
            return Err(Error::ParameterDomain(format!(
                "NIG needs finite mu0 and nu, alpha, beta > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Mean of `sigma2`, finite for `alpha > 1`.
    pub fn sigma2_mean(&self) -> f64 {
        if self.alpha > 1.0 {
            self.beta / (self.alpha - 1.0)
        } else {
            f64::INFINITY
        }
    }

    /// Marginal CDF of `mu`: Student-t with `2 alpha` degrees of freedom,
    /// location `mu0` and scale `sqrt(beta / (alpha nu))`.
    pub fn mu_marginal_cdf(&self, x: f64) -> f64 {
        let scale = (self.beta / (self.alpha * self.nu)).sqrt();
        StudentsT::new(self.mu0, scale, 2.0 * self.alpha)
            .map(|t| t.cdf(x))
            .unwrap_or(f64::NAN)
    }

    /// Marginal CDF of `sigma2`: Inverse-Gamma(alpha, beta).
    pub fn sigma2_marginal_cdf(&self, x: f64) -> f64 {
        InverseGamma::new(self.alpha, self.beta)
            .map(|d| d.cdf(x))
            .unwrap_or(f64::NAN)
    }

    /// Marginal quantiles of `mu` and `sigma2` at probability `p`.
    pub fn marginal_quantiles(&self, p: f64) -> (f64, f64) {
        let scale = (self.beta / (self.alpha * self.nu)).sqrt();
        let mu = StudentsT::new(self.mu0, scale, 2.0 * self.alpha)
            .map(|t| t.inverse_cdf(p))
            .unwrap_or(f64::NAN);
        let s2 = InverseGamma::new(self.alpha, self.beta)
            .map(|d| d.inverse_cdf(p))
            .unwrap_or(f64::NAN);
        (mu, s2)
    }
}

/// Conjugate update of a NIG prior by a fully observed Gaussian sample.
pub fn nig_posterior_given_x(x: &[f64], prior: &NigParams) -> Result<NigParams> {
    if x.is_empty() {
        return Err(Error::Domain("NIG update needs a non-empty sample".into()));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    Ok(nig_update(prior, n, mean, ss))
}

/// `ss` is `N S^2`, the sum of squared deviations.
fn nig_update(prior: &NigParams, n: f64, mean: f64, ss: f64) -> NigParams {
    let NigParams {
        mu0,
        nu,
        alpha,
        beta,
    } = *prior;
    NigParams {
        mu0: (nu * mu0 + n * mean) / (nu + n),
        nu: nu + n,
        alpha: alpha + n / 2.0,
        beta: beta + 0.5 * (ss + n * nu / (nu + n) * (mean - mu0).powi(2)),
    }
}

/// Draws `(mu, sigma2)` from a NIG distribution.
pub fn sample_nig<R: Rng + ?Sized>(p: &NigParams, rng: &mut R) -> (f64, f64) {
    let g = Gamma::new(p.alpha, 1.0 / p.beta).expect("validated NIG parameters");
    let sigma2 = 1.0 / g.sample(rng);
    let z: f64 = rng.sample(StandardNormal);
    (p.mu0 + (sigma2 / p.nu).sqrt() * z, sigma2)
}

/// Asymptotic efficiencies of the median and MAD relative to the mean and
/// standard deviation under a Gaussian model, and the MAD consistency
/// constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EfficiencyConstants {
    pub eff_med: f64,
    pub eff_mad: f64,
    pub c: f64,
}

impl Default for EfficiencyConstants {
    fn default() -> Self {
        EfficiencyConstants {
            eff_med: 2.0 / PI,
            eff_mad: 0.3675,
            c: 1.0 / norm_ppf(0.75),
        }
    }
}

/// Closed-form NIG approximation to the Gaussian posterior given only the
/// median `m` and MAD `s` of `n` points: the sample mean and standard
/// deviation are replaced by `m` and `c s`, and the sample size by the
/// effective sizes `eff_med n` and `eff_mad n`.
pub fn nig_approx_medmad(m: f64, s: f64, n: usize, prior: &NigParams) -> Result<NigParams> {
    if !(s > 0.0) || !m.is_finite() || !s.is_finite() {
        return Err(Error::Domain(format!(
            "need finite m and s > 0, got m={m}, s={s}"
        )));
    }
    prior.validate()?;
    let k = EfficiencyConstants::default();
    let n = n as f64;
    let (n_med, n_mad) = (k.eff_med * n, k.eff_mad * n);
    let NigParams {
        mu0,
        nu,
        alpha,
        beta,
    } = *prior;
    let cs = k.c * s;
    Ok(NigParams {
        mu0: (nu * mu0 + n_med * m) / (nu + n_med),
        nu: nu + n_med,
        alpha: alpha + n_mad / 2.0,
        beta: beta + 0.5 * (n_mad * cs * cs + n_mad * nu / (nu + n_mad) * (m - mu0).powi(2)),
    })
}

/// Cauchy prior on the location and Gamma(shape, rate) prior on the scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CauchyPriors {
    pub loc_center: f64,
    pub loc_scale: f64,
    pub scale_shape: f64,
    pub scale_rate: f64,
}

impl Default for CauchyPriors {
    fn default() -> Self {
        CauchyPriors {
            loc_center: 0.0,
            loc_scale: 10.0,
            scale_shape: 1.0,
            scale_rate: 0.01,
        }
    }
}

/// Flat prior on the location; Gamma(shape, rate) priors on scale and shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeibullPriors {
    pub scale_shape: f64,
    pub scale_rate: f64,
    pub shape_shape: f64,
    pub shape_rate: f64,
}

impl Default for WeibullPriors {
    fn default() -> Self {
        WeibullPriors {
            scale_shape: 1.0,
            scale_rate: 0.01,
            shape_shape: 1.0,
            shape_rate: 0.01,
        }
    }
}

/// Prior on the family parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Prior {
    /// Conjugate Normal-Inverse-Gamma prior on `(mu, sigma2)`.
    Nig(NigParams),
    /// Gaussian with known variance and a flat prior on `mu`.
    GaussianKnownVariance {
        sigma2: f64,
    },
    Cauchy(CauchyPriors),
    Weibull(WeibullPriors),
}

impl Prior {
    /// Weak default prior for a family.
    pub fn default_for(kind: FamilyKind) -> Prior {
        match kind {
            FamilyKind::Gaussian => Prior::Nig(NigParams {
                mu0: 0.0,
                nu: 0.001,
                alpha: 0.001,
                beta: 0.001,
            }),
            FamilyKind::Cauchy => Prior::Cauchy(CauchyPriors::default()),
            FamilyKind::Weibull3 => Prior::Weibull(WeibullPriors::default()),
        }
    }

    pub fn family_kind(&self) -> FamilyKind {
        match self {
            Prior::Nig(_) | Prior::GaussianKnownVariance { .. } => FamilyKind::Gaussian,
            Prior::Cauchy(_) => FamilyKind::Cauchy,
            Prior::Weibull(_) => FamilyKind::Weibull3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "prior {name} must be positive, got {v}"
                )))
            }
        };
        match self {
            Prior::Nig(p) => p.validate().map_err(|e| Error::Config(e.to_string())),
            Prior::GaussianKnownVariance { sigma2 } => pos("sigma2", *sigma2),
            Prior::Cauchy(p) => {
                pos("loc_scale", p.loc_scale)?;
                pos("scale_shape", p.scale_shape)?;
                pos("scale_rate", p.scale_rate)?;
                if p.loc_center.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config("prior loc_center must be finite".into()))
                }
            }
            Prior::Weibull(p) => {
                pos("scale_shape", p.scale_shape)?;
                pos("scale_rate", p.scale_rate)?;
                pos("shape_shape", p.shape_shape)?;
                pos("shape_rate", p.shape_rate)
            }
        }
    }

    /// Draws parameters from a proper prior. Flat components make the prior
    /// improper and give a configuration error.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Family> {
        match self {
            Prior::Nig(p) => {
                let (mu, s2) = sample_nig(p, rng);
                Family::gaussian(mu, s2)
            }
            Prior::Cauchy(p) => {
                let u: f64 = rng.random_range(-0.5..0.5);
                let x0 = p.loc_center + p.loc_scale * (PI * u).tan();
                let g = Gamma::new(p.scale_shape, 1.0 / p.scale_rate)
                    .map_err(|e| Error::Config(e.to_string()))?
                    .sample(rng);
                Family::cauchy(x0, g)
            }
            Prior::GaussianKnownVariance { .. } | Prior::Weibull(_) => Err(Error::Config(
                "the prior has a flat location component and cannot be sampled".into(),
            )),
        }
    }
}

fn ln_gamma_prior(v: f64, shape: f64, rate: f64) -> f64 {
    (shape - 1.0) * v.ln() - rate * v
}

fn log_likelihood(f: &Family, x: &[f64]) -> f64 {
    let mut total = 0.0;
    for &v in x {
        total += f.ln_pdf(v);
        if total == f64::NEG_INFINITY {
            break;
        }
    }
    total
}

/// Log prior density on the random-walk coordinates: the location and the
/// logs of the positive parameters, including the log-Jacobian of those logs.
fn ln_prior_walk(f: &Family, prior: &Prior) -> f64 {
    match (prior, f.params()) {
        (Prior::Cauchy(p), FamilyParams::Cauchy(c)) => {
            let z = (c.x0 - p.loc_center) / p.loc_scale;
            -(z * z).ln_1p() + ln_gamma_prior(c.gamma, p.scale_shape, p.scale_rate) + c.gamma.ln()
        }
        (Prior::Weibull(p), FamilyParams::Weibull3(w)) => {
            ln_gamma_prior(w.gamma, p.scale_shape, p.scale_rate)
                + w.gamma.ln()
                + ln_gamma_prior(w.beta, p.shape_shape, p.shape_rate)
                + w.beta.ln()
        }
        _ => f64::NEG_INFINITY,
    }
}

fn ln_target(f: &Family, x: &[f64], prior: &Prior) -> f64 {
    let lp = ln_prior_walk(f, prior);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    lp + log_likelihood(f, x)
}

/// Base random-walk standard deviations for `(location, ln scale[, ln shape])`
/// at sample size `n`, before adaptive scaling.
fn base_steps(f: &Family, n: usize) -> Vec<f64> {
    let r = 1.0 / (n.max(1) as f64).sqrt();
    match f.params() {
        FamilyParams::Cauchy(c) => vec![2.0 * c.gamma * r, 1.5 * r],
        FamilyParams::Weibull3(w) => vec![w.gamma * r, r, r],
        FamilyParams::Gaussian(g) => vec![g.sigma2.sqrt() * r, r],
    }
}

/// One componentwise Gaussian random-walk Metropolis sweep for the Cauchy
/// `(x0, ln gamma)` or translated Weibull `(x0, ln gamma, ln beta)`
/// parameters. `scales` multiply the proposal variances. Weibull candidates
/// with `x0 >= min(X)` have zero likelihood and are rejected.
pub fn mh_theta_update<R: Rng + ?Sized>(
    family: &Family,
    x: &[f64],
    prior: &Prior,
    rng: &mut R,
    scales: &[f64],
) -> Result<(Family, Vec<bool>)> {
    let kind = family.kind();
    if prior.family_kind() != kind || kind == FamilyKind::Gaussian {
        return Err(Error::Config(format!(
            "random-walk update needs a Cauchy or Weibull family with a matching prior, got {} / {:?}",
            kind.name(),
            prior
        )));
    }
    let dim = kind.param_names().len();
    if scales.len() != dim {
        return Err(Error::Domain(format!(
            "{} scales for {dim} parameters",
            scales.len()
        )));
    }
    let steps = base_steps(family, x.len());
    let mut cur = *family;
    let mut cur_lt = ln_target(&cur, x, prior);
    let min_x = x.iter().copied().fold(f64::INFINITY, f64::min);
    let mut flags = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut walk = cur.theta();
        let z: f64 = rng.sample(StandardNormal);
        let step = steps[k] * scales[k].sqrt() * z;
        if k == 0 {
            walk[0] += step;
        } else {
            walk[k] *= step.exp();
        }
        if kind == FamilyKind::Weibull3 && walk[0] >= min_x {
            flags.push(false);
            continue;
        }
        let cand = match kind.with_params(&walk) {
            Ok(f) => f,
            Err(_) => {
                flags.push(false);
                continue;
            }
        };
        let lt = ln_target(&cand, x, prior);
        let accept = lt > f64::NEG_INFINITY && rng.random::<f64>().ln() < lt - cur_lt;
        if accept {
            cur = cand;
            cur_lt = lt;
        }
        flags.push(accept);
    }
    Ok((cur, flags))
}

fn to_walk(f: &Family) -> Vec<f64> {
    let mut u = f.theta();
    for v in u.iter_mut().skip(1) {
        *v = v.ln();
    }
    u
}

fn from_walk(kind: FamilyKind, u: &[f64]) -> Option<Family> {
    let mut t = u.to_vec();
    for v in t.iter_mut().skip(1) {
        *v = v.exp();
    }
    kind.with_params(&t).ok()
}

/// Random-walk proposal on the walk coordinates whose covariance is learned
/// from the chain while adaptation is on, scaled by `2.38^2 / d` and a
/// Robbins-Monro factor aimed at 0.234 acceptance.
#[derive(Clone, Debug)]
pub struct BlockTuning {
    dim: usize,
    log_scale: f64,
    steps: usize,
    seen: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
    chol: Option<Vec<f64>>,
    accepted: u64,
    proposed: u64,
}

impl BlockTuning {
    const TARGET: f64 = 0.234;
    const MIN_SEEN: usize = 200;

    pub fn new(dim: usize) -> Self {
        BlockTuning {
            dim,
            log_scale: 0.0,
            steps: 0,
            seen: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim * dim],
            chol: None,
            accepted: 0,
            proposed: 0,
        }
    }

    fn propose<R: Rng + ?Sized>(&self, u: &[f64], base: &[f64], rng: &mut R) -> Vec<f64> {
        let d = self.dim;
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let s = self.log_scale.exp();
        match &self.chol {
            Some(l) => {
                let c = s * 2.38 / (d as f64).sqrt();
                (0..d)
                    .map(|i| u[i] + c * (0..=i).map(|j| l[i * d + j] * z[j]).sum::<f64>())
                    .collect()
            }
            None => (0..d).map(|i| u[i] + s * base[i] * z[i]).collect(),
        }
    }

    fn record(&mut self, accepted: bool, u: &[f64], adapt: bool) {
        self.proposed += 1;
        self.accepted += u64::from(accepted);
        if !adapt {
            return;
        }
        self.steps += 1;
        let gain = (self.steps as f64 + 1.0).powf(-0.6);
        self.log_scale = (self.log_scale + gain * (f64::from(u8::from(accepted)) - Self::TARGET))
            .clamp(-12.0, 8.0);
        // Welford update of the running covariance
        let d = self.dim;
        self.seen += 1;
        let k = self.seen as f64;
        let delta: Vec<f64> = (0..d).map(|i| u[i] - self.mean[i]).collect();
        for (m, dl) in self.mean.iter_mut().zip(&delta) {
            *m += dl / k;
        }
        for (row, di) in self.m2.chunks_mut(d).zip(&delta) {
            for ((cell, uj), mj) in row.iter_mut().zip(u).zip(&self.mean) {
                *cell += di * (uj - mj);
            }
        }
        if self.seen >= Self::MIN_SEEN && self.seen.is_multiple_of(50) {
            let cov: Vec<f64> = self.m2.iter().map(|v| v / (k - 1.0)).collect();
            if let Some(l) = cholesky(&cov, d) {
                self.chol = Some(l);
                // the learned covariance replaces the base steps; restart the
                // scale factor around it
                if self.seen == Self::MIN_SEEN {
                    self.log_scale = 0.0;
                }
            }
        }
    }

    pub fn acceptance(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }

    pub fn reset_counts(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
    }
}

/// Lower Cholesky factor of `a + 1e-10 I`, row-major.
fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let v = a[i * d + i] + 1e-10 - s;
                if !(v > 0.0) {
                    return None;
                }
                l[i * d + i] = v.sqrt();
            } else {
                l[i * d + j] = (a[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Block random-walk Metropolis steps on the Cauchy or Weibull parameters
/// against `ln_lik`, a log likelihood in which the latent zone contents are
/// integrated out. `n` sets the initial step sizes.
#[allow(clippy::too_many_arguments)]
pub fn collapsed_theta_update<R: Rng + ?Sized>(
    family: &Family,
    prior: &Prior,
    ln_lik: impl Fn(&Family) -> f64,
    n: usize,
    steps: usize,
    rng: &mut R,
    tuning: &mut BlockTuning,
    adapt: bool,
) -> Result<Family> {
    let kind = family.kind();
    if prior.family_kind() != kind || kind == FamilyKind::Gaussian {
        return Err(Error::Config(format!(
            "collapsed update needs a Cauchy or Weibull family with a matching prior, got {}",
            kind.name()
        )));
    }
    let mut cur = *family;
    let mut u = to_walk(&cur);
    let mut cur_lt = ln_prior_walk(&cur, prior) + ln_lik(&cur);
    for _ in 0..steps {
        let base = base_steps(&cur, n);
        let cand_u = tuning.propose(&u, &base, rng);
        let mut accepted = false;
        if let Some(cand) = from_walk(kind, &cand_u) {
            let lp = ln_prior_walk(&cand, prior);
            if lp > f64::NEG_INFINITY {
                let lt = lp + ln_lik(&cand);
                if lt > f64::NEG_INFINITY && rng.random::<f64>().ln() < lt - cur_lt {
                    cur = cand;
                    cur_lt = lt;
                    u = cand_u;
                    accepted = true;
                }
            }
        }
        tuning.record(accepted, &u, adapt);
    }
    Ok(cur)
}

/// Draws new parameters given a complete latent sample. Gaussian priors are
/// conjugate; Cauchy and Weibull use [`mh_theta_update`] with scales from
/// `tuning`.
pub fn update_theta<R: Rng + ?Sized>(
    family: &Family,
    x: &[f64],
    prior: &Prior,
    rng: &mut R,
    tuning: &mut RwTuning,
    adapt: bool,
) -> Result<Family> {
    match prior {
        Prior::Nig(p) => {
            let post = nig_posterior_given_x(x, p)?;
            let (mu, s2) = sample_nig(&post, rng);
            Family::gaussian(mu, s2)
        }
        Prior::GaussianKnownVariance { sigma2 } => {
            if x.is_empty() {
                return Err(Error::Domain("empty sample".into()));
            }
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            let z: f64 = rng.sample(StandardNormal);
            Family::gaussian(mean + (sigma2 / n).sqrt() * z, *sigma2)
        }
        Prior::Cauchy(_) | Prior::Weibull(_) => {
            let (next, flags) = mh_theta_update(family, x, prior, rng, &tuning.scales())?;
            tuning.record(&flags, adapt);
            Ok(next)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_update() {
        let prior = NigParams::new(0.0, 1.0, 1.0, 1.0).unwrap();
        let post = nig_posterior_given_x(&[0.0, 0.0], &prior).unwrap();
        assert_eq!(post, NigParams::new(0.0, 3.0, 2.0, 1.0).unwrap());
        let prior = NigParams::new(2.5, 4.0, 3.0, 0.7).unwrap();
        let post = nig_posterior_given_x(&[2.5, 2.5, 2.5], &prior).unwrap();
        assert_eq!((post.mu0, post.beta), (2.5, 0.7));
        assert!(nig_posterior_given_x(&[], &prior).is_err());
    }

    #[test]
    fn approx_constants() {
        let k = EfficiencyConstants::default();
        assert!((k.c - 1.482_602_218_505_602).abs() < 1e-9);
        let prior = NigParams::new(0.0, 0.001, 0.001, 0.001).unwrap();
        let a = nig_approx_medmad(-2.0, 3.0, 1000, &prior).unwrap();
        assert!((a.nu - 0.001 - 636.6198).abs() < 1e-3);
        assert!((a.alpha - 0.001 - 367.5 / 2.0).abs() < 1e-9);
        assert!((k.c * 3.0 - 4.4478).abs() < 1e-4);
        let same = nig_approx_medmad(-2.0, 3.0, 0, &prior).unwrap();
        assert_eq!(same, prior);
        let centred = NigParams::new(-2.0, 1.0, 1.0, 1.0).unwrap();
        let b = nig_approx_medmad(-2.0, 3.0, 10, &centred).unwrap();
        let n_mad = 3.675;
        assert!((b.beta - (1.0 + 0.5 * n_mad * (k.c * 3.0).powi(2))).abs() < 1e-12);
        assert!(nig_approx_medmad(0.0, 0.0, 10, &prior).is_err());
    }

    #[test]
    fn nig_moments() {
        let p = NigParams::new(0.0, 1.0, 3.0, 2.0).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let (mut sm, mut ss) = (0.0, 0.0);
        for _ in 0..n {
            let (mu, s2) = sample_nig(&p, &mut r);
            sm += mu;
            ss += s2;
        }
        assert!((ss / n as f64 - 1.0).abs() < 0.02);
        assert!((sm / n as f64).abs() < 0.02);
    }

    #[test]
    fn weibull_location_beyond_data_rejected() {
        let f = Family::weibull3(0.0, 1.0, 2.0).unwrap();
        let x = [0.05, 0.3, 1.0, 2.0];
        let prior = Prior::default_for(FamilyKind::Weibull3);
        let mut r = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let (g, _) = mh_theta_update(&f, &x, &prior, &mut r, &[1e4, 1.0, 1.0]).unwrap();
            let FamilyParams::Weibull3(w) = g.params() else {
                unreachable!()
            };
            assert!(w.x0 < 0.05);
        }
    }

    #[test]
    fn cauchy_full_data_recovers_location() {
        let truth = Family::cauchy(-2.0, 3.0).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..1000).map(|_| truth.sample(&mut r)).collect();
        let prior = Prior::default_for(FamilyKind::Cauchy);
        let mut f = Family::cauchy(0.0, 1.0).unwrap();
        let mut tuning = RwTuning::new(2, 1.0, 0.44);
        let mut draws = Vec::new();
        for t in 0..10_000 {
            f = update_theta(&f, &x, &prior, &mut r, &mut tuning, t < 2000).unwrap();
            if t >= 2000 {
                draws.push(f.theta()[0]);
            }
        }
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd =
            (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / draws.len() as f64).sqrt();
        assert!(
            (mean + 2.0).abs() < 3.0 * sd.max(0.05),
            "mean {mean} sd {sd}"
        );
    }

    #[test]
    fn improper_priors_cannot_be_sampled() {
        let mut r = ChaCha8Rng::seed_from_u64(4);
        assert!(Prior::default_for(FamilyKind::Weibull3)
            .sample(&mut r)
            .is_err());
        assert!(Prior::GaussianKnownVariance { sigma2: 1.0 }
            .sample(&mut r)
            .is_err());
        assert!(Prior::default_for(FamilyKind::Cauchy)
            .sample(&mut r)
            .is_ok());
    }
}
