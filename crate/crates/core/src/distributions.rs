//! Continuous univariate families with exact interval-truncated sampling.
//!
//! Every family exposes its density, distribution function and quantile
//! function in both linear and log space. Truncated draws invert the
//! distribution function on the log scale, switching to the survival
//! function when the interval lies in the upper half of the distribution,
//! so zones sitting deep in a tail keep full relative precision.

use std::f64::consts::{FRAC_1_PI, PI, SQRT_2};
use std::fmt;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Maximum number of inverse-CDF attempts before a truncated draw falls back
/// to a uniform draw on a numerically unresolvable interval.
const MAX_TRUNCATION_TRIES: usize = 32;

/// An open interval of the extended real line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::Domain(format!("empty interval ({lo}, {hi})")));
        }
        Ok(Interval { lo, hi })
    }

    /// Interval without validation; callers guarantee `lo < hi` or accept an
    /// [`Error::InfeasibleInterval`] later.
    pub(crate) const fn raw(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn below(hi: f64) -> Self {
        Interval::raw(f64::NEG_INFINITY, hi)
    }

    pub fn above(lo: f64) -> Self {
        Interval::raw(lo, f64::INFINITY)
    }

    /// Strict membership.
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval::raw(self.lo.max(other.lo), self.hi.min(other.hi))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mu: f64,
    pub sigma2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyParams {
    pub x0: f64,
    pub gamma: f64,
}

/// Three-parameter Weibull: location `x0` (support lower bound), scale
/// `gamma`, shape `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslatedWeibullParams {
    pub x0: f64,
    pub gamma: f64,
    pub beta: f64,
}

/// Unvalidated parameter sets, one per supported family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FamilyParams {
    Gaussian(GaussianParams),
    Cauchy(CauchyParams),
    Weibull3(TranslatedWeibullParams),
}

/// The family tag without parameter values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Gaussian,
    Cauchy,
    Weibull3,
}

impl FamilyKind {
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            FamilyKind::Gaussian => &["mu", "sigma2"],
            FamilyKind::Cauchy => &["x0", "gamma"],
            FamilyKind::Weibull3 => &["x0", "gamma", "beta"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::Cauchy => "cauchy",
            FamilyKind::Weibull3 => "weibull3",
        }
    }

    /// Builds a validated family from a parameter vector ordered as
    /// [`FamilyKind::param_names`].
    pub fn with_params(self, theta: &[f64]) -> Result<Family> {
        let want = self.param_names().len();
        if theta.len() != want {
            return Err(Error::ParameterDomain(format!(
                "{} expects {want} parameters, got {}",
                self.name(),
                theta.len()
            )));
        }
        match self {
            FamilyKind::Gaussian => Family::gaussian(theta[0], theta[1]),
            FamilyKind::Cauchy => Family::cauchy(theta[0], theta[1]),
            FamilyKind::Weibull3 => Family::weibull3(theta[0], theta[1], theta[2]),
        }
    }

    /// True when the support is the whole real line.
    pub fn full_support(self) -> bool {
        !matches!(self, FamilyKind::Weibull3)
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(FamilyKind::Gaussian),
            "cauchy" => Ok(FamilyKind::Cauchy),
            "weibull3" | "weibull" => Ok(FamilyKind::Weibull3),
            other => Err(Error::Config(format!("unknown family `{other}`"))),
        }
    }
}

/// A validated member of one of the supported families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Family {
    params: FamilyParams,
}

impl TryFrom<FamilyParams> for Family {
    type Error = Error;

    fn try_from(params: FamilyParams) -> Result<Self> {
        let ok = |v: f64| v.is_finite();
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let valid = match params {
            FamilyParams::Gaussian(p) => ok(p.mu) && pos(p.sigma2),
            FamilyParams::Cauchy(p) => ok(p.x0) && pos(p.gamma),
            FamilyParams::Weibull3(p) => ok(p.x0) && pos(p.gamma) && pos(p.beta),
        };
        if valid {
            Ok(Family { params })
        } else {
            Err(Error::ParameterDomain(format!("{params:?}")))
        }
    }
}

impl Family {
    pub fn gaussian(mu: f64, sigma2: f64) -> Result<Self> {
        FamilyParams::Gaussian(GaussianParams { mu, sigma2 }).try_into()
    }

    pub fn cauchy(x0: f64, gamma: f64) -> Result<Self> {
        FamilyParams::Cauchy(CauchyParams { x0, gamma }).try_into()
    }

    pub fn weibull3(x0: f64, gamma: f64, beta: f64) -> Result<Self> {
        FamilyParams::Weibull3(TranslatedWeibullParams { x0, gamma, beta }).try_into()
    }

    pub fn params(&self) -> FamilyParams {
        self.params
    }

    pub fn kind(&self) -> FamilyKind {
        match self.params {
            FamilyParams::Gaussian(_) => FamilyKind::Gaussian,
            FamilyParams::Cauchy(_) => FamilyKind::Cauchy,
            FamilyParams::Weibull3(_) => FamilyKind::Weibull3,
        }
    }

    /// Parameters in the order of [`FamilyKind::param_names`].
    pub fn theta(&self) -> Vec<f64> {
        match self.params {
            FamilyParams::Gaussian(p) => vec![p.mu, p.sigma2],
            FamilyParams::Cauchy(p) => vec![p.x0, p.gamma],
            FamilyParams::Weibull3(p) => vec![p.x0, p.gamma, p.beta],
        }
    }

    pub fn support(&self) -> Interval {
        match self.params {
            FamilyParams::Weibull3(p) => Interval::above(p.x0),
            _ => Interval::REAL,
        }
    }

    pub fn median(&self) -> f64 {
        match self.params {
            FamilyParams::Gaussian(p) => p.mu,
            FamilyParams::Cauchy(p) => p.x0,
            FamilyParams::Weibull3(p) => p.x0 + p.gamma * std::f64::consts::LN_2.powf(1.0 / p.beta),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self.params {
            FamilyParams::Gaussian(p) => {
                let sd = p.sigma2.sqrt();
                let z = (x - p.mu) / sd;
                (-0.5 * z * z).exp() / (sd * SQRT_2PI)
            }
            FamilyParams::Cauchy(p) => {
                let z = (x - p.x0) / p.gamma;
                FRAC_1_PI / (p.gamma * (1.0 + z * z))
            }
            FamilyParams::Weibull3(p) => {
                if x < p.x0 {
                    return 0.0;
                }
                let t = (x - p.x0) / p.gamma;
                p.beta / p.gamma * t.powf(p.beta - 1.0) * (-t.powf(p.beta)).exp()
            }
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self.params {
            FamilyParams::Gaussian(p) => {
                let z = (x - p.mu) / p.sigma2.sqrt();
                -0.5 * z * z - LN_SQRT_2PI - 0.5 * p.sigma2.ln()
            }
            FamilyParams::Cauchy(p) => {
                let z = (x - p.x0) / p.gamma;
                -(PI * p.gamma).ln() - z.mul_add(z, 1.0).ln()
            }
            FamilyParams::Weibull3(p) => {
                if x < p.x0 {
                    return f64::NEG_INFINITY;
                }
                let t = (x - p.x0) / p.gamma;
                if t == 0.0 {
                    return self.pdf(x).ln();
                }
                (p.beta / p.gamma).ln() + (p.beta - 1.0) * t.ln() - t.powf(p.beta)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.params {
            FamilyParams::Gaussian(p) => norm_cdf((x - p.mu) / p.sigma2.sqrt()),
            FamilyParams::Cauchy(p) => cauchy_cdf((x - p.x0) / p.gamma),
            FamilyParams::Weibull3(p) => {
                if x <= p.x0 {
                    0.0
                } else {
                    -(-((x - p.x0) / p.gamma).powf(p.beta)).exp_m1()
                }
            }
        }
    }

    /// Survival function `1 - F(x)`, computed without cancellation.
    pub fn sf(&self, x: f64) -> f64 {
        match self.params {
            FamilyParams::Gaussian(p) => norm_cdf(-(x - p.mu) / p.sigma2.sqrt()),
            FamilyParams::Cauchy(p) => cauchy_cdf(-(x - p.x0) / p.gamma),
            FamilyParams::Weibull3(p) => {
                if x <= p.x0 {
                    1.0
                } else {
                    (-((x - p.x0) / p.gamma).powf(p.beta)).exp()
                }
            }
        }
    }

    pub fn ln_cdf(&self, x: f64) -> f64 {
        match self.params {
            FamilyParams::Gaussian(p) => norm_ln_cdf((x - p.mu) / p.sigma2.sqrt()),
            FamilyParams::Cauchy(p) => cauchy_ln_cdf((x - p.x0) / p.gamma),
            FamilyParams::Weibull3(p) => {
                if x <= p.x0 {
                    f64::NEG_INFINITY
                } else {
                    let w = ((x - p.x0) / p.gamma).powf(p.beta);
                    (-(-w).exp_m1()).ln()
                }
            }
        }
    }

    pub fn ln_sf(&self, x: f64) -> f64 {
        match self.params {
            FamilyParams::Gaussian(p) => norm_ln_cdf(-(x - p.mu) / p.sigma2.sqrt()),
            FamilyParams::Cauchy(p) => cauchy_ln_cdf(-(x - p.x0) / p.gamma),
            FamilyParams::Weibull3(p) => {
                if x <= p.x0 {
                    0.0
                } else {
                    -((x - p.x0) / p.gamma).powf(p.beta)
                }
            }
        }
    }

    /// Quantile function on `(0, 1)`.
    pub fn quantile(&self, prob: f64) -> Result<f64> {
        if !(prob > 0.0 && prob < 1.0) {
            return Err(Error::Domain(format!(
                "quantile level {prob} not in (0, 1)"
            )));
        }
        Ok(self.quantile_unchecked(prob))
    }

    fn quantile_unchecked(&self, prob: f64) -> f64 {
        match self.params {
            FamilyParams::Gaussian(p) => p.mu + p.sigma2.sqrt() * norm_ppf(prob),
            FamilyParams::Cauchy(p) => {
                let z = if prob < 0.5 {
                    -1.0 / (PI * prob).tan()
                } else {
                    1.0 / (PI * (1.0 - prob)).tan()
                };
                p.x0 + p.gamma * z
            }
            FamilyParams::Weibull3(p) => p.x0 + p.gamma * (-(-prob).ln_1p()).powf(1.0 / p.beta),
        }
    }

    /// Inverse of [`Family::ln_cdf`].
    pub fn quantile_from_ln_cdf(&self, lp: f64) -> f64 {
        match self.params {
            FamilyParams::Gaussian(p) => p.mu + p.sigma2.sqrt() * norm_ppf_ln(lp),
            FamilyParams::Cauchy(p) => p.x0 + p.gamma * cauchy_ppf_ln(lp),
            FamilyParams::Weibull3(p) => {
                let w = if lp < -std::f64::consts::LN_2 {
                    -(-lp.exp()).ln_1p()
                } else {
                    -(-lp.exp_m1()).ln()
                };
                p.x0 + p.gamma * w.powf(1.0 / p.beta)
            }
        }
    }

    /// Inverse of [`Family::ln_sf`].
    pub fn quantile_from_ln_sf(&self, ls: f64) -> f64 {
        match self.params {
            FamilyParams::Gaussian(p) => p.mu - p.sigma2.sqrt() * norm_ppf_ln(ls),
            FamilyParams::Cauchy(p) => p.x0 - p.gamma * cauchy_ppf_ln(ls),
            FamilyParams::Weibull3(p) => p.x0 + p.gamma * (-ls).max(0.0).powf(1.0 / p.beta),
        }
    }

    /// Probability mass of an interval, `F(hi) - F(lo)`, evaluated on the
    /// side of the distribution where it does not cancel.
    pub fn mass(&self, iv: &Interval) -> f64 {
        if iv.lo >= self.median() {
            (self.sf(iv.lo) - self.sf(iv.hi)).max(0.0)
        } else {
            (self.cdf(iv.hi) - self.cdf(iv.lo)).max(0.0)
        }
    }

    /// Log of [`Family::mass`], accurate for intervals far in a tail.
    pub fn ln_mass(&self, iv: &Interval) -> f64 {
        let (a, b) = self.log_bounds(iv);
        if b == f64::NEG_INFINITY || a >= b {
            return f64::NEG_INFINITY;
        }
        // ln(e^b - e^a)
        b + (-(a - b).exp()).ln_1p()
    }

    /// (ln G(near), ln G(far)) for the monotone function G used by the
    /// truncated sampler: the CDF on the lower route, the survival function
    /// on the upper route. Returned as (smaller, larger).
    fn log_bounds(&self, iv: &Interval) -> (f64, f64) {
        if iv.lo >= self.median() {
            (self.ln_sf(iv.hi), self.ln_sf(iv.lo))
        } else {
            (self.ln_cdf(iv.lo), self.ln_cdf(iv.hi))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.params {
            FamilyParams::Gaussian(p) => {
                let z: f64 = rng.sample(StandardNormal);
                p.mu + p.sigma2.sqrt() * z
            }
            _ => {
                let u: f64 = rng.sample(Open01);
                self.quantile_unchecked(u)
            }
        }
    }

    /// Draws from the family restricted to the open interval `iv`.
    pub fn sample_truncated<R: Rng + ?Sized>(&self, iv: &Interval, rng: &mut R) -> Result<f64> {
        let iv = iv.intersect(&self.support());
        let infeasible = Error::InfeasibleInterval {
            lo: iv.lo,
            hi: iv.hi,
        };
        if !(iv.lo < iv.hi) {
            return Err(infeasible);
        }
        let upper = iv.lo >= self.median();
        let (a, b) = self.log_bounds(&iv);
        if b == f64::NEG_INFINITY || !(a < b) {
            if iv.lo.is_finite() && iv.hi.is_finite() && a.is_finite() && a == b {
                return Ok(uniform_inside(&iv, rng));
            }
            return Err(infeasible);
        }
        let ratio = (a - b).exp();
        for _ in 0..MAX_TRUNCATION_TRIES {
            let u: f64 = rng.random();
            // ln(G(near) + u (G(far) - G(near)))
            let lg = b + u.mul_add(1.0 - ratio, ratio).ln();
            let x = if upper {
                self.quantile_from_ln_sf(lg)
            } else {
                self.quantile_from_ln_cdf(lg)
            };
            if iv.contains(x) {
                return Ok(x);
            }
        }
        // The interval is narrower than the resolution of the inverse CDF.
        if iv.lo.is_finite() && iv.hi.is_finite() {
            Ok(uniform_inside(&iv, rng))
        } else {
            Err(infeasible)
        }
    }
}

fn uniform_inside<R: Rng + ?Sized>(iv: &Interval, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.sample(Open01);
        let x = iv.lo + u * (iv.hi - iv.lo);
        if iv.contains(x) {
            return x;
        }
        if iv.lo.next_up() >= iv.hi {
            return iv.lo;
        }
    }
}

// ---------------------------------------------------------------------------
// Standard normal

pub(crate) fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

pub(crate) fn norm_ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

pub(crate) fn norm_ln_cdf(z: f64) -> f64 {
    if z > 0.0 {
        (-0.5 * erfc(z / SQRT_2)).ln_1p()
    } else if z > -37.0 {
        (0.5 * erfc(-z / SQRT_2)).ln()
    } else {
        // Asymptotic Mills-ratio expansion.
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        norm_ln_pdf(z) - (-z).ln() + series.ln()
    }
}

/// Inverse standard normal CDF: rational initial guess refined with one
/// Halley step on the exact CDF.
pub(crate) fn norm_ppf(p: f64) -> f64 {
    if p > 0.5 {
        return -norm_ppf(1.0 - p);
    }
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let x = if p < 0.024_25 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    if x.abs() > 37.0 {
        return x;
    }
    let e = norm_cdf(x) - p;
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Inverse of [`norm_ln_cdf`].
pub(crate) fn norm_ppf_ln(lp: f64) -> f64 {
    if lp >= 0.0 {
        return f64::INFINITY;
    }
    if lp > -std::f64::consts::LN_2 {
        return -norm_ppf(-lp.exp_m1());
    }
    if lp > -700.0 {
        return norm_ppf(lp.exp());
    }
    // Far lower tail: Newton iterations on the log scale.
    let t = (-2.0 * lp).sqrt();
    let mut x = -(t - (t.ln() + LN_SQRT_2PI) / t);
    for _ in 0..8 {
        let g = norm_ln_cdf(x) - lp;
        let slope = (norm_ln_pdf(x) - norm_ln_cdf(x)).exp();
        let step = g / slope;
        x -= step;
        if step.abs() <= 1e-15 * x.abs() {
            break;
        }
    }
    x
}

// ---------------------------------------------------------------------------
// Standard Cauchy

fn cauchy_cdf(z: f64) -> f64 {
    if z < 0.0 {
        (-1.0 / z).atan() * FRAC_1_PI
    } else {
        0.5 + z.atan() * FRAC_1_PI
    }
}

fn cauchy_ln_cdf(z: f64) -> f64 {
    if z < 0.0 {
        ((-1.0 / z).atan() * FRAC_1_PI).ln()
    } else if z == 0.0 {
        -std::f64::consts::LN_2
    } else {
        (-(1.0 / z).atan() * FRAC_1_PI).ln_1p()
    }
}

fn cauchy_ppf_ln(lp: f64) -> f64 {
    if lp < -std::f64::consts::LN_2 {
        -1.0 / (PI * lp.exp()).tan()
    } else {
        1.0 / (PI * -lp.exp_m1()).tan()
    }
}
