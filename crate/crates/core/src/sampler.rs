//! Two-block Gibbs sampler: the latent sample given the observed statistics
//! and the parameters, then the parameters given the latent sample.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{Family, FamilyKind};
use crate::error::{Error, Result};
use crate::layout::RwTuning;
use crate::med_iqr_conditional::{InitMode, MedIqrConstraints, MedIqrEngine};
use crate::med_mad_conditional::{KernelMode, MedMadConstraints, MedMadEngine};
use crate::order_stats::{empirical_quantile, iqr, mad, median, quantile_sorted, sorted_copy};
use crate::posterior_updates::{
    collapsed_theta_update, update_theta, BlockTuning, EfficiencyConstants, Prior,
};
use crate::quantile_conditional::{QuantileConstraints, QuantileEngine};

/// Name of the random number generator, recorded in outputs.
pub const RNG_NAME: &str = "ChaCha8Rng";

/// The observed robust statistics of a sample of size `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RobustConstraint {
    Quantiles {
        n: usize,
        probs: Vec<f64>,
        values: Vec<f64>,
    },
    MedIqr {
        n: usize,
        median: f64,
        iqr: f64,
    },
    MedMad {
        n: usize,
        median: f64,
        mad: f64,
    },
}

impl RobustConstraint {
    pub fn quantiles(n: usize, pairs: &[(f64, f64)]) -> Result<Self> {
        let c = RobustConstraint::Quantiles {
            n,
            probs: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn med_iqr(n: usize, median: f64, iqr: f64) -> Result<Self> {
        let c = RobustConstraint::MedIqr { n, median, iqr };
        c.validate()?;
        Ok(c)
    }

    pub fn med_mad(n: usize, median: f64, mad: f64) -> Result<Self> {
        let c = RobustConstraint::MedMad { n, median, mad };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RobustConstraint::Quantiles { n, probs, values } => {
                if probs.len() != values.len() {
                    return Err(Error::Config(format!(
                        "{} probabilities but {} values",
                        probs.len(),
                        values.len()
                    )));
                }
                QuantileConstraints::new(*n, &self.pairs()).map(|_| ())
            }
            RobustConstraint::MedIqr { n, median, iqr } => {
                MedIqrConstraints::new(*n, *median, *iqr).map(|_| ())
            }
            RobustConstraint::MedMad { n, median, mad } => {
                MedMadConstraints::new(*n, *median, *mad).map(|_| ())
            }
        }
    }

    fn pairs(&self) -> Vec<(f64, f64)> {
        match self {
            RobustConstraint::Quantiles { probs, values, .. } => {
                probs.iter().copied().zip(values.iter().copied()).collect()
            }
            _ => Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            RobustConstraint::Quantiles { n, .. }
            | RobustConstraint::MedIqr { n, .. }
            | RobustConstraint::MedMad { n, .. } => *n,
        }
    }

    /// The observed summary vector.
    pub fn observed(&self) -> Vec<f64> {
        match self {
            RobustConstraint::Quantiles { values, .. } => values.clone(),
            RobustConstraint::MedIqr { median, iqr, .. } => vec![*median, *iqr],
            RobustConstraint::MedMad { median, mad, .. } => vec![*median, *mad],
        }
    }

    /// The same summaries computed from a sample.
    pub fn summarize(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            RobustConstraint::Quantiles { probs, .. } => {
                let s = sorted_copy(x);
                probs.iter().map(|&p| quantile_sorted(&s, p)).collect()
            }
            RobustConstraint::MedIqr { .. } => Ok(vec![median(x)?, iqr(x)?]),
            RobustConstraint::MedMad { .. } => Ok(vec![median(x)?, mad(x)?]),
        }
    }

    /// Names of the summary components.
    pub fn summary_names(&self) -> Vec<String> {
        match self {
            RobustConstraint::Quantiles { probs, .. } => {
                probs.iter().map(|p| format!("q{p}")).collect()
            }
            RobustConstraint::MedIqr { .. } => vec!["median".into(), "iqr".into()],
            RobustConstraint::MedMad { .. } => vec!["median".into(), "mad".into()],
        }
    }

    /// Location and scale read off the statistics (scale on the Gaussian
    /// standard-deviation scale), plus the smallest value the statistics
    /// force into the sample neighbourhood.
    fn pilot(&self) -> (f64, f64, f64) {
        let c = EfficiencyConstants::default().c;
        match self {
            RobustConstraint::MedMad { median, mad, .. } => (*median, c * mad, median - 2.0 * mad),
            RobustConstraint::MedIqr { median, iqr, .. } => (*median, iqr / 1.349, median - iqr),
            RobustConstraint::Quantiles { probs, values, .. } => {
                let (lo, hi) = (values[0], values[values.len() - 1]);
                let mid = empirical_quantile(values, 0.5).unwrap_or(lo);
                let z = |p: f64| crate::distributions::norm_ppf(p.clamp(0.01, 0.99));
                let dz = z(probs[probs.len() - 1]) - z(probs[0]);
                let scale = if values.len() > 1 && dz > 0.0 {
                    (hi - lo) / dz
                } else {
                    1.0
                };
                (mid, scale, lo)
            }
        }
    }

    /// A starting parameter under which the statistics are feasible.
    pub fn default_theta0(&self, kind: FamilyKind) -> Result<Family> {
        let (loc, scale, lowest) = self.pilot();
        match kind {
            FamilyKind::Gaussian => Family::gaussian(loc, scale * scale),
            FamilyKind::Cauchy => Family::cauchy(loc, scale / 1.4826),
            FamilyKind::Weibull3 => Family::weibull3(lowest - 2.0 * scale, 2.0 * scale, 2.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GibbsConfig {
    pub iterations: usize,
    /// Defaults to `5N` for deterministic initialisation and
    /// `max(1000, T/10)` otherwise, capped at `T/2`.
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub seed: u64,
    /// Latent-vector initialisation; defaults to deterministic for families
    /// with bounded support and linear otherwise.
    pub init: Option<InitMode>,
    /// Pair updates per sweep for the median/MAD engine (default `N`).
    pub n_pairs: Option<usize>,
    /// Robbins-Monro tuning of the random-walk scales during burn-in.
    pub adapt: bool,
    pub kernel: KernelMode,
    /// Starting parameters; derived from the statistics when absent.
    pub theta0: Option<Vec<f64>>,
    /// Extra block Metropolis steps per iteration on the Cauchy or Weibull
    /// parameters given only the pinned order statistics (quantile and
    /// median/IQR engines). Zero gives the plain two-block sampler.
    pub collapsed_steps: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            iterations: 10_000,
            burn_in: None,
            thin: 1,
            seed: 0,
            init: None,
            n_pairs: None,
            adapt: true,
            kernel: KernelMode::Exact,
            theta0: None,
            collapsed_steps: 50,
        }
    }
}

impl GibbsConfig {
    pub fn init_mode(&self, kind: FamilyKind) -> InitMode {
        self.init.unwrap_or(if kind.full_support() {
            InitMode::Linear
        } else {
            InitMode::Deterministic
        })
    }

    pub fn resolved_burn_in(&self, kind: FamilyKind, n: usize) -> Result<usize> {
        let t = self.iterations;
        if t == 0 || self.thin == 0 {
            return Err(Error::Config("iterations and thin must be positive".into()));
        }
        match self.burn_in {
            Some(b) if b >= t => Err(Error::Config(format!(
                "burn-in {b} must be below the {t} iterations"
            ))),
            Some(b) => Ok(b),
            None => {
                let b = match self.init_mode(kind) {
                    InitMode::Deterministic => 5 * n,
                    InitMode::Linear => 1000.max(t / 10),
                };
                Ok(b.min(t / 2))
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Latent {
    Quantiles(QuantileEngine),
    MedIqr(MedIqrEngine),
    MedMad(MedMadEngine),
}

/// A single Gibbs chain that can be advanced step by step.
#[derive(Clone, Debug)]
pub struct Chain {
    family: Family,
    prior: Prior,
    latent: Latent,
    theta_tuning: RwTuning,
    collapsed: Option<(usize, BlockTuning)>,
    rng: ChaCha8Rng,
    iter: usize,
    burn_in: usize,
    adapt: bool,
}

impl Chain {
    /// Builds a chain whose generator is seeded with `config.seed + chain_index`.
    pub fn new(
        kind: FamilyKind,
        constraint: &RobustConstraint,
        prior: &Prior,
        config: &GibbsConfig,
        chain_index: u64,
    ) -> Result<Self> {
        prior.validate()?;
        if prior.family_kind() != kind {
            return Err(Error::Config(format!(
                "prior {prior:?} does not match the {} family",
                kind.name()
            )));
        }
        constraint.validate()?;
        let burn_in = config.resolved_burn_in(kind, constraint.n())?;
        let family = match &config.theta0 {
            Some(t) => kind
                .with_params(t)
                .map_err(|e| Error::Config(e.to_string()))?,
            None => constraint.default_theta0(kind)?,
        };
        let family = match prior {
            Prior::GaussianKnownVariance { sigma2 } => {
                Family::gaussian(family.theta()[0], *sigma2)?
            }
            _ => family,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(chain_index));
        let init = config.init_mode(kind);
        let latent = match constraint {
            RobustConstraint::Quantiles { n, .. } => Latent::Quantiles(QuantileEngine::new(
                QuantileConstraints::new(*n, &constraint.pairs())?,
                &family,
                &mut rng,
            )?),
            RobustConstraint::MedIqr { n, median, iqr } => Latent::MedIqr(MedIqrEngine::new(
                MedIqrConstraints::new(*n, *median, *iqr)?,
                &family,
                &mut rng,
                init,
            )?),
            RobustConstraint::MedMad { n, median, mad } => Latent::MedMad(
                MedMadEngine::new(
                    MedMadConstraints::new(*n, *median, *mad)?,
                    &family,
                    &mut rng,
                    init,
                    config.n_pairs,
                )?
                .with_mode(config.kernel),
            ),
        };
        let collapsed = match (&latent, prior) {
            (Latent::Quantiles(_) | Latent::MedIqr(_), Prior::Cauchy(_) | Prior::Weibull(_))
                if config.collapsed_steps > 0 =>
            {
                Some((
                    config.collapsed_steps,
                    BlockTuning::new(kind.param_names().len()),
                ))
            }
            _ => None,
        };
        Ok(Chain {
            collapsed,
            theta_tuning: RwTuning::new(kind.param_names().len(), 1.0, 0.44),
            family,
            prior: *prior,
            latent,
            rng,
            iter: 0,
            burn_in,
            adapt: config.adapt,
        })
    }

    /// One Gibbs iteration. Scale adaptation runs only during burn-in.
    pub fn step(&mut self) -> Result<()> {
        let adapt = self.adapt && self.iter < self.burn_in;
        match &mut self.latent {
            Latent::Quantiles(e) => e.update(&self.family, &mut self.rng, adapt)?,
            Latent::MedIqr(e) => e.update(&self.family, &mut self.rng, adapt)?,
            Latent::MedMad(e) => e.update(&self.family, &mut self.rng)?,
        }
        let n = self.latent_n();
        if let Some((steps, tuning)) = &mut self.collapsed {
            let next = match &mut self.latent {
                Latent::Quantiles(e) => {
                    let f = collapsed_theta_update(
                        &self.family,
                        &self.prior,
                        |f| e.pinned_logdensity(f),
                        n,
                        *steps,
                        &mut self.rng,
                        tuning,
                        adapt,
                    )?;
                    e.refill(&f, &mut self.rng)?;
                    f
                }
                Latent::MedIqr(e) => {
                    let f = collapsed_theta_update(
                        &self.family,
                        &self.prior,
                        |f| e.pinned_logdensity(f),
                        n,
                        *steps,
                        &mut self.rng,
                        tuning,
                        adapt,
                    )?;
                    e.refill(&f, &mut self.rng)?;
                    f
                }
                Latent::MedMad(_) => unreachable!("no collapsed move for the median/MAD engine"),
            };
            self.family = next;
        }
        let x = match &self.latent {
            Latent::Quantiles(e) => e.values(),
            Latent::MedIqr(e) => e.values(),
            Latent::MedMad(e) => e.values(),
        };
        let next = update_theta(
            &self.family,
            x,
            &self.prior,
            &mut self.rng,
            &mut self.theta_tuning,
            adapt,
        )?;
        self.family = next;
        self.iter += 1;
        if self.iter == self.burn_in {
            self.theta_tuning.reset_counts();
            if let Some((_, t)) = &mut self.collapsed {
                t.reset_counts();
            }
            match &mut self.latent {
                Latent::Quantiles(e) => e.tuning_mut().reset_counts(),
                Latent::MedIqr(e) => e.tuning_mut().reset_counts(),
                Latent::MedMad(e) => e.reset_census(),
            }
        }
        if self.iter > self.burn_in {
            if let Latent::MedMad(e) = &mut self.latent {
                e.record_census();
            }
        }
        Ok(())
    }

    fn latent_n(&self) -> usize {
        match &self.latent {
            Latent::Quantiles(e) => e.constraints().n(),
            Latent::MedIqr(e) => e.constraints().n(),
            Latent::MedMad(e) => e.constraints().n(),
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn theta(&self) -> Vec<f64> {
        self.family.theta()
    }

    pub fn latent(&self) -> &[f64] {
        match &self.latent {
            Latent::Quantiles(e) => e.values(),
            Latent::MedIqr(e) => e.values(),
            Latent::MedMad(e) => e.values(),
        }
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    /// Relative residual of the observed statistics recomputed from the
    /// current latent sample.
    pub fn residual(&self) -> Result<f64> {
        match &self.latent {
            Latent::Quantiles(e) => e.residual(),
            Latent::MedIqr(e) => e.residual(),
            Latent::MedMad(e) => Ok(e.audit().residual()),
        }
    }

    /// The median/MAD engine, when that is the latent model.
    pub fn medmad(&self) -> Option<&MedMadEngine> {
        match &self.latent {
            Latent::MedMad(e) => Some(e),
            _ => None,
        }
    }

    pub fn acceptance(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        if let Some(a) = self.theta_tuning.acceptance() {
            out.insert("theta".into(), a);
        }
        if let Some(a) = self.collapsed.as_ref().and_then(|c| c.1.acceptance()) {
            out.insert("theta_collapsed".into(), a);
        }
        let latent = match &self.latent {
            Latent::Quantiles(e) => e.tuning().acceptance(),
            Latent::MedIqr(e) => e.tuning().acceptance(),
            Latent::MedMad(e) => e.reflected_acceptance(),
        };
        if let Some(a) = latent {
            out.insert("latent".into(), a);
        }
        out
    }
}

/// Result of [`run_chain`].
#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput {
    pub family: FamilyKind,
    pub param_names: Vec<String>,
    /// Retained parameter draws, `(T - burn_in) / thin` of them.
    pub draws: Vec<Vec<f64>>,
    /// Post-burn-in acceptance rates of the Metropolis blocks.
    pub acceptance: BTreeMap<String, f64>,
    /// Post-burn-in visits of each median/MAD zone configuration.
    pub census: Option<BTreeMap<String, u64>>,
    pub seed: u64,
    pub burn_in: usize,
    pub wall_clock_secs: f64,
}

impl ChainOutput {
    pub fn column(&self, k: usize) -> Vec<f64> {
        crate::diagnostics::column(&self.draws, k)
    }
}

pub fn run_chain(
    kind: FamilyKind,
    constraint: &RobustConstraint,
    prior: &Prior,
    config: &GibbsConfig,
) -> Result<ChainOutput> {
    run_chain_indexed(kind, constraint, prior, config, 0)
}

fn run_chain_indexed(
    kind: FamilyKind,
    constraint: &RobustConstraint,
    prior: &Prior,
    config: &GibbsConfig,
    chain_index: u64,
) -> Result<ChainOutput> {
    let start = Instant::now();
    let mut chain = Chain::new(kind, constraint, prior, config, chain_index)?;
    let mut draws = Vec::with_capacity((config.iterations - chain.burn_in) / config.thin);
    for t in 0..config.iterations {
        chain.step()?;
        if t >= chain.burn_in && (t - chain.burn_in) % config.thin == config.thin - 1 {
            draws.push(chain.theta());
        }
    }
    let census = chain.medmad().map(|e| {
        e.census()
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect()
    });
    Ok(ChainOutput {
        family: kind,
        param_names: kind.param_names().iter().map(|s| s.to_string()).collect(),
        draws,
        acceptance: chain.acceptance(),
        census,
        seed: config.seed.wrapping_add(chain_index),
        burn_in: chain.burn_in,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

/// Runs `chains` independent chains in parallel; chain `c` uses seed
/// `config.seed + c`.
pub fn run_chains(
    kind: FamilyKind,
    constraint: &RobustConstraint,
    prior: &Prior,
    config: &GibbsConfig,
    chains: usize,
) -> Result<Vec<ChainOutput>> {
    (0..chains as u64)
        .into_par_iter()
        .map(|c| run_chain_indexed(kind, constraint, prior, config, c))
        .collect()
}
