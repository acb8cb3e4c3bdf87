//! Invariant suites run by `robust-gibbs validate`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{norm_ppf, Family, FamilyKind};
use crate::error::{Error, Result};
use crate::med_mad_conditional::{
    feasible_configs, ladder_state, MedMadConfig, MedMadConstraints, MedMadEngine, Parity,
};
use crate::posterior_updates::Prior;
use crate::sampler::{Chain, GibbsConfig, RobustConstraint};

/// Largest relative residual tolerated on the recomputed statistics.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    MedMadInvariants,
    QuantileInvariants,
    MedIqrInvariants,
    Reachability,
    NegativeControl,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::MedMadInvariants,
        Suite::QuantileInvariants,
        Suite::MedIqrInvariants,
        Suite::Reachability,
        Suite::NegativeControl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::MedMadInvariants => "medmad-invariants",
            Suite::QuantileInvariants => "quantile-invariants",
            Suite::MedIqrInvariants => "mediqr-invariants",
            Suite::Reachability => "reachability",
            Suite::NegativeControl => "negative-control",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!(
                    "unknown suite '{s}', expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    /// Gibbs iterations per invariant run.
    pub iterations: usize,
    /// Sweep budget per start in the reachability suite.
    pub max_sweeps: usize,
    /// Length of the census run in the reachability suite.
    pub census_sweeps: usize,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            iterations: 10_000,
            max_sweeps: 100_000,
            census_sweeps: 10_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Configuration visit counts over a fixed-length run, for the
    /// reachability suite.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub census: BTreeMap<String, BTreeMap<String, u64>>,
}

impl SuiteReport {
    fn new(
        suite: Suite,
        checks: Vec<Check>,
        census: BTreeMap<String, BTreeMap<String, u64>>,
    ) -> Self {
        SuiteReport {
            suite: suite.name().into(),
            passed: checks.iter().all(|c| c.passed),
            checks,
            census,
        }
    }
}

pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> Result<SuiteReport> {
    match suite {
        Suite::MedMadInvariants => invariants(suite, &medmad_cases(), opts),
        Suite::QuantileInvariants => invariants(suite, &quantile_cases(), opts),
        Suite::MedIqrInvariants => invariants(suite, &mediqr_cases(), opts),
        Suite::Reachability => reachability(opts),
        Suite::NegativeControl => negative_control(opts),
    }
}

const FAMILIES: [FamilyKind; 3] = [
    FamilyKind::Gaussian,
    FamilyKind::Cauchy,
    FamilyKind::Weibull3,
];

fn medmad_cases() -> Vec<RobustConstraint> {
    [9, 101, 12, 100]
        .into_iter()
        .map(|n| RobustConstraint::MedMad {
            n,
            median: 1.0,
            mad: 2.0,
        })
        .collect()
}

/// Quantiles of N(1, 2^2) at `p_j = j / (M + 1)`.
fn quantile_cases() -> Vec<RobustConstraint> {
    [1, 3, 9]
        .into_iter()
        .map(|m| {
            let probs: Vec<f64> = (1..=m).map(|j| j as f64 / (m as f64 + 1.0)).collect();
            let values = probs.iter().map(|&p| 1.0 + 2.0 * norm_ppf(p)).collect();
            RobustConstraint::Quantiles {
                n: 101,
                probs,
                values,
            }
        })
        .collect()
}

/// One sample size per residue of `N` mod 4.
fn mediqr_cases() -> Vec<RobustConstraint> {
    [21, 23, 24, 26]
        .into_iter()
        .map(|n| RobustConstraint::MedIqr {
            n,
            median: 1.0,
            iqr: 3.0,
        })
        .collect()
}

fn describe(c: &RobustConstraint) -> String {
    match c {
        RobustConstraint::Quantiles { n, probs, .. } => {
            format!("quantiles M={} N={n}", probs.len())
        }
        RobustConstraint::MedIqr { n, .. } => format!("mediqr N={n} (N mod 4 = {})", n % 4),
        RobustConstraint::MedMad { n, .. } => format!("medmad N={n}"),
    }
}

/// Runs the full Gibbs sampler and checks the statistics after every
/// iteration.
fn check_chain(constraint: &RobustConstraint, kind: FamilyKind, opts: &SuiteOptions) -> Check {
    let name = format!("{} {}", describe(constraint), kind.name());
    let config = GibbsConfig {
        iterations: opts.iterations,
        burn_in: Some(opts.iterations / 10),
        seed: opts.seed,
        ..Default::default()
    };
    let run = || -> Result<(f64, usize)> {
        let mut chain = Chain::new(kind, constraint, &Prior::default_for(kind), &config, 0)?;
        let mut worst = 0.0f64;
        for t in 0..opts.iterations {
            chain.step()?;
            let r = chain.residual()?;
            worst = worst.max(r);
            if !(r < RESIDUAL_TOL) {
                return Ok((r, t + 1));
            }
        }
        Ok((worst, opts.iterations))
    };
    match run() {
        Ok((worst, t)) => Check {
            passed: worst < RESIDUAL_TOL && t == opts.iterations,
            detail: format!("{t} iterations, max relative residual {worst:.3e}"),
            name,
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn invariants(
    suite: Suite,
    cases: &[RobustConstraint],
    opts: &SuiteOptions,
) -> Result<SuiteReport> {
    let jobs: Vec<(&RobustConstraint, FamilyKind)> = cases
        .iter()
        .flat_map(|c| FAMILIES.map(|k| (c, k)))
        .collect();
    let checks = jobs
        .par_iter()
        .map(|(c, k)| check_chain(c, *k, opts))
        .collect();
    Ok(SuiteReport::new(suite, checks, BTreeMap::new()))
}

/// Runs the latent kernel at fixed parameters from the ladder start of each
/// feasible configuration until every target configuration has been seen.
/// Returns the sweeps used (or `None`) and the census.
pub fn reach_all(
    c: &MedMadConstraints,
    start: MedMadConfig,
    family: &Family,
    max_sweeps: usize,
    seed: u64,
    project: impl Fn(MedMadConfig) -> MedMadConfig,
) -> Result<(Option<usize>, BTreeMap<MedMadConfig, u64>)> {
    let targets: std::collections::BTreeSet<MedMadConfig> =
        feasible_configs(c).into_iter().map(&project).collect();
    let mut engine = MedMadEngine::from_state(*c, ladder_state(c, start)?, None);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::BTreeSet::new();
    seen.insert(project(start));
    for sweep in 1..=max_sweeps {
        engine.update(family, &mut rng)?;
        engine.record_census();
        seen.insert(project(engine.state().config(c)));
        if seen.len() == targets.len() {
            return Ok((Some(sweep), engine.census().clone()));
        }
    }
    Ok((None, engine.census().clone()))
}

/// Collapses an even-N configuration to the sides of its MAD pins.
pub fn pin_sides(cfg: MedMadConfig) -> MedMadConfig {
    match cfg {
        MedMadConfig::Even {
            near_above,
            far_above,
            ..
        } => MedMadConfig::Even {
            k: 0,
            near_above,
            far_above,
        },
        other => other,
    }
}

fn reachability(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let mut census = BTreeMap::new();
    for n in [9usize, 12] {
        let c = MedMadConstraints::new(n, 0.0, 1.0)?;
        let family = Family::gaussian(0.0, 1.4826f64.powi(2))?;
        let odd = c.parity() == Parity::Odd;
        let project = |cfg| if odd { cfg } else { pin_sides(cfg) };
        let starts = feasible_configs(&c);
        let results: Vec<_> = starts
            .par_iter()
            .enumerate()
            .map(|(k, &start)| {
                reach_all(
                    &c,
                    start,
                    &family,
                    opts.max_sweeps,
                    opts.seed + k as u64,
                    project,
                )
            })
            .collect::<Result<_>>()?;
        for (start, (sweeps, _)) in starts.iter().zip(results) {
            let what = if odd {
                "all (k, delta) states"
            } else {
                "all pin-side configurations"
            };
            checks.push(Check {
                name: format!("N={n} from {start}"),
                passed: sweeps.is_some(),
                detail: match sweeps {
                    Some(s) => format!("{what} visited after {s} sweeps"),
                    None => format!("{what} not visited within {} sweeps", opts.max_sweeps),
                },
            });
        }
        let mut engine = MedMadEngine::new(
            c,
            &family,
            &mut ChaCha8Rng::seed_from_u64(opts.seed),
            crate::med_iqr_conditional::InitMode::Deterministic,
            None,
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1000));
        for _ in 0..opts.census_sweeps {
            engine.update(&family, &mut rng)?;
            engine.record_census();
        }
        let visited = engine.census().len();
        checks.push(Check {
            name: format!("N={n} census"),
            passed: visited == starts.len(),
            detail: format!(
                "{visited} of {} configurations visited in {} sweeps",
                starts.len(),
                opts.census_sweeps
            ),
        });
        census.insert(
            format!("N={n}"),
            engine
                .census()
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        );
    }
    Ok(SuiteReport::new(Suite::Reachability, checks, census))
}

/// Corrupts valid states and checks that the audits catch it. Each check
/// passes when the violation is reported.
fn negative_control(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    for n in [9usize, 12] {
        let c = MedMadConstraints::new(n, 0.0, 1.0)?;
        let cfg = feasible_configs(&c)[0];
        let mut state = ladder_state(&c, cfg)?;
        let pin = state.median_pins()[0];
        let v = state.values()[pin];
        state.corrupt(pin, v + 1e-3);
        let audit = crate::med_mad_conditional::audit_medmad(&state, &c);
        checks.push(Check {
            name: format!("medmad N={n}: shifted median pin"),
            passed: !audit.is_ok(),
            detail: audit.violations.join("; "),
        });
        let mut state = ladder_state(&c, cfg)?;
        let pin = state.mad_pins()[0];
        let v = state.values()[pin];
        state.corrupt(pin, v * 1.5 + 0.1);
        let audit = crate::med_mad_conditional::audit_medmad(&state, &c);
        checks.push(Check {
            name: format!("medmad N={n}: shifted MAD pin"),
            passed: !audit.is_ok(),
            detail: audit.violations.join("; "),
        });
    }
    let config = GibbsConfig {
        iterations: 10,
        burn_in: Some(1),
        seed: opts.seed,
        ..Default::default()
    };
    for c in [quantile_cases().remove(1), mediqr_cases().remove(0)] {
        let chain = Chain::new(
            FamilyKind::Gaussian,
            &c,
            &Prior::default_for(FamilyKind::Gaussian),
            &config,
            0,
        )?;
        let mut x = chain.latent().to_vec();
        let mid = x.len() / 2;
        let sorted = crate::order_stats::sorted_copy(&x);
        // move the coordinate holding the middle order statistic
        let pos = x.iter().position(|&v| v == sorted[mid]).unwrap_or(mid);
        x[pos] += 0.5;
        let r = residual_of(&c, &x)?;
        checks.push(Check {
            name: format!("{}: shifted middle order statistic", describe(&c)),
            passed: r > RESIDUAL_TOL,
            detail: format!("relative residual {r:.3e}"),
        });
    }
    Ok(SuiteReport::new(
        Suite::NegativeControl,
        checks,
        BTreeMap::new(),
    ))
}

fn residual_of(c: &RobustConstraint, x: &[f64]) -> Result<f64> {
    let got = c.summarize(x)?;
    Ok(c.observed()
        .iter()
        .zip(&got)
        .map(|(o, g)| (o - g).abs() / o.abs().max(1.0))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_roundtrip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn short_invariant_runs_pass() {
        let opts = SuiteOptions {
            iterations: 30,
            ..Default::default()
        };
        for s in [
            Suite::MedMadInvariants,
            Suite::QuantileInvariants,
            Suite::MedIqrInvariants,
        ] {
            let r = run_suite(s, &opts).unwrap();
            assert!(r.passed, "{r:#?}");
            assert_eq!(
                r.checks.len(),
                if s == Suite::QuantileInvariants {
                    9
                } else {
                    12
                }
            );
        }
    }

    #[test]
    fn negative_control_detects() {
        let r = run_suite(Suite::NegativeControl, &SuiteOptions::default()).unwrap();
        assert!(r.passed, "{r:#?}");
        assert!(r.checks.iter().all(|c| !c.detail.is_empty()));
    }
}
