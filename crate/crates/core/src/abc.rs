//! Rejection ABC on the same robust summaries, as a baseline.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::FamilyKind;
use crate::error::{Error, Result};
use crate::posterior_updates::Prior;
use crate::sampler::RobustConstraint;

const CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AbcConfig {
    /// Prior-predictive simulations, each a full sample of size N.
    pub n_sims: usize,
    /// Number of closest simulations retained.
    pub keep: usize,
    pub seed: u64,
    /// Stop simulating once this many seconds have elapsed; `n_sims` is then
    /// an upper bound. Results are no longer reproducible across machines.
    pub time_limit_secs: Option<f64>,
}

impl Default for AbcConfig {
    fn default() -> Self {
        AbcConfig {
            n_sims: 100_000,
            keep: 1000,
            seed: 0,
            time_limit_secs: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbcOutput {
    pub family: FamilyKind,
    pub param_names: Vec<String>,
    /// Kept parameter draws in simulation order.
    pub draws: Vec<Vec<f64>>,
    pub distances: Vec<f64>,
    /// Prior-predictive standard deviation of each summary; distances are
    /// Euclidean after dividing by these.
    pub scale: Vec<f64>,
    pub n_sims: usize,
    pub seed: u64,
    pub wall_clock_secs: f64,
}

impl AbcOutput {
    pub fn column(&self, k: usize) -> Vec<f64> {
        crate::diagnostics::column(&self.draws, k)
    }
}

struct Sim {
    theta: Vec<f64>,
    summary: Vec<f64>,
}

fn simulate_chunk(
    chunk: usize,
    count: usize,
    constraint: &RobustConstraint,
    prior: &Prior,
    seed: u64,
) -> Result<Vec<Sim>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    let n = constraint.n();
    let mut x = vec![0.0; n];
    (0..count)
        .map(|_| {
            let f = prior.sample(&mut rng)?;
            for v in x.iter_mut() {
                *v = f.sample(&mut rng);
            }
            Ok(Sim {
                theta: f.theta(),
                summary: constraint.summarize(&x)?,
            })
        })
        .collect()
}

/// Simulates parameters from the prior and samples of size N from the model,
/// and keeps the `keep` simulations whose summaries are closest to the
/// observed ones. Needs a proper prior.
pub fn abc_rejection(
    kind: FamilyKind,
    constraint: &RobustConstraint,
    prior: &Prior,
    config: &AbcConfig,
) -> Result<AbcOutput> {
    let start = Instant::now();
    prior.validate()?;
    constraint.validate()?;
    if prior.family_kind() != kind {
        return Err(Error::Config(format!(
            "prior {prior:?} does not match the {} family",
            kind.name()
        )));
    }
    if config.keep == 0 || config.keep > config.n_sims {
        return Err(Error::Config(format!(
            "keep must be in 1..={}, got {}",
            config.n_sims, config.keep
        )));
    }
    let n_chunks = config.n_sims.div_ceil(CHUNK);
    // Rounds of chunks so a time limit can stop between them.
    let round = if config.time_limit_secs.is_some() {
        rayon::current_num_threads().max(1) * 4
    } else {
        n_chunks
    };
    let mut sims: Vec<Sim> = Vec::with_capacity(config.n_sims);
    let mut next = 0;
    while next < n_chunks {
        let end = (next + round).min(n_chunks);
        let batch: Vec<Vec<Sim>> = (next..end)
            .into_par_iter()
            .map(|c| {
                let count = CHUNK.min(config.n_sims - c * CHUNK);
                simulate_chunk(c, count, constraint, prior, config.seed)
            })
            .collect::<Result<_>>()?;
        sims.extend(batch.into_iter().flatten());
        next = end;
        if let Some(limit) = config.time_limit_secs {
            if start.elapsed().as_secs_f64() >= limit {
                break;
            }
        }
    }
    if sims.len() < config.keep {
        return Err(Error::Config(format!(
            "only {} simulations fitted in the time limit, fewer than keep = {}",
            sims.len(),
            config.keep
        )));
    }

    let observed = constraint.observed();
    let d = observed.len();
    let m = sims.len() as f64;
    let scale: Vec<f64> = (0..d)
        .map(|k| {
            let mean = sims.iter().map(|s| s.summary[k]).sum::<f64>() / m;
            let var = sims
                .iter()
                .map(|s| (s.summary[k] - mean).powi(2))
                .sum::<f64>()
                / (m - 1.0).max(1.0);
            if var > 0.0 && var.is_finite() {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut scored: Vec<(f64, usize)> = sims
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let d2: f64 = (0..d)
                .map(|k| ((s.summary[k] - observed[k]) / scale[k]).powi(2))
                .sum();
            (d2.sqrt(), i)
        })
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if config.keep < scored.len() {
        scored.select_nth_unstable_by(config.keep - 1, cmp);
        scored.truncate(config.keep);
    }
    scored.sort_by_key(|p| p.1);

    Ok(AbcOutput {
        family: kind,
        param_names: kind.param_names().iter().map(|s| s.to_string()).collect(),
        draws: scored.iter().map(|&(_, i)| sims[i].theta.clone()).collect(),
        distances: scored.iter().map(|p| p.0).collect(),
        scale,
        n_sims: sims.len(),
        seed: config.seed,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}
