//! Posterior from a median and interquartile range, with a check that every
//! latent sample carries the observed statistics.
//!
//! cargo run --release --example median_iqr

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_gibbs::diagnostics::summarize;
use robust_gibbs::med_iqr_conditional::{InitMode, MedIqrConstraints, MedIqrEngine};
use robust_gibbs::order_stats::{iqr, median};
use robust_gibbs::prelude::*;

fn main() -> Result<()> {
    // engine alone at fixed parameters
    let c = MedIqrConstraints::new(23, 1.0, 3.0)?;
    let family = Family::cauchy(1.0, 1.5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut engine = MedIqrEngine::new(c, &family, &mut rng, InitMode::Linear)?;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        engine.update(&family, &mut rng, true)?;
        let x = engine.values();
        worst = worst
            .max((median(x)? - 1.0).abs())
            .max((iqr(x)? - 3.0).abs());
    }
    println!("largest deviation over 1000 sweeps: {worst:.2e}");

    // full posterior
    let constraint = RobustConstraint::med_iqr(23, 1.0, 3.0)?;
    let out = run_chain(
        FamilyKind::Cauchy,
        &constraint,
        &Prior::default_for(FamilyKind::Cauchy),
        &GibbsConfig {
            iterations: 20_000,
            seed: 3,
            ..Default::default()
        },
    )?;
    for (k, name) in out.param_names.iter().enumerate() {
        let s = summarize(&out.column(k))?;
        println!(
            "{name:>6}: median {:.3}  95% [{:.3}, {:.3}]",
            s.q50, s.q025, s.q975
        );
    }
    Ok(())
}
