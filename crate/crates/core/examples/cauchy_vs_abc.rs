//! Cauchy location and scale from a median and MAD: Gibbs against
//! rejection ABC given ten times as many simulations.
//!
//! cargo run --release --example cauchy_vs_abc

use robust_gibbs::diagnostics::summarize;
use robust_gibbs::prelude::*;

fn main() -> Result<()> {
    let constraint = RobustConstraint::med_mad(1000, -2.0, 3.0)?;
    let prior = Prior::default_for(FamilyKind::Cauchy);
    let config = GibbsConfig {
        iterations: 4000,
        burn_in: Some(1000),
        seed: 11,
        ..Default::default()
    };
    let chain = run_chain(FamilyKind::Cauchy, &constraint, &prior, &config)?;
    let abc = abc_rejection(
        FamilyKind::Cauchy,
        &constraint,
        &prior,
        &AbcConfig {
            n_sims: 10 * config.iterations,
            keep: chain.draws.len(),
            seed: 11,
            time_limit_secs: None,
        },
    )?;
    println!(
        "gibbs {:.1}s, abc {:.1}s",
        chain.wall_clock_secs, abc.wall_clock_secs
    );
    for (k, name) in chain.param_names.iter().enumerate() {
        let g = summarize(&chain.column(k))?;
        let a = summarize(&abc.column(k))?;
        println!(
            "{name:>6}: gibbs median {:7.3} sd {:6.3} | abc median {:7.3} sd {:6.3}",
            g.q50, g.sd, a.q50, a.sd
        );
    }
    Ok(())
}
