//! Zone configurations visited by the median/MAD kernel at N = 9, started
//! from every feasible configuration.
//!
//! cargo run --release --example reachability

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_gibbs::med_mad_conditional::{
    feasible_configs, ladder_state, MedMadConstraints, MedMadEngine,
};
use robust_gibbs::prelude::*;

fn main() -> Result<()> {
    let c = MedMadConstraints::new(9, 0.0, 1.0)?;
    let family = Family::gaussian(0.0, 1.4826f64.powi(2))?;
    let all = feasible_configs(&c);
    for start in &all {
        let mut engine = MedMadEngine::from_state(c, ladder_state(&c, *start)?, None);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = BTreeSet::from([*start]);
        let mut sweeps = 0;
        while seen.len() < all.len() && sweeps < 100_000 {
            engine.update(&family, &mut rng)?;
            seen.insert(engine.state().config(&c));
            sweeps += 1;
        }
        println!(
            "from {start}: {}/{} after {sweeps} sweeps",
            seen.len(),
            all.len()
        );
    }
    Ok(())
}
