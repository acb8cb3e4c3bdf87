//! Truncated draws from each family, including far tails, checked against
//! the truncated CDF.
//!
//! cargo run --release --example truncated_sampling

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_gibbs::diagnostics::ks_one_sample;
use robust_gibbs::prelude::*;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let families = [
        Family::gaussian(0.0, 1.0)?,
        Family::cauchy(0.0, 1.0)?,
        Family::weibull3(0.0, 1.0, 2.0)?,
    ];
    let intervals = [
        Interval::new(0.2, 0.9)?,
        Interval::above(6.0),
        Interval::new(30.0, 30.5)?,
    ];
    for f in &families {
        for iv in &intervals {
            let mass = f.ln_mass(iv);
            match (0..20_000)
                .map(|_| f.sample_truncated(iv, &mut rng))
                .collect::<Result<Vec<f64>>>()
            {
                Ok(draws) => {
                    // in log space so that far tails do not underflow
                    let (a, b) = (f.ln_sf(iv.lo), f.ln_sf(iv.hi));
                    let ks =
                        ks_one_sample(&draws, |x| -(f.ln_sf(x) - a).exp_m1() / -(b - a).exp_m1());
                    println!("{:?} on {iv}: ln mass {mass:9.3}, KS {ks:.4}", f.kind());
                }
                Err(e) => println!("{:?} on {iv}: {e}", f.kind()),
            }
        }
    }
    Ok(())
}
