//! Translated Weibull fitted to M quantiles: two quantiles leave the three
//! parameters unidentified, three or more pin them down.
//!
//! cargo run --release --example weibull_quantiles

use robust_gibbs::diagnostics::summarize;
use robust_gibbs::prelude::*;

fn main() -> Result<()> {
    let truth = Family::weibull3(10.0, 2.0, 3.0)?;
    for m in [2usize, 3, 9] {
        let pairs: Vec<(f64, f64)> = (1..=m)
            .map(|j| {
                let p = j as f64 / (m + 1) as f64;
                truth.quantile(p).map(|q| (p, q))
            })
            .collect::<Result<_>>()?;
        let constraint = RobustConstraint::quantiles(1000, &pairs)?;
        let config = GibbsConfig {
            iterations: 12_000,
            burn_in: Some(3000),
            seed: 5,
            ..Default::default()
        };
        let out = run_chain(
            FamilyKind::Weibull3,
            &constraint,
            &Prior::default_for(FamilyKind::Weibull3),
            &config,
        )?;
        print!("M={m}:");
        for (k, name) in out.param_names.iter().enumerate() {
            let s = summarize(&out.column(k))?;
            print!("  {name} [{:.2}, {:.2}]", s.q025, s.q975);
        }
        println!();
    }
    Ok(())
}
