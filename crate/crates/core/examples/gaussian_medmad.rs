//! Gaussian posterior from a median and MAD alone, next to the closed-form
//! Normal-Inverse-Gamma approximation.
//!
//! cargo run --release --example gaussian_medmad

use robust_gibbs::diagnostics::summarize;
use robust_gibbs::prelude::*;

fn main() -> Result<()> {
    let (n, m, s) = (1000, -2.0, 3.0);
    let prior = NigParams::new(0.0, 0.001, 0.001, 0.001)?;
    let constraint = RobustConstraint::med_mad(n, m, s)?;
    let config = GibbsConfig {
        iterations: 10_000,
        seed: 1,
        ..Default::default()
    };
    let out = run_chain(
        FamilyKind::Gaussian,
        &constraint,
        &Prior::Nig(prior),
        &config,
    )?;
    let approx = nig_approx_medmad(m, s, n, &prior)?;

    println!(
        "{} draws after {} burn-in sweeps",
        out.draws.len(),
        out.burn_in
    );
    for (k, name) in out.param_names.iter().enumerate() {
        let sm = summarize(&out.column(k))?;
        println!(
            "{name:>7}: mean {:8.4}  sd {:.4}  95% [{:.4}, {:.4}]  ess {:.0}",
            sm.mean,
            sm.sd,
            sm.q025,
            sm.q975,
            sm.ess.unwrap_or(f64::NAN)
        );
    }
    let (mu_lo, s2_lo) = approx.marginal_quantiles(0.025);
    let (mu_hi, s2_hi) = approx.marginal_quantiles(0.975);
    println!(
        "approximation: mu {:.4} [{mu_lo:.4}, {mu_hi:.4}], sigma2 {:.4} [{s2_lo:.4}, {s2_hi:.4}]",
        approx.mu0,
        approx.sigma2_mean()
    );
    Ok(())
}
