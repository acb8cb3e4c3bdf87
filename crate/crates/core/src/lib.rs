//! Bayesian posterior sampling for parametric families when only robust,
//! insufficient statistics of the data are available: a set of empirical
//! quantiles, the median and interquartile range, or the median and median
//! absolute deviation.
//!
//! The sampler is a two-block Gibbs scheme. The latent sample `X` is redrawn
//! conditionally on the observed statistics and the current parameters, then
//! the parameters are redrawn conditionally on `X`:
//!
//! * [`quantile_conditional`], [`med_iqr_conditional`] and
//!   [`med_mad_conditional`] hold the latent-data engines, one per kind of
//!   observed statistic; every update preserves the observed values exactly;
//! * [`posterior_updates`] holds the parameter block (conjugate
//!   Normal-Inverse-Gamma draws for the Gaussian family, Metropolis-Hastings
//!   for Cauchy and translated Weibull) and the closed-form Gaussian
//!   approximation for the (median, MAD) posterior;
//! * [`sampler`] orchestrates chains and [`abc`] provides a rejection-ABC
//!   baseline on the same summaries.
//!
//! ```
//! use robust_gibbs::prelude::*;
//!
//! let constraint = RobustConstraint::med_mad(1001, -2.0, 3.0).unwrap();
//! let prior = Prior::Nig(NigParams::new(0.0, 0.001, 0.001, 0.001).unwrap());
//! let config = GibbsConfig { iterations: 200, burn_in: Some(50), seed: 7, ..Default::default() };
//! let out = run_chain(FamilyKind::Gaussian, &constraint, &prior, &config).unwrap();
//! assert_eq!(out.draws.len(), 150);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abc;
pub mod cli;
pub mod diagnostics;
pub mod distributions;
pub mod error;
mod layout;
pub mod med_iqr_conditional;
pub mod med_mad_conditional;
pub mod order_stats;
pub mod posterior_updates;
pub mod quantile_conditional;
pub mod sampler;
pub mod validate;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::abc::{abc_rejection, AbcConfig, AbcOutput};
    pub use crate::diagnostics::effective_sample_size;
    pub use crate::distributions::{Family, FamilyKind, Interval};
    pub use crate::error::{Error, Result};
    pub use crate::posterior_updates::{
        nig_approx_medmad, CauchyPriors, NigParams, Prior, WeibullPriors,
    };
    pub use crate::sampler::{run_chain, ChainOutput, GibbsConfig, RobustConstraint};
}
