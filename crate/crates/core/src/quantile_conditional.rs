//! Latent-data engine for a sample known only through a set of empirical
//! quantiles `Q(X, p_j) = q_j`.
//!
//! Each quantile is either carried by a single order statistic (`g_j = 0`)
//! or interpolated between `X_(i_j)` and `X_(i_j+1)`. In the second case
//! `X_(i_j)` is free and its partner is reconstructed as
//! `(q_j - (1 - g_j) X_(i_j)) / g_j`. The map is linear with constant
//! Jacobian, so the Jacobian cancels from every Metropolis ratio and is left
//! out of [`conditional_orderstat_logdensity`].

use rand::Rng;
use rand_distr::StandardNormal;

use crate::distributions::Family;
use crate::error::{Error, Result};
use crate::layout::PinnedLayout;
pub use crate::layout::RwTuning;
use crate::order_stats::{
    empirical_quantile, joint_logdensity_unchecked, orderstat_variance_approx, quantile_index,
    OrderStatSpec, QuantileIndex,
};

/// Observed quantiles of a sample of size `N`.
#[derive(Clone, Debug)]
pub struct QuantileConstraints {
    n: usize,
    probs: Vec<f64>,
    values: Vec<f64>,
    index: Vec<QuantileIndex>,
    spec: OrderStatSpec,
    /// For each constraint, the position of `X_(i_j)` within the pinned set.
    slot: Vec<usize>,
    /// Constraints that are interpolated (`g_j > 0`).
    free: Vec<usize>,
}

impl QuantileConstraints {
    /// Validates `(p_j, q_j)` pairs for a sample of size `n`. Both sequences
    /// must be strictly increasing and no order statistic may be shared by
    /// two constraints.
    pub fn new(n: usize, pairs: &[(f64, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("sample size must be positive".into()));
        }
        if pairs.is_empty() {
            return Err(Error::Config(
                "at least one quantile constraint is required".into(),
            ));
        }
        for (j, &(p, q)) in pairs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) || !q.is_finite() {
                return Err(Error::Config(format!(
                    "constraint {j}: p={p}, q={q} is invalid"
                )));
            }
        }
        for (j, w) in pairs.windows(2).enumerate() {
            if !(w[0].0 < w[1].0) || !(w[0].1 < w[1].1) {
                return Err(Error::Config(format!(
                    "constraints {j} and {}: probabilities and values must both increase",
                    j + 1
                )));
            }
        }
        let index: Vec<QuantileIndex> = pairs.iter().map(|&(p, _)| quantile_index(p, n)).collect();
        let mut indices = Vec::new();
        let mut slot = Vec::new();
        let mut free = Vec::new();
        for (j, qi) in index.iter().enumerate() {
            if let Some(&last) = indices.last() {
                if qi.i <= last {
                    return Err(Error::Config(format!(
                        "constraints {} and {j} share order statistic {} (quantiles too close for N={n})",
                        j - 1,
                        qi.i
                    )));
                }
            }
            slot.push(indices.len());
            indices.push(qi.i);
            if !qi.is_deterministic() {
                free.push(j);
                indices.push(qi.i + 1);
            }
        }
        let spec = OrderStatSpec::new(n, indices)?;
        Ok(QuantileConstraints {
            n,
            probs: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
            index,
            spec,
            slot,
            free,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn quantile_indices(&self) -> &[QuantileIndex] {
        &self.index
    }

    /// The determining index set `I`, increasing.
    pub fn determining(&self) -> &[usize] {
        self.spec.indices()
    }

    /// Indices `j` of the interpolated constraints, in order.
    pub fn interpolated(&self) -> &[usize] {
        &self.free
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Values of the determining order statistics given the free values
    /// `X_(i_j)`, `j` interpolated.
    pub fn reconstruct(&self, free_values: &[f64]) -> Result<Vec<f64>> {
        if free_values.len() != self.free.len() {
            return Err(Error::Domain(format!(
                "{} free values for {} interpolated quantiles",
                free_values.len(),
                self.free.len()
            )));
        }
        let mut pins = vec![0.0; self.spec.indices().len()];
        let mut it = free_values.iter();
        for (j, qi) in self.index.iter().enumerate() {
            let s = self.slot[j];
            if qi.is_deterministic() {
                pins[s] = self.values[j];
            } else {
                let x = *it.next().unwrap();
                pins[s] = x;
                pins[s + 1] = self.partner(j, x);
            }
        }
        Ok(pins)
    }

    /// Inverse of [`Self::reconstruct`].
    pub fn extract_free(&self, pins: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&j| pins[self.slot[j]]).collect()
    }

    fn partner(&self, j: usize, x: f64) -> f64 {
        let g = self.index[j].g;
        (self.values[j] - (1.0 - g) * x) / g
    }

    /// Largest relative deviation `|Q(x, p_j) - q_j| / max(1, |q_j|)`.
    pub fn residual(&self, x: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (&p, &q) in self.probs.iter().zip(&self.values) {
            let got = empirical_quantile(x, p)?;
            worst = worst.max((got - q).abs() / q.abs().max(1.0));
        }
        Ok(worst)
    }
}

/// Unnormalised log conditional density of the free order statistics given
/// every quantile constraint.
pub fn conditional_orderstat_logdensity(
    c: &QuantileConstraints,
    family: &Family,
    free_values: &[f64],
) -> Result<f64> {
    let pins = c.reconstruct(free_values)?;
    Ok(joint_logdensity_unchecked(family, &c.spec, &pins))
}

/// Latent vector in zone layout together with the current values of the
/// determining order statistics.
#[derive(Clone, Debug)]
pub struct QuantileState {
    x: Vec<f64>,
    pins: Vec<f64>,
}

impl QuantileState {
    /// The latent vector. Positions `i - 1` for `i` in the determining set
    /// hold `X_(i)`; the zones in between are unordered.
    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn pins(&self) -> &[f64] {
        &self.pins
    }

    pub fn free_values(&self, c: &QuantileConstraints) -> Vec<f64> {
        c.extract_free(&self.pins)
    }
}

fn layout(c: &QuantileConstraints) -> PinnedLayout {
    PinnedLayout::new(c.n, c.spec.indices())
}

/// Builds a latent vector satisfying every constraint under the starting
/// parameters. Interpolated quantiles are split around `q_j` at a distance
/// set by the approximate standard deviation of `X_(i_j)`, capped so that
/// neighbouring pairs cannot overlap.
pub fn init_quantile_state<R: Rng + ?Sized>(
    c: &QuantileConstraints,
    family: &Family,
    rng: &mut R,
) -> Result<QuantileState> {
    let support = family.support();
    for (j, &q) in c.values.iter().enumerate() {
        if !support.contains(q) || family.ln_pdf(q) == f64::NEG_INFINITY {
            return Err(Error::Initialization(format!(
                "constraint {j}: q={q} has no density under the starting parameters"
            )));
        }
    }
    let mut free = Vec::with_capacity(c.free.len());
    for &j in &c.free {
        let QuantileIndex { i, g, .. } = c.index[j];
        let q = c.values[j];
        let mut eps = orderstat_variance_approx(family, i, c.n)
            .map(f64::sqrt)
            .unwrap_or(1.0);
        let lo = if j > 0 { c.values[j - 1] } else { support.lo };
        let hi = c.values.get(j + 1).copied().unwrap_or(support.hi);
        if lo.is_finite() {
            eps = eps.min((q - lo) / (3.0 * g));
        }
        if hi.is_finite() {
            eps = eps.min((hi - q) / (3.0 * (1.0 - g)));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::Initialization(format!(
                "constraint {j}: cannot split q={q}"
            )));
        }
        free.push(q - eps * g);
    }
    let pins = c.reconstruct(&free)?;
    if let Some(k) = pins
        .iter()
        .position(|&v| family.ln_pdf(v) == f64::NEG_INFINITY)
    {
        return Err(Error::Initialization(format!(
            "order statistic {} starts at {} outside the support",
            c.spec.indices()[k],
            pins[k]
        )));
    }
    let mut state = QuantileState {
        x: vec![0.0; c.n],
        pins,
    };
    let lay = layout(c);
    lay.write_pins(&mut state.x, &state.pins);
    lay.refill(&mut state.x, family, rng).map_err(|e| match e {
        Error::InfeasibleInterval { lo, hi } => Error::Initialization(format!(
            "zone ({lo}, {hi}) has no mass under the starting parameters"
        )),
        e => e,
    })?;
    Ok(state)
}

/// One sweep of Gaussian random-walk Metropolis-Hastings over the free order
/// statistics with a common scale. Returns one accept flag per free value.
pub fn mh_update_orderstats<R: Rng + ?Sized>(
    state: &mut QuantileState,
    c: &QuantileConstraints,
    family: &Family,
    rng: &mut R,
    scale: f64,
) -> Result<Vec<bool>> {
    mh_update_scaled(state, c, family, rng, &vec![scale; c.n_free()])
}

/// As [`mh_update_orderstats`] with one scale per free value. The proposal
/// variance of coordinate `j` is `scale_j * Var(X_(i_j)) / (1 - g_j)`.
///
/// Accepted moves leave the zone coordinates consistent (any coordinate
/// crossing a moved pin is redrawn inside its zone), so the constraints
/// hold on return.
pub fn mh_update_scaled<R: Rng + ?Sized>(
    state: &mut QuantileState,
    c: &QuantileConstraints,
    family: &Family,
    rng: &mut R,
    scales: &[f64],
) -> Result<Vec<bool>> {
    if scales.len() != c.n_free() {
        return Err(Error::Domain(format!(
            "{} scales for {} free values",
            scales.len(),
            c.n_free()
        )));
    }
    let mut flags = Vec::with_capacity(c.n_free());
    let mut current = joint_logdensity_unchecked(family, &c.spec, &state.pins);
    let mut prop = state.pins.clone();
    for (k, &j) in c.free.iter().enumerate() {
        let QuantileIndex { i, g, .. } = c.index[j];
        let var = orderstat_variance_approx(family, i, c.n)?;
        let sd = (scales[k] * var / (1.0 - g)).sqrt();
        let s = c.slot[j];
        let z: f64 = rng.sample(StandardNormal);
        let x = state.pins[s] + sd * z;
        prop[s] = x;
        prop[s + 1] = c.partner(j, x);
        let proposed = joint_logdensity_unchecked(family, &c.spec, &prop);
        let accept = proposed > f64::NEG_INFINITY && rng.random::<f64>().ln() < proposed - current;
        if accept {
            state.pins[s] = prop[s];
            state.pins[s + 1] = prop[s + 1];
            current = proposed;
        } else {
            prop[s] = state.pins[s];
            prop[s + 1] = state.pins[s + 1];
        }
        flags.push(accept);
    }
    if flags.iter().any(|&a| a) {
        let lay = layout(c);
        lay.write_pins(&mut state.x, &state.pins);
        lay.repair(&mut state.x, family, rng)?;
    }
    Ok(flags)
}

/// Redraws every non-determining coordinate from `family` truncated to its
/// zone.
pub fn refill_free_coordinates<R: Rng + ?Sized>(
    state: &mut QuantileState,
    c: &QuantileConstraints,
    family: &Family,
    rng: &mut R,
) -> Result<()> {
    layout(c).refill(&mut state.x, family, rng)
}

/// Constraints, state and proposal tuning bundled for use inside a Gibbs
/// sampler.
#[derive(Clone, Debug)]
pub struct QuantileEngine {
    constraints: QuantileConstraints,
    state: QuantileState,
    tuning: RwTuning,
}

impl QuantileEngine {
    pub fn new<R: Rng + ?Sized>(
        constraints: QuantileConstraints,
        family: &Family,
        rng: &mut R,
    ) -> Result<Self> {
        let state = init_quantile_state(&constraints, family, rng)?;
        let tuning = RwTuning::new(constraints.n_free(), 1.0, 0.44);
        Ok(QuantileEngine {
            constraints,
            state,
            tuning,
        })
    }

    /// Metropolis sweep over the free order statistics followed by a full
    /// refill of the zones.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        family: &Family,
        rng: &mut R,
        adapt: bool,
    ) -> Result<()> {
        if self.constraints.n_free() > 0 {
            let scales = self.tuning.scales();
            let flags = mh_update_scaled(&mut self.state, &self.constraints, family, rng, &scales)?;
            self.tuning.record(&flags, adapt);
        }
        refill_free_coordinates(&mut self.state, &self.constraints, family, rng)
    }

    /// Log density of the current pins under `family` with the zone contents
    /// integrated out, up to a constant free of `family`.
    pub fn pinned_logdensity(&self, family: &Family) -> f64 {
        joint_logdensity_unchecked(family, &self.constraints.spec, &self.state.pins)
    }

    pub fn refill<R: Rng + ?Sized>(&mut self, family: &Family, rng: &mut R) -> Result<()> {
        refill_free_coordinates(&mut self.state, &self.constraints, family, rng)
    }

    pub fn values(&self) -> &[f64] {
        self.state.values()
    }

    pub fn state(&self) -> &QuantileState {
        &self.state
    }

    pub fn constraints(&self) -> &QuantileConstraints {
        &self.constraints
    }

    pub fn tuning(&self) -> &RwTuning {
        &self.tuning
    }

    pub fn tuning_mut(&mut self) -> &mut RwTuning {
        &mut self.tuning
    }

    pub fn residual(&self) -> Result<f64> {
        self.constraints.residual(&self.state.x)
    }

    pub fn is_consistent(&self) -> bool {
        layout(&self.constraints).is_consistent(&self.state.x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn rejects_bad_constraints() {
        assert!(QuantileConstraints::new(5, &[(0.5, 1.0), (0.4, 2.0)]).is_err());
        assert!(QuantileConstraints::new(5, &[(0.4, 1.0), (0.5, 0.0)]).is_err());
        // p = 0.5 and 0.6 with N = 5 both need X_(3)
        assert!(QuantileConstraints::new(5, &[(0.5, 0.0), (0.6, 1.0)]).is_err());
        assert!(QuantileConstraints::new(0, &[(0.5, 0.0)]).is_err());
        assert!(QuantileConstraints::new(5, &[]).is_err());
    }

    #[test]
    fn determining_set() {
        // N = 10: p = 0.25 -> h = 3.25, p = 0.5 -> h = 5.5, p = 0.9 -> h = 9.1
        let c = QuantileConstraints::new(10, &[(0.25, -1.0), (0.5, 0.0), (0.9, 2.0)]).unwrap();
        assert_eq!(c.determining(), &[3, 4, 5, 6, 9, 10]);
        assert_eq!(c.n_free(), 3);
        let c = QuantileConstraints::new(5, &[(0.5, 0.3)]).unwrap();
        assert_eq!(c.determining(), &[3]);
        assert_eq!(c.n_free(), 0);
    }

    #[test]
    fn single_median_init() {
        let c = QuantileConstraints::new(5, &[(0.5, 0.7)]).unwrap();
        let f = Family::gaussian(0.0, 1.0).unwrap();
        let s = init_quantile_state(&c, &f, &mut rng()).unwrap();
        let x = s.values();
        assert_eq!(x[2], 0.7);
        assert_eq!(x.iter().filter(|&&v| v < 0.7).count(), 2);
        assert_eq!(x.iter().filter(|&&v| v > 0.7).count(), 2);
    }

    #[test]
    fn interpolated_init_hits_constraint() {
        let c = QuantileConstraints::new(10, &[(0.25, -1.0), (0.5, 0.0), (0.9, 2.0)]).unwrap();
        let f = Family::gaussian(0.0, 1.0).unwrap();
        let s = init_quantile_state(&c, &f, &mut rng()).unwrap();
        for &j in c.interpolated() {
            let QuantileIndex { i, g, .. } = c.quantile_indices()[j];
            let lo = s.values()[i - 1];
            let hi = s.values()[i];
            let q = c.values()[j];
            assert!((g * hi + (1.0 - g) * lo - q).abs() < 1e-12);
        }
        assert!(c.residual(s.values()).unwrap() < 1e-9);
    }

    #[test]
    fn reconstruct_extract_roundtrip() {
        let c = QuantileConstraints::new(10, &[(0.25, -1.0), (0.5, 0.0), (0.9, 2.0)]).unwrap();
        let free = [-1.3, -0.2, 1.9];
        let pins = c.reconstruct(&free).unwrap();
        assert_eq!(c.extract_free(&pins), free.to_vec());
        assert!(c.reconstruct(&free[..2]).is_err());
    }

    #[test]
    fn density_partner_and_ordering() {
        let c = QuantileConstraints::new(4, &[(0.5, 0.0)]).unwrap();
        // h = 2.5: X_(2) = x, X_(3) = -x
        let f = Family::gaussian(0.0, 1.0).unwrap();
        let x = -0.4;
        let got = conditional_orderstat_logdensity(&c, &f, &[x]).unwrap();
        let spec = OrderStatSpec::new(4, vec![2, 3]).unwrap();
        let expect = crate::order_stats::joint_orderstat_logdensity(&f, &spec, &[x, 0.4]).unwrap();
        assert!((got - expect).abs() < 1e-12);
        assert_eq!(
            conditional_orderstat_logdensity(&c, &f, &[0.1]).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn weibull_support_violation_is_reported() {
        let c = QuantileConstraints::new(9, &[(0.5, -1.0)]).unwrap();
        let f = Family::weibull3(0.0, 1.0, 2.0).unwrap();
        let err = init_quantile_state(&c, &f, &mut rng()).unwrap_err();
        assert!(err.is_infeasible());
        assert!(err.to_string().contains("constraint 0"));
    }

    #[test]
    fn sweeps_preserve_constraints() {
        let c = QuantileConstraints::new(41, &[(0.12, -1.2), (0.53, 0.1), (0.81, 0.9)]).unwrap();
        let f = Family::gaussian(0.0, 1.0).unwrap();
        let mut r = rng();
        let mut e = QuantileEngine::new(c, &f, &mut r).unwrap();
        for _ in 0..500 {
            e.update(&f, &mut r, false).unwrap();
            assert!(e.residual().unwrap() < 1e-9);
            assert!(e.is_consistent());
        }
        let acc = e.tuning().acceptance().unwrap();
        assert!(acc > 0.05 && acc < 0.95, "acceptance {acc}");
    }

    #[test]
    fn rejected_proposal_leaves_state() {
        // a huge scale makes almost every proposal land in a -inf region
        let c = QuantileConstraints::new(4, &[(0.5, 0.0)]).unwrap();
        let f = Family::gaussian(0.0, 1.0).unwrap();
        let mut r = rng();
        let mut s = init_quantile_state(&c, &f, &mut r).unwrap();
        for _ in 0..50 {
            let before = s.values().to_vec();
            let flags = mh_update_orderstats(&mut s, &c, &f, &mut r, 1e12).unwrap();
            if !flags[0] {
                assert_eq!(before, s.values());
            }
        }
    }
}
