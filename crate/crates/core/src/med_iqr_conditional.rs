//! Latent-data engine for a sample known only through its median `m` and
//! interquartile range `i`.
//!
//! The quartiles are type-7 sample quantiles, so which order statistics are
//! involved depends on `N mod 4`:
//!
//! | N      | determining indices                     | free values                        |
//! |--------|-----------------------------------------|------------------------------------|
//! | 4n+1   | n+1, 2n+1, 3n+1                         | X_(n+1)                            |
//! | 4k+3   | k+1, k+2, 2k+2, 3k+2, 3k+3              | X_(k+1), X_(3k+2), X_(3k+3)        |
//! | 4k     | k, k+1, 2k, 2k+1, 3k, 3k+1              | X_(k), X_(2k), X_(3k), X_(3k+1)    |
//! | 4k+2   | k+1, k+2, 2k+1, 2k+2, 3k+1, 3k+2        | X_(k+1), X_(2k+1), X_(3k+1), X_(3k+2) |
//!
//! The remaining determining values follow from the constraints:
//! `X_(i1+1) = ((1-g3) X_(i3) + g3 X_(i3+1) - (1-g1) X_(i1) - i) / g1` and,
//! for even `N`, `X_(i2+1) = 2m - X_(i2)`. The maps are affine, so their
//! Jacobians cancel in every Metropolis ratio.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::distributions::Family;
use crate::error::{Error, Result};
use crate::layout::{PinnedLayout, RwTuning};
use crate::order_stats::{
    empirical_quantile, iqr, joint_logdensity_unchecked, orderstat_variance_approx,
    quantile_sorted, sorted_copy, OrderStatSpec,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MedIqrCase {
    /// `N = 4n + 1`: all three quartiles are single order statistics.
    FourNPlusOne { n: usize },
    /// `N = 4k + 3`: the median is an order statistic, both quartiles are
    /// midpoints.
    FourKPlusThree { k: usize },
    /// `N = 4k`: quartile weights 0.75 and 0.25.
    FourK { k: usize },
    /// `N = 4k + 2`: quartile weights 0.25 and 0.75.
    FourKPlusTwo { k: usize },
}

impl MedIqrCase {
    /// Dispatches on `N mod 4`. Sizes too small for the quartiles to use
    /// distinct order statistics (`N < 5`, `N = 6`) are rejected.
    pub fn from_n(n: usize) -> Result<Self> {
        let case = match n % 4 {
            1 => MedIqrCase::FourNPlusOne { n: n / 4 },
            3 => MedIqrCase::FourKPlusThree { k: n / 4 },
            0 => MedIqrCase::FourK { k: n / 4 },
            _ => MedIqrCase::FourKPlusTwo { k: n / 4 },
        };
        if n < case.min_n() {
            return Err(Error::Config(format!(
                "median/IQR constraints need N >= {} for N = {n}",
                case.min_n()
            )));
        }
        Ok(case)
    }

    fn min_n(self) -> usize {
        match self {
            MedIqrCase::FourNPlusOne { .. } => 5,
            MedIqrCase::FourKPlusThree { .. } => 7,
            MedIqrCase::FourK { .. } => 8,
            MedIqrCase::FourKPlusTwo { .. } => 10,
        }
    }

    /// `(i1, i2, i3, g1, g3)`: the lower order statistic and interpolation
    /// weight of each quartile.
    pub fn quartile_indices(self) -> (usize, usize, usize, f64, f64) {
        match self {
            MedIqrCase::FourNPlusOne { n } => (n + 1, 2 * n + 1, 3 * n + 1, 0.0, 0.0),
            MedIqrCase::FourKPlusThree { k } => (k + 1, 2 * k + 2, 3 * k + 2, 0.5, 0.5),
            MedIqrCase::FourK { k } => (k, 2 * k, 3 * k, 0.75, 0.25),
            MedIqrCase::FourKPlusTwo { k } => (k + 1, 2 * k + 1, 3 * k + 1, 0.25, 0.75),
        }
    }

    /// Determining index set, increasing.
    pub fn determining(self) -> Vec<usize> {
        let (i1, i2, i3, _, _) = self.quartile_indices();
        match self {
            MedIqrCase::FourNPlusOne { .. } => vec![i1, i2, i3],
            MedIqrCase::FourKPlusThree { .. } => vec![i1, i1 + 1, i2, i3, i3 + 1],
            _ => vec![i1, i1 + 1, i2, i2 + 1, i3, i3 + 1],
        }
    }

    /// Indices of the free order statistics, in update order.
    pub fn free_indices(self) -> Vec<usize> {
        let (i1, i2, i3, _, _) = self.quartile_indices();
        match self {
            MedIqrCase::FourNPlusOne { .. } => vec![i1],
            MedIqrCase::FourKPlusThree { .. } => vec![i1, i3, i3 + 1],
            _ => vec![i1, i2, i3, i3 + 1],
        }
    }
}

/// Free and reconstructed order statistics for the size-`N` case, as
/// 1-based indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreeVariables {
    pub free: Vec<usize>,
    pub reconstructed: Vec<usize>,
    pub fixed: Vec<usize>,
}

pub fn mediqr_free_variables(case: MedIqrCase) -> FreeVariables {
    let (i1, i2, i3, _, _) = case.quartile_indices();
    match case {
        MedIqrCase::FourNPlusOne { .. } => FreeVariables {
            free: vec![i1],
            reconstructed: vec![i3],
            fixed: vec![i2],
        },
        MedIqrCase::FourKPlusThree { .. } => FreeVariables {
            free: case.free_indices(),
            reconstructed: vec![i1 + 1],
            fixed: vec![i2],
        },
        _ => FreeVariables {
            free: case.free_indices(),
            reconstructed: vec![i1 + 1, i2 + 1],
            fixed: vec![],
        },
    }
}

#[derive(Clone, Debug)]
pub struct MedIqrConstraints {
    m: f64,
    iqr: f64,
    n: usize,
    case: MedIqrCase,
    spec: OrderStatSpec,
}

impl MedIqrConstraints {
    pub fn new(n: usize, m: f64, iqr: f64) -> Result<Self> {
        if !m.is_finite() || !(iqr > 0.0) || !iqr.is_finite() {
            return Err(Error::Config(format!(
                "median {m} and IQR {iqr} must be finite with IQR > 0"
            )));
        }
        let case = MedIqrCase::from_n(n)?;
        let spec = OrderStatSpec::new(n, case.determining())?;
        Ok(MedIqrConstraints {
            m,
            iqr,
            n,
            case,
            spec,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn median(&self) -> f64 {
        self.m
    }

    pub fn iqr(&self) -> f64 {
        self.iqr
    }

    pub fn case(&self) -> MedIqrCase {
        self.case
    }

    pub fn determining(&self) -> &[usize] {
        self.spec.indices()
    }

    pub fn n_free(&self) -> usize {
        self.case.free_indices().len()
    }

    /// Determining order statistics (in increasing index order) implied by
    /// the free values.
    pub fn reconstruct(&self, free: &[f64]) -> Result<Vec<f64>> {
        if free.len() != self.n_free() {
            return Err(Error::Domain(format!(
                "{} free values, case {:?} needs {}",
                free.len(),
                self.case,
                self.n_free()
            )));
        }
        let (m, r) = (self.m, self.iqr);
        let (_, _, _, g1, g3) = self.case.quartile_indices();
        Ok(match self.case {
            MedIqrCase::FourNPlusOne { .. } => vec![free[0], m, free[0] + r],
            MedIqrCase::FourKPlusThree { .. } => {
                let (a, c, d) = (free[0], free[1], free[2]);
                let q1 = (1.0 - g3) * c + g3 * d - r;
                vec![a, (q1 - (1.0 - g1) * a) / g1, m, c, d]
            }
            _ => {
                let (a, b, c, d) = (free[0], free[1], free[2], free[3]);
                let q1 = (1.0 - g3) * c + g3 * d - r;
                vec![a, (q1 - (1.0 - g1) * a) / g1, b, 2.0 * m - b, c, d]
            }
        })
    }

    /// Inverse of [`Self::reconstruct`].
    pub fn extract_free(&self, pins: &[f64]) -> Vec<f64> {
        match self.case {
            MedIqrCase::FourNPlusOne { .. } => vec![pins[0]],
            MedIqrCase::FourKPlusThree { .. } => vec![pins[0], pins[3], pins[4]],
            _ => vec![pins[0], pins[2], pins[4], pins[5]],
        }
    }

    /// Position of each free value within the pinned vector.
    fn free_slots(&self) -> &'static [usize] {
        match self.case {
            MedIqrCase::FourNPlusOne { .. } => &[0],
            MedIqrCase::FourKPlusThree { .. } => &[0, 3, 4],
            _ => &[0, 2, 4, 5],
        }
    }

    /// Largest relative deviation of the sample median and IQR of `x` from
    /// the observed values.
    pub fn residual(&self, x: &[f64]) -> Result<f64> {
        let s = sorted_copy(x);
        let dm = (quantile_sorted(&s, 0.5)? - self.m).abs() / self.m.abs().max(1.0);
        let di = (iqr(x)? - self.iqr).abs() / self.iqr.abs().max(1.0);
        Ok(dm.max(di))
    }

    fn layout(&self) -> PinnedLayout {
        PinnedLayout::new(self.n, self.spec.indices())
    }
}

/// Unnormalised log density of the free order statistics given the median
/// and IQR. For `N = 4n+1` the support is `X_(n+1)` in `(m - i, m)`.
pub fn conditional_mediqr_logdensity(
    c: &MedIqrConstraints,
    family: &Family,
    free: &[f64],
) -> Result<f64> {
    let pins = c.reconstruct(free)?;
    Ok(joint_logdensity_unchecked(family, &c.spec, &pins))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// Affine rescaling of a draw from the starting distribution.
    #[default]
    Linear,
    /// Fixed ladder of values around the median, for bounded supports.
    Deterministic,
}

impl std::str::FromStr for InitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(InitMode::Linear),
            "deterministic" => Ok(InitMode::Deterministic),
            _ => Err(Error::Config(format!("unknown init mode '{s}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MedIqrState {
    x: Vec<f64>,
    pins: Vec<f64>,
}

impl MedIqrState {
    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn pins(&self) -> &[f64] {
        &self.pins
    }
}

pub fn init_mediqr_state<R: Rng + ?Sized>(
    c: &MedIqrConstraints,
    family: &Family,
    rng: &mut R,
    mode: InitMode,
) -> Result<MedIqrState> {
    let state = match mode {
        InitMode::Linear => init_linear(c, family, rng)?,
        InitMode::Deterministic => init_ladder(c),
    };
    if let Some(v) = state
        .x
        .iter()
        .find(|&&v| family.ln_pdf(v) == f64::NEG_INFINITY)
    {
        return Err(Error::Initialization(format!(
            "{mode:?} initialisation puts {v} outside the support of the starting distribution"
        )));
    }
    if !c.layout().is_consistent(&state.x) {
        return Err(Error::Initialization(format!(
            "{mode:?} initialisation produced tied order statistics"
        )));
    }
    Ok(state)
}

fn init_linear<R: Rng + ?Sized>(
    c: &MedIqrConstraints,
    family: &Family,
    rng: &mut R,
) -> Result<MedIqrState> {
    for _ in 0..100 {
        let z: Vec<f64> = (0..c.n).map(|_| family.sample(rng)).collect();
        let mz = empirical_quantile(&z, 0.5)?;
        let iz = iqr(&z)?;
        if !(iz > 0.0) {
            continue;
        }
        let mut x: Vec<f64> = z.iter().map(|v| (v - mz) * c.iqr / iz + c.m).collect();
        x.sort_by(f64::total_cmp);
        let pins = c.reconstruct(&c.extract_free(&pick(&x, c.spec.indices())))?;
        c.layout().write_pins(&mut x, &pins);
        if c.layout().is_consistent(&x) {
            return Ok(MedIqrState { x, pins });
        }
    }
    Err(Error::Initialization(
        "could not draw a sample with distinct quartiles".into(),
    ))
}

fn pick(sorted: &[f64], indices: &[usize]) -> Vec<f64> {
    indices.iter().map(|&i| sorted[i - 1]).collect()
}

/// Ladder around the quartiles `m -+ i/2`: interpolated pairs straddle their
/// quartile at distance `i/8`, zones hold the midpoint of their bounding
/// order statistics, and the two outer zones sit `i/4` beyond them.
fn init_ladder(c: &MedIqrConstraints) -> MedIqrState {
    let (m, r) = (c.m, c.iqr);
    let (q1, q3) = (m - r / 2.0, m + r / 2.0);
    let d = r / 8.0;
    let (_, _, _, g1, g3) = c.case.quartile_indices();
    let free = match c.case {
        MedIqrCase::FourNPlusOne { .. } => vec![q1],
        MedIqrCase::FourKPlusThree { .. } => vec![q1 - g1 * d, q3 - g3 * d, q3 + (1.0 - g3) * d],
        _ => vec![q1 - g1 * d, m - d / 2.0, q3 - g3 * d, q3 + (1.0 - g3) * d],
    };
    let pins = c.reconstruct(&free).expect("free vector sized by case");
    let idx = c.spec.indices();
    let mut x = vec![0.0; c.n];
    for (k, w) in idx.windows(2).enumerate() {
        let mid = 0.5 * (pins[k] + pins[k + 1]);
        x[w[0]..w[1] - 1].iter_mut().for_each(|v| *v = mid);
    }
    x[..idx[0] - 1]
        .iter_mut()
        .for_each(|v| *v = pins[0] - r / 4.0);
    x[*idx.last().unwrap()..]
        .iter_mut()
        .for_each(|v| *v = pins[pins.len() - 1] + r / 4.0);
    c.layout().write_pins(&mut x, &pins);
    MedIqrState { x, pins }
}

/// One Metropolis sweep over the free order statistics in fixed cyclic
/// order. `scales` holds one multiplier per free value; the proposal
/// variance is `scale * Var(X_(i))` for the free index `i`.
pub fn mh_update_mediqr<R: Rng + ?Sized>(
    state: &mut MedIqrState,
    c: &MedIqrConstraints,
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
    let free_idx = c.case.free_indices();
    let slots = c.free_slots();
    let mut free = c.extract_free(&state.pins);
    let mut current = joint_logdensity_unchecked(family, &c.spec, &state.pins);
    let mut flags = Vec::with_capacity(free.len());
    for k in 0..free.len() {
        let var = orderstat_variance_approx(family, free_idx[k], c.n)?;
        let old = free[k];
        let z: f64 = rng.sample(StandardNormal);
        free[k] = old + (scales[k] * var).sqrt() * z;
        debug_assert_eq!(c.spec.indices()[slots[k]], free_idx[k]);
        let prop = c.reconstruct(&free)?;
        let proposed = joint_logdensity_unchecked(family, &c.spec, &prop);
        let accept = proposed > f64::NEG_INFINITY && rng.random::<f64>().ln() < proposed - current;
        if accept {
            state.pins = prop;
            current = proposed;
        } else {
            free[k] = old;
        }
        flags.push(accept);
    }
    if flags.iter().any(|&a| a) {
        let lay = c.layout();
        lay.write_pins(&mut state.x, &state.pins);
        lay.repair(&mut state.x, family, rng)?;
    }
    Ok(flags)
}

pub fn refill_free_coordinates_mediqr<R: Rng + ?Sized>(
    state: &mut MedIqrState,
    c: &MedIqrConstraints,
    family: &Family,
    rng: &mut R,
) -> Result<()> {
    c.layout().refill(&mut state.x, family, rng)
}

/// Constraints, state and tuning bundled for the Gibbs sampler.
#[derive(Clone, Debug)]
pub struct MedIqrEngine {
    constraints: MedIqrConstraints,
    state: MedIqrState,
    tuning: RwTuning,
}

impl MedIqrEngine {
    pub fn new<R: Rng + ?Sized>(
        constraints: MedIqrConstraints,
        family: &Family,
        rng: &mut R,
        mode: InitMode,
    ) -> Result<Self> {
        let state = init_mediqr_state(&constraints, family, rng, mode)?;
        let tuning = RwTuning::new(constraints.n_free(), 1.0, 0.44);
        Ok(MedIqrEngine {
            constraints,
            state,
            tuning,
        })
    }

    pub fn update<R: Rng + ?Sized>(
        &mut self,
        family: &Family,
        rng: &mut R,
        adapt: bool,
    ) -> Result<()> {
        let scales = self.tuning.scales();
        let flags = mh_update_mediqr(&mut self.state, &self.constraints, family, rng, &scales)?;
        self.tuning.record(&flags, adapt);
        refill_free_coordinates_mediqr(&mut self.state, &self.constraints, family, rng)
    }

    /// Log density of the current pins under `family` with the zone contents
    /// integrated out, up to a constant free of `family`.
    pub fn pinned_logdensity(&self, family: &Family) -> f64 {
        joint_logdensity_unchecked(family, &self.constraints.spec, &self.state.pins)
    }

    pub fn refill<R: Rng + ?Sized>(&mut self, family: &Family, rng: &mut R) -> Result<()> {
        refill_free_coordinates_mediqr(&mut self.state, &self.constraints, family, rng)
    }

    pub fn values(&self) -> &[f64] {
        self.state.values()
    }

    pub fn state(&self) -> &MedIqrState {
        &self.state
    }

    pub fn constraints(&self) -> &MedIqrConstraints {
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
        self.constraints.layout().is_consistent(&self.state.x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn case_dispatch() {
        assert!(MedIqrCase::from_n(4).is_err());
        assert!(MedIqrCase::from_n(6).is_err());
        assert_eq!(
            MedIqrCase::from_n(9).unwrap(),
            MedIqrCase::FourNPlusOne { n: 2 }
        );
        let c8 = MedIqrCase::from_n(8).unwrap();
        assert_eq!(c8.quartile_indices(), (2, 4, 6, 0.75, 0.25));
        let c7 = MedIqrCase::from_n(7).unwrap();
        let fv = mediqr_free_variables(c7);
        assert_eq!(fv.free, vec![2, 5, 6]);
        assert_eq!(fv.reconstructed, vec![3]);
        let fv9 = mediqr_free_variables(MedIqrCase::from_n(9).unwrap());
        assert_eq!((fv9.free, fv9.reconstructed), (vec![3], vec![7]));
        for n in 5..200 {
            if n == 6 {
                continue;
            }
            let case = MedIqrCase::from_n(n).unwrap();
            let idx = case.determining();
            assert!(idx.windows(2).all(|w| w[0] < w[1]) && *idx.last().unwrap() <= n);
        }
    }

    #[test]
    fn ladder_for_nine() {
        let c = MedIqrConstraints::new(9, 0.0, 4.0).unwrap();
        let f = Family::gaussian(0.0, 1.0).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let s = init_mediqr_state(&c, &f, &mut r, InitMode::Deterministic).unwrap();
        assert_eq!(
            s.values(),
            &[-3.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 3.0]
        );
    }

    #[test]
    fn linear_init_and_residual() {
        let f = Family::gaussian(0.0, 1.0).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(2);
        for n in [5, 7, 8, 10, 11, 12, 101] {
            let c = MedIqrConstraints::new(n, -2.0, 6.0).unwrap();
            for mode in [InitMode::Linear, InitMode::Deterministic] {
                let s = init_mediqr_state(&c, &f, &mut r, mode).unwrap();
                assert!(c.residual(s.values()).unwrap() < 1e-9, "n={n} {mode:?}");
            }
        }
    }

    #[test]
    fn weibull_ladder_outside_support() {
        let c = MedIqrConstraints::new(9, 1.0, 4.0).unwrap();
        let f = Family::weibull3(0.0, 1.0, 2.0).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let e = init_mediqr_state(&c, &f, &mut r, InitMode::Deterministic).unwrap_err();
        assert!(e.is_infeasible());
    }

    #[test]
    fn feasibility_window_for_five() {
        let c = MedIqrConstraints::new(5, 0.0, 2.0).unwrap();
        let f = Family::gaussian(0.0, 1.0).unwrap();
        assert!(conditional_mediqr_logdensity(&c, &f, &[-1.0])
            .unwrap()
            .is_finite());
        assert_eq!(
            conditional_mediqr_logdensity(&c, &f, &[-2.1]).unwrap(),
            f64::NEG_INFINITY
        );
        assert_eq!(
            conditional_mediqr_logdensity(&c, &f, &[0.1]).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(conditional_mediqr_logdensity(&c, &f, &[]).is_err());
    }

    #[test]
    fn shift_of_quartiles_in_4n_plus_1() {
        let c = MedIqrConstraints::new(9, 0.0, 4.0).unwrap();
        let p = c.reconstruct(&[-1.5]).unwrap();
        assert_eq!(p, vec![-1.5, 0.0, 2.5]);
    }

    #[test]
    fn sweeps_preserve_constraints_all_cases() {
        let f = Family::gaussian(0.3, 2.0).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(4);
        for n in [5, 7, 8, 10, 13, 15, 16, 18] {
            let c = MedIqrConstraints::new(n, 0.5, 1.7).unwrap();
            let mut e = MedIqrEngine::new(c, &f, &mut r, InitMode::Linear).unwrap();
            for _ in 0..300 {
                let before = e.values().to_vec();
                e.update(&f, &mut r, true).unwrap();
                assert!(e.residual().unwrap() < 1e-9, "n={n}");
                assert!(e.is_consistent());
                assert_ne!(before, e.values());
            }
        }
    }

    #[test]
    fn reconstruct_roundtrip() {
        for n in [9, 11, 12, 14] {
            let c = MedIqrConstraints::new(n, 0.0, 2.0).unwrap();
            let free: Vec<f64> = (0..c.n_free()).map(|k| k as f64 * 0.3 - 1.0).collect();
            let pins = c.reconstruct(&free).unwrap();
            assert_eq!(c.extract_free(&pins), free);
        }
    }
}
