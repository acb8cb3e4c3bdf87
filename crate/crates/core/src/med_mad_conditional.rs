//! Latent-data engine for a sample known only through its median `m` and
//! median absolute deviation `s`.
//!
//! Single-coordinate updates cannot change how many points sit in each zone
//! around `m` and `m -+ s`, so the kernel resamples two coordinates at a time
//! from their joint conditional given the rest of the vector. The target is
//! the product density `prod_k f(X_k)` restricted to `{median = m, MAD = s}`.
//!
//! The coordinates that carry the statistics ("pins") are tracked by index:
//! for odd `N = 2n+1` one coordinate equals `m` and one equals `m -+ s`; for
//! even `N = 2n` two coordinates average to `m` and two have distances to `m`
//! averaging to `s`. A pair update never changes which indices are pins.
//!
//! Compared with the plain "redraw inside the zones" recipe, three corrections
//! make every move an exact draw from (or a Metropolis step targeting) the
//! pair conditional:
//!
//! * when a MAD pin and an unpinned point trade sides, the side is chosen
//!   with weight `P(zone) * f(new pin value)`;
//! * when two unpinned points move between `(Z1, Z3)` and `(Z2, Z4)`, the
//!   four ordered zone assignments are weighted by `P(za) * P(zb)`;
//! * for even `N`, moves of the two median pins or the two MAD pins propose
//!   one value from `f` and set the other by reflection; a Metropolis step
//!   with ratio `f(partner') / f(partner)` accounts for the partner density.
//!
//! [`KernelMode::Literal`] drops these corrections, which is useful only to
//! show that they matter.

mod zones;

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{Family, Interval};
use crate::error::{Error, Result};
use crate::med_iqr_conditional::InitMode;
use crate::order_stats::{mad, median};
pub use zones::{reflect, Frame, Zone};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Odd,
    Even,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMode {
    #[default]
    Exact,
    /// Unweighted zone proposals without the Metropolis corrections.
    Literal,
}

impl std::str::FromStr for KernelMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(KernelMode::Exact),
            "literal" => Ok(KernelMode::Literal),
            _ => Err(Error::Config(format!("unknown kernel mode '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MedMadConstraints {
    m: f64,
    s: f64,
    n: usize,
}

impl MedMadConstraints {
    /// Odd sizes need `N >= 3`, even sizes `N >= 8`.
    pub fn new(n: usize, m: f64, s: f64) -> Result<Self> {
        if !m.is_finite() || !(s > 0.0) || !s.is_finite() {
            return Err(Error::Config(format!(
                "median {m} and MAD {s} must be finite with MAD > 0"
            )));
        }
        if (n % 2 == 1 && n < 3) || (n.is_multiple_of(2) && n < 8) {
            return Err(Error::Config(format!(
                "median/MAD constraints need N >= 3 (odd) or N >= 8 (even), got {n}"
            )));
        }
        Ok(MedMadConstraints { m, s, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn median(&self) -> f64 {
        self.m
    }

    pub fn mad(&self) -> f64 {
        self.s
    }

    pub fn parity(&self) -> Parity {
        if self.n % 2 == 1 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    /// `n` with `N = 2n + 1` or `N = 2n`.
    pub fn half(&self) -> usize {
        self.n / 2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pins {
    Odd { med: usize, mad: usize },
    Even { med: [usize; 2], mad: [usize; 2] },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Med,
    Mad,
    Free,
}

/// Zone occupancy summary: `k` points at or above the upper MAD boundary and
/// the side(s) of the MAD pin(s).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "parity", rename_all = "lowercase")]
pub enum MedMadConfig {
    /// `k = #{X_i >= m + s}`, `delta = 1` when the MAD pin is `m + s`.
    Odd { k: usize, delta: u8 },
    /// `k = |Z4|`; `near_above` / `far_above` give the side of the MAD pin
    /// at distance `s1` / `s2`.
    Even {
        k: usize,
        near_above: bool,
        far_above: bool,
    },
}

impl fmt::Display for MedMadConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |b: bool| if b { '+' } else { '-' };
        match *self {
            MedMadConfig::Odd { k, delta } => write!(f, "k={k},delta={delta}"),
            MedMadConfig::Even {
                k,
                near_above,
                far_above,
            } => write!(f, "k={k},near={},far={}", side(near_above), side(far_above)),
        }
    }
}

/// Every configuration the constraints allow for a sample of size `N`.
pub fn feasible_configs(c: &MedMadConstraints) -> Vec<MedMadConfig> {
    let n = c.half();
    let mut out = Vec::new();
    match c.parity() {
        Parity::Odd => {
            for k in 1..=n {
                for delta in 0..=1 {
                    out.push(MedMadConfig::Odd { k, delta });
                }
            }
        }
        Parity::Even => {
            for near_above in [false, true] {
                for far_above in [false, true] {
                    let a = usize::from(near_above) + usize::from(far_above);
                    for k in 2usize.saturating_sub(a)..=n - 1 - a {
                        out.push(MedMadConfig::Even {
                            k,
                            near_above,
                            far_above,
                        });
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct MedMadState {
    x: Vec<f64>,
    pins: Pins,
}

impl MedMadState {
    pub fn values(&self) -> &[f64] {
        &self.x
    }

    /// Indices of the median pin(s).
    pub fn median_pins(&self) -> Vec<usize> {
        match self.pins {
            Pins::Odd { med, .. } => vec![med],
            Pins::Even { med, .. } => med.to_vec(),
        }
    }

    /// Indices of the MAD pin(s).
    pub fn mad_pins(&self) -> Vec<usize> {
        match self.pins {
            Pins::Odd { mad, .. } => vec![mad],
            Pins::Even { mad, .. } => mad.to_vec(),
        }
    }

    fn role(&self, i: usize) -> Role {
        match self.pins {
            Pins::Odd { med, mad } => {
                if i == med {
                    Role::Med
                } else if i == mad {
                    Role::Mad
                } else {
                    Role::Free
                }
            }
            Pins::Even { med, mad } => {
                if med.contains(&i) {
                    Role::Med
                } else if mad.contains(&i) {
                    Role::Mad
                } else {
                    Role::Free
                }
            }
        }
    }

    /// Zone boundaries implied by the current pins.
    pub fn frame(&self, c: &MedMadConstraints) -> Frame {
        match self.pins {
            Pins::Odd { .. } => Frame::odd(c.m, c.s),
            Pins::Even { med, mad } => {
                let (a, b) = (self.x[med[0]], self.x[med[1]]);
                let (da, db) = ((self.x[mad[0]] - c.m).abs(), (self.x[mad[1]] - c.m).abs());
                Frame {
                    m: c.m,
                    m1: a.min(b),
                    m2: a.max(b),
                    s1: da.min(db),
                    s2: da.max(db),
                }
            }
        }
    }

    /// Current zone configuration, computed from the pins and zone contents.
    pub fn config(&self, c: &MedMadConstraints) -> MedMadConfig {
        match self.pins {
            Pins::Odd { mad, .. } => {
                let delta = u8::from(self.x[mad] > c.m);
                let k = self.x.iter().filter(|&&v| v >= c.m + c.s).count();
                MedMadConfig::Odd { k, delta }
            }
            Pins::Even { mad, .. } => {
                let frame = self.frame(c);
                let (da, db) = ((self.x[mad[0]] - c.m).abs(), (self.x[mad[1]] - c.m).abs());
                let (near, far) = if da <= db {
                    (mad[0], mad[1])
                } else {
                    (mad[1], mad[0])
                };
                let k = self.x.iter().filter(|&&v| v > c.m + frame.s2).count();
                MedMadConfig::Even {
                    k,
                    near_above: self.x[near] > c.m,
                    far_above: self.x[far] > c.m,
                }
            }
        }
    }

    /// Overwrites one coordinate without any bookkeeping. Intended for
    /// negative-control tests of [`audit_medmad`].
    pub fn corrupt(&mut self, i: usize, value: f64) {
        self.x[i] = value;
    }
}

/// Result of [`audit_medmad`]. Violations are returned as data.
#[derive(Clone, Debug, Serialize)]
pub struct MedMadAudit {
    pub config: MedMadConfig,
    /// Occupancy of `Z1..Z4` by unpinned coordinates.
    pub zone_counts: [usize; 4],
    /// Occupancy required by the configuration (odd `N` only).
    pub expected_counts: Option<[usize; 4]>,
    pub median_residual: f64,
    pub mad_residual: f64,
    pub violations: Vec<String>,
}

impl MedMadAudit {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// Largest residual relative to `max(1, |m|, s)`.
    pub fn residual(&self) -> f64 {
        self.median_residual.max(self.mad_residual)
    }
}

/// Recomputes the median and MAD from scratch and checks zone occupancy.
pub fn audit_medmad(state: &MedMadState, c: &MedMadConstraints) -> MedMadAudit {
    let scale = 1f64.max(c.m.abs()).max(c.s);
    let med = median(&state.x).unwrap_or(f64::NAN);
    let md = mad(&state.x).unwrap_or(f64::NAN);
    let median_residual = (med - c.m).abs() / scale;
    let mad_residual = (md - c.s).abs() / scale;
    let mut violations = Vec::new();
    if !(median_residual < 1e-9) {
        violations.push(format!("median {med} differs from {}", c.m));
    }
    if !(mad_residual < 1e-9) {
        violations.push(format!("MAD {md} differs from {}", c.s));
    }
    let frame = state.frame(c);
    let mut counts = [0usize; 4];
    for (i, &v) in state.x.iter().enumerate() {
        if state.role(i) != Role::Free {
            continue;
        }
        match frame.zone_of(v) {
            Some(z) => counts[z.index()] += 1,
            None => violations.push(format!(
                "coordinate {i} = {v} lies on a boundary or in a buffer"
            )),
        }
    }
    let n = c.half();
    let config = state.config(c);
    let expected_counts = match config {
        MedMadConfig::Odd { k, delta } => {
            let d = usize::from(delta);
            if k < 1 || k > n || k < d {
                violations.push(format!("configuration {config} is infeasible"));
                None
            } else {
                Some([n - k + d, k - 1, n - k, k - d])
            }
        }
        MedMadConfig::Even {
            near_above,
            far_above,
            ..
        } => {
            let above = usize::from(near_above) + usize::from(far_above);
            if counts[1] + counts[2] + 3 != n {
                violations.push(format!(
                    "{} points inside the MAD band, expected {}",
                    counts[1] + counts[2],
                    n - 3
                ));
            }
            if counts[0] + counts[3] + 1 != n {
                violations.push(format!(
                    "{} points outside the MAD band, expected {}",
                    counts[0] + counts[3],
                    n - 1
                ));
            }
            if counts[0] + counts[1] + 2 - above + 1 != n {
                violations.push("unbalanced counts on the two sides of the median".into());
            }
            None
        }
    };
    if let Some(e) = expected_counts {
        if e != counts {
            violations.push(format!(
                "zone counts {counts:?}, expected {e:?} for {config}"
            ));
        }
    }
    MedMadAudit {
        config,
        zone_counts: counts,
        expected_counts,
        median_residual,
        mad_residual,
        violations,
    }
}

/// Builds a latent vector with median `m` and MAD `s`.
///
/// Linear mode rescales a draw from the starting distribution and then
/// snaps the pins to their exact values. Deterministic mode places the
/// points on a ladder around `m` (for odd `N` with `k = ceil(n/2)` and the
/// MAD pin at `m + s`); use it when the support is bounded.
pub fn init_medmad_state<R: Rng + ?Sized>(
    c: &MedMadConstraints,
    family: &Family,
    rng: &mut R,
    mode: InitMode,
) -> Result<MedMadState> {
    let state = match mode {
        InitMode::Linear => init_linear(c, family, rng)?,
        InitMode::Deterministic => match c.parity() {
            Parity::Odd => ladder_odd(c),
            Parity::Even => ladder_even(c),
        },
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
    let audit = audit_medmad(&state, c);
    if !audit.is_ok() {
        return Err(Error::Initialization(audit.violations.join("; ")));
    }
    Ok(state)
}

fn ladder_odd(c: &MedMadConstraints) -> MedMadState {
    let k = c.half().div_ceil(2);
    ladder(c, MedMadConfig::Odd { k, delta: 1 })
}

fn ladder_even(c: &MedMadConstraints) -> MedMadState {
    let k = (c.half() - 3) / 2 + 1;
    ladder(
        c,
        MedMadConfig::Even {
            k,
            near_above: false,
            far_above: true,
        },
    )
}

/// A fixed sample in the given configuration: outer points at distance
/// `1.5 s`, inner points at `0.5 s`, and for even `N` median pins at
/// `0.25 s` and MAD pins at `0.875 s` and `1.125 s`.
fn ladder(c: &MedMadConstraints, config: MedMadConfig) -> MedMadState {
    let (m, s, n) = (c.m, c.s, c.half());
    let mut x = Vec::with_capacity(c.n);
    let mut put = |v: f64, count: usize| -> usize {
        let at = x.len();
        x.extend(std::iter::repeat_n(v, count));
        at
    };
    match config {
        MedMadConfig::Odd { k, delta } => {
            let (outer_lo, inner_lo, inner_hi) = if delta == 1 {
                (n - k + 1, k - 1, n - k)
            } else {
                (n - k, k - 1, n - k)
            };
            put(m - 1.5 * s, outer_lo);
            let low_pin = put(m - s, usize::from(delta == 0));
            put(m - 0.5 * s, inner_lo);
            let med = put(m, 1);
            put(m + 0.5 * s, inner_hi);
            let high_pin = put(m + s, usize::from(delta == 1));
            put(m + 1.5 * s, k - usize::from(delta == 1));
            let mad = if delta == 1 { high_pin } else { low_pin };
            MedMadState {
                x,
                pins: Pins::Odd { med, mad },
            }
        }
        MedMadConfig::Even {
            k,
            near_above,
            far_above,
        } => {
            let a = usize::from(near_above) + usize::from(far_above);
            let inner_lo = k + a - 2;
            put(m - 1.5 * s, n - 1 - k);
            let far_lo = put(m - 1.125 * s, usize::from(!far_above));
            let near_lo = put(m - 0.875 * s, usize::from(!near_above));
            put(m - 0.5 * s, inner_lo);
            let med = put(m - 0.25 * s, 1);
            put(m + 0.25 * s, 1);
            put(m + 0.5 * s, n - 3 - inner_lo);
            let near_hi = put(m + 0.875 * s, usize::from(near_above));
            let far_hi = put(m + 1.125 * s, usize::from(far_above));
            put(m + 1.5 * s, k);
            let near = if near_above { near_hi } else { near_lo };
            let far = if far_above { far_hi } else { far_lo };
            MedMadState {
                x,
                pins: Pins::Even {
                    med: [med, med + 1],
                    mad: [near, far],
                },
            }
        }
    }
}

/// The deterministic ladder start in a chosen configuration. Fails if the
/// configuration is not feasible for these constraints.
pub fn ladder_state(c: &MedMadConstraints, config: MedMadConfig) -> Result<MedMadState> {
    if !feasible_configs(c).contains(&config) {
        return Err(Error::Config(format!(
            "configuration {config} is not feasible for N = {}",
            c.n
        )));
    }
    let state = ladder(c, config);
    let audit = audit_medmad(&state, c);
    if !audit.is_ok() {
        return Err(Error::Initialization(audit.violations.join("; ")));
    }
    Ok(state)
}

fn init_linear<R: Rng + ?Sized>(
    c: &MedMadConstraints,
    family: &Family,
    rng: &mut R,
) -> Result<MedMadState> {
    for _ in 0..100 {
        let z: Vec<f64> = (0..c.n).map(|_| family.sample(rng)).collect();
        let (mz, sz) = (median(&z)?, mad(&z)?);
        if !(sz > 0.0) {
            continue;
        }
        let mut x: Vec<f64> = z.iter().map(|v| (v - mz) * c.s / sz + c.m).collect();
        let mut by_value: Vec<usize> = (0..c.n).collect();
        by_value.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        let n = c.half();
        let pins = match c.parity() {
            Parity::Odd => {
                let med = by_value[n];
                x[med] = c.m;
                let mad = nth_by_distance(&x, c.m, n, &[med])[0];
                x[mad] = if x[mad] > c.m { c.m + c.s } else { c.m - c.s };
                Pins::Odd { med, mad }
            }
            Parity::Even => {
                let med = [by_value[n - 1], by_value[n]];
                x[med[1]] = reflect(c.m, x[med[0]]);
                let near = nth_by_distance(&x, c.m, n - 1, &[])[0];
                let far = nth_by_distance(&x, c.m, n, &[])[0];
                let d = 2.0 * c.s - (x[near] - c.m).abs();
                x[far] = if x[far] > c.m { c.m + d } else { c.m - d };
                Pins::Even {
                    med,
                    mad: [near, far],
                }
            }
        };
        let state = MedMadState { x, pins };
        if audit_medmad(&state, c).is_ok() {
            return Ok(state);
        }
    }
    Err(Error::Initialization(
        "could not draw a sample with distinct order statistics".into(),
    ))
}

/// Index of the coordinate with the `rank`-th smallest distance to `m`
/// (0-based), ignoring `skip`.
fn nth_by_distance(x: &[f64], m: f64, rank: usize, skip: &[usize]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).filter(|i| !skip.contains(i)).collect();
    idx.sort_by(|&a, &b| (x[a] - m).abs().total_cmp(&(x[b] - m).abs()));
    vec![idx[rank - skip.len()]]
}

/// What a pair update did, for diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairMove {
    /// Both coordinates are pins whose values are fixed by the rest.
    Frozen,
    /// Independent redraws inside the current zones.
    OwnZones,
    /// A MAD pin and an unpinned point, possibly trading sides.
    SideSwap { flipped: bool },
    /// Two unpinned points, possibly trading between `(Z1, Z3)` and `(Z2, Z4)`.
    Complementary { switched: bool },
    /// Metropolis move of the two median or the two MAD pins (even `N`).
    Reflected { accepted: bool },
}

fn pick_log_weight<R: Rng + ?Sized>(lw: &[f64], rng: &mut R) -> Option<usize> {
    let top = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return None;
    }
    let w: Vec<f64> = lw.iter().map(|l| (l - top).exp()).collect();
    let mut u = rng.random::<f64>() * w.iter().sum::<f64>();
    for (k, wk) in w.iter().enumerate() {
        if u < *wk {
            return Some(k);
        }
        u -= wk;
    }
    w.iter().rposition(|&wk| wk > 0.0)
}

fn draw_in_union<R: Rng + ?Sized>(family: &Family, parts: &[Interval], rng: &mut R) -> Result<f64> {
    let lw: Vec<f64> = parts.iter().map(|iv| family.ln_mass(iv)).collect();
    match pick_log_weight(&lw, rng) {
        Some(k) => family.sample_truncated(&parts[k], rng),
        None => Err(Error::InfeasibleInterval {
            lo: parts[0].lo,
            hi: parts[parts.len() - 1].hi,
        }),
    }
}

fn free_zone(frame: &Frame, x: f64) -> Result<Zone> {
    frame
        .zone_of(x)
        .ok_or_else(|| Error::Domain(format!("unpinned coordinate {x} is not inside a zone")))
}

/// Exact joint update of coordinates `i` and `j` given the rest of the
/// vector, dispatching on parity.
pub fn pair_update<R: Rng + ?Sized>(
    state: &mut MedMadState,
    c: &MedMadConstraints,
    i: usize,
    j: usize,
    family: &Family,
    rng: &mut R,
    mode: KernelMode,
) -> Result<PairMove> {
    if i == j || i >= c.n || j >= c.n {
        return Err(Error::Domain(format!(
            "pair ({i}, {j}) invalid for N = {}",
            c.n
        )));
    }
    let (ri, rj) = (state.role(i), state.role(j));
    let frame = state.frame(c);
    match (ri, rj) {
        (Role::Med, Role::Mad) | (Role::Mad, Role::Med) => Ok(PairMove::Frozen),
        (Role::Med, Role::Med) => median_pair(state, c, i, j, family, rng, mode),
        (Role::Mad, Role::Mad) => mad_pair(state, c, i, j, family, rng, mode),
        (Role::Med, Role::Free) | (Role::Free, Role::Med) => {
            let f = if ri == Role::Free { i } else { j };
            redraw_own(state, &frame, &[f], family, rng)
        }
        (Role::Mad, Role::Free) | (Role::Free, Role::Mad) => {
            let (p, f) = if ri == Role::Mad { (i, j) } else { (j, i) };
            mad_and_free(state, c, &frame, p, f, family, rng, mode)
        }
        (Role::Free, Role::Free) => two_free(state, &frame, i, j, family, rng, mode),
    }
}

/// Odd-size pair update.
pub fn pair_update_odd<R: Rng + ?Sized>(
    state: &mut MedMadState,
    c: &MedMadConstraints,
    i: usize,
    j: usize,
    family: &Family,
    rng: &mut R,
) -> Result<PairMove> {
    if c.parity() != Parity::Odd {
        return Err(Error::Domain(
            "pair_update_odd on an even-size sample".into(),
        ));
    }
    pair_update(state, c, i, j, family, rng, KernelMode::Exact)
}

/// Even-size pair update.
pub fn pair_update_even<R: Rng + ?Sized>(
    state: &mut MedMadState,
    c: &MedMadConstraints,
    i: usize,
    j: usize,
    family: &Family,
    rng: &mut R,
) -> Result<PairMove> {
    if c.parity() != Parity::Even {
        return Err(Error::Domain(
            "pair_update_even on an odd-size sample".into(),
        ));
    }
    pair_update(state, c, i, j, family, rng, KernelMode::Exact)
}

fn redraw_own<R: Rng + ?Sized>(
    state: &mut MedMadState,
    frame: &Frame,
    idx: &[usize],
    family: &Family,
    rng: &mut R,
) -> Result<PairMove> {
    for &k in idx {
        let z = free_zone(frame, state.x[k])?;
        state.x[k] = family.sample_truncated(&frame.interval(z), rng)?;
    }
    Ok(PairMove::OwnZones)
}

#[allow(clippy::too_many_arguments)]
fn mad_and_free<R: Rng + ?Sized>(
    state: &mut MedMadState,
    c: &MedMadConstraints,
    frame: &Frame,
    p: usize,
    f: usize,
    family: &Family,
    rng: &mut R,
    mode: KernelMode,
) -> Result<PairMove> {
    let pin = state.x[p];
    let z = free_zone(frame, state.x[f])?;
    if (pin > c.m) == !z.below_median() {
        return redraw_own(state, frame, &[f], family, rng);
    }
    // Opposite sides: either keep the pin and stay in the zone, or mirror
    // the pin and move to the symmetric zone.
    let flipped_pin = reflect(c.m, pin);
    let keep = frame.interval(z);
    let flip = frame.interval(z.symmetric());
    let lw = match mode {
        KernelMode::Exact => [
            family.ln_mass(&keep) + family.ln_pdf(pin),
            family.ln_mass(&flip) + family.ln_pdf(flipped_pin),
        ],
        KernelMode::Literal => [family.ln_mass(&keep), family.ln_mass(&flip)],
    };
    let choice = pick_log_weight(&lw, rng).ok_or(Error::InfeasibleInterval {
        lo: keep.lo,
        hi: keep.hi,
    })?;
    let flipped = choice == 1;
    state.x[f] = family.sample_truncated(if flipped { &flip } else { &keep }, rng)?;
    if flipped {
        state.x[p] = flipped_pin;
    }
    Ok(PairMove::SideSwap { flipped })
}

fn two_free<R: Rng + ?Sized>(
    state: &mut MedMadState,
    frame: &Frame,
    i: usize,
    j: usize,
    family: &Family,
    rng: &mut R,
    mode: KernelMode,
) -> Result<PairMove> {
    let (zi, zj) = (free_zone(frame, state.x[i])?, free_zone(frame, state.x[j])?);
    if zi.complementary() != zj {
        return redraw_own(state, frame, &[i, j], family, rng);
    }
    let ln_p = Zone::ALL.map(|z| family.ln_mass(&frame.interval(z)));
    // candidate zone for i; j goes to the complementary zone
    let lw: Vec<f64> = Zone::ALL
        .iter()
        .map(|z| match mode {
            KernelMode::Exact => ln_p[z.index()] + ln_p[z.complementary().index()],
            KernelMode::Literal => ln_p[z.index()],
        })
        .collect();
    let k = pick_log_weight(&lw, rng).ok_or(Error::InfeasibleInterval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    })?;
    let new_zi = Zone::ALL[k];
    state.x[i] = family.sample_truncated(&frame.interval(new_zi), rng)?;
    state.x[j] = family.sample_truncated(&frame.interval(new_zi.complementary()), rng)?;
    // {Z1, Z3} versus {Z2, Z4}
    let in_13 = |z: Zone| z.outside() == z.below_median();
    Ok(PairMove::Complementary {
        switched: in_13(new_zi) != in_13(zi),
    })
}

/// Distances `|x_k - m|` of every coordinate except `i` and `j`.
fn rest_distances(x: &[f64], m: f64, i: usize, j: usize) -> Vec<f64> {
    x.iter()
        .enumerate()
        .filter(|&(k, _)| k != i && k != j)
        .map(|(_, v)| (v - m).abs())
        .collect()
}

fn median_pair<R: Rng + ?Sized>(
    state: &mut MedMadState,
    c: &MedMadConstraints,
    i: usize,
    j: usize,
    family: &Family,
    rng: &mut R,
    mode: KernelMode,
) -> Result<PairMove> {
    // The pair must stay the two points nearest to m.
    let e = rest_distances(&state.x, c.m, i, j)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let a = family.sample_truncated(&Interval::raw(c.m - e, c.m + e), rng)?;
    let b = reflect(c.m, a);
    let accepted = match mode {
        KernelMode::Literal => true,
        KernelMode::Exact => {
            let log_ratio = family.ln_pdf(b) - family.ln_pdf(state.x[j]);
            log_ratio > f64::NEG_INFINITY && rng.random::<f64>().ln() < log_ratio
        }
    };
    if accepted {
        state.x[i] = a;
        state.x[j] = b;
    }
    Ok(PairMove::Reflected { accepted })
}

fn mad_pair<R: Rng + ?Sized>(
    state: &mut MedMadState,
    c: &MedMadConstraints,
    i: usize,
    j: usize,
    family: &Family,
    rng: &mut R,
    mode: KernelMode,
) -> Result<PairMove> {
    let n = c.half();
    let mut d = rest_distances(&state.x, c.m, i, j);
    // the pair holds distance ranks n and n+1; the rest brackets them
    let (below_rank, &mut hi_rest, _) = d.select_nth_unstable_by(n - 1, f64::total_cmp);
    let lo_rest = below_rank.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let two_s = 2.0 * c.s;
    let band_lo = lo_rest.max(two_s - hi_rest);
    let band_hi = hi_rest.min(two_s - lo_rest);
    if !(band_lo < band_hi) {
        return Ok(PairMove::Reflected { accepted: false });
    }
    let (xi, xj) = (state.x[i], state.x[j]);
    let above = Interval::raw(c.m + band_lo, c.m + band_hi);
    let below = Interval::raw(c.m - band_hi, c.m - band_lo);
    let partner = |a: f64| -> f64 {
        if (xi > c.m) == (xj > c.m) {
            let centre = if xi > c.m { c.m + c.s } else { c.m - c.s };
            reflect(centre, a)
        } else if a > c.m {
            a - two_s
        } else {
            a + two_s
        }
    };
    let a = if (xi > c.m) == (xj > c.m) {
        family.sample_truncated(if xi > c.m { &above } else { &below }, rng)?
    } else {
        draw_in_union(family, &[below, above], rng)?
    };
    let b = partner(a);
    let accepted = match mode {
        KernelMode::Literal => true,
        KernelMode::Exact => {
            let log_ratio = family.ln_pdf(b) - family.ln_pdf(xj);
            log_ratio > f64::NEG_INFINITY && rng.random::<f64>().ln() < log_ratio
        }
    };
    if accepted {
        state.x[i] = a;
        state.x[j] = b;
    }
    Ok(PairMove::Reflected { accepted })
}

/// Draws a pair of distinct indices uniformly.
pub fn random_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (usize, usize) {
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// `n_pairs` pair updates on uniformly drawn index pairs.
pub fn gibbs_sweep_medmad<R: Rng + ?Sized>(
    state: &mut MedMadState,
    c: &MedMadConstraints,
    family: &Family,
    rng: &mut R,
    n_pairs: usize,
) -> Result<()> {
    for _ in 0..n_pairs {
        let (i, j) = random_pair(c.n, rng);
        pair_update(state, c, i, j, family, rng, KernelMode::Exact)?;
    }
    Ok(())
}

/// Constraints, state and move statistics bundled for the Gibbs sampler.
#[derive(Clone, Debug)]
pub struct MedMadEngine {
    constraints: MedMadConstraints,
    state: MedMadState,
    mode: KernelMode,
    n_pairs: usize,
    reflected: [u64; 2],
    census: BTreeMap<MedMadConfig, u64>,
}

impl MedMadEngine {
    /// `n_pairs` defaults to `N` pair updates per sweep.
    pub fn new<R: Rng + ?Sized>(
        constraints: MedMadConstraints,
        family: &Family,
        rng: &mut R,
        init: InitMode,
        n_pairs: Option<usize>,
    ) -> Result<Self> {
        let state = init_medmad_state(&constraints, family, rng, init)?;
        Ok(MedMadEngine {
            n_pairs: n_pairs.unwrap_or(constraints.n).max(1),
            constraints,
            state,
            mode: KernelMode::Exact,
            reflected: [0, 0],
            census: BTreeMap::new(),
        })
    }

    /// Starts the engine from a given state instead of an initialisation.
    pub fn from_state(
        constraints: MedMadConstraints,
        state: MedMadState,
        n_pairs: Option<usize>,
    ) -> Self {
        MedMadEngine {
            n_pairs: n_pairs.unwrap_or(constraints.n).max(1),
            constraints,
            state,
            mode: KernelMode::Exact,
            reflected: [0, 0],
            census: BTreeMap::new(),
        }
    }

    pub fn with_mode(mut self, mode: KernelMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn update<R: Rng + ?Sized>(&mut self, family: &Family, rng: &mut R) -> Result<()> {
        for _ in 0..self.n_pairs {
            let (i, j) = random_pair(self.constraints.n, rng);
            if let PairMove::Reflected { accepted } = pair_update(
                &mut self.state,
                &self.constraints,
                i,
                j,
                family,
                rng,
                self.mode,
            )? {
                self.reflected[0] += 1;
                self.reflected[1] += u64::from(accepted);
            }
        }
        Ok(())
    }

    /// Adds the current configuration to the visit census.
    pub fn record_census(&mut self) {
        *self
            .census
            .entry(self.state.config(&self.constraints))
            .or_default() += 1;
    }

    pub fn census(&self) -> &BTreeMap<MedMadConfig, u64> {
        &self.census
    }

    pub fn reset_census(&mut self) {
        self.census.clear();
    }

    /// Acceptance rate of the reflected pin moves (even `N`), if any were made.
    pub fn reflected_acceptance(&self) -> Option<f64> {
        (self.reflected[0] > 0).then(|| self.reflected[1] as f64 / self.reflected[0] as f64)
    }

    pub fn values(&self) -> &[f64] {
        self.state.values()
    }

    pub fn state(&self) -> &MedMadState {
        &self.state
    }

    pub fn constraints(&self) -> &MedMadConstraints {
        &self.constraints
    }

    pub fn audit(&self) -> MedMadAudit {
        audit_medmad(&self.state, &self.constraints)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gauss() -> Family {
        Family::gaussian(0.0, 1.0).unwrap()
    }

    #[test]
    fn constraint_validation() {
        assert!(MedMadConstraints::new(1, 0.0, 1.0).is_err());
        assert!(MedMadConstraints::new(6, 0.0, 1.0).is_err());
        assert!(MedMadConstraints::new(9, 0.0, 0.0).is_err());
        assert_eq!(
            MedMadConstraints::new(8, 0.0, 1.0).unwrap().parity(),
            Parity::Even
        );
    }

    #[test]
    fn odd_ladder_for_nine() {
        let c = MedMadConstraints::new(9, 0.0, 1.0).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(0);
        let s = init_medmad_state(&c, &gauss(), &mut r, InitMode::Deterministic).unwrap();
        assert_eq!(
            s.values(),
            &[-1.5, -1.5, -1.5, -0.5, 0.0, 0.5, 0.5, 1.0, 1.5]
        );
        assert_eq!(s.config(&c), MedMadConfig::Odd { k: 2, delta: 1 });
        let a = audit_medmad(&s, &c);
        assert!(a.is_ok(), "{:?}", a.violations);
        assert_eq!(a.zone_counts, [3, 1, 2, 1]);
    }

    #[test]
    fn inits_satisfy_constraints() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        for n in [3, 5, 8, 9, 10, 12, 101, 100] {
            let c = MedMadConstraints::new(n, -2.0, 3.0).unwrap();
            for mode in [InitMode::Linear, InitMode::Deterministic] {
                let s = init_medmad_state(&c, &gauss(), &mut r, mode).unwrap();
                let a = audit_medmad(&s, &c);
                assert!(a.is_ok(), "n={n} {mode:?}: {:?}", a.violations);
                assert!(a.residual() < 1e-12);
            }
        }
    }

    #[test]
    fn corrupted_coordinate_is_reported() {
        let c = MedMadConstraints::new(9, 0.0, 1.0).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let mut s = init_medmad_state(&c, &gauss(), &mut r, InitMode::Linear).unwrap();
        let pin = s.median_pins()[0];
        s.corrupt(pin, 0.25);
        let a = audit_medmad(&s, &c);
        assert!(!a.is_ok());
        assert!(a.residual() > 0.0);
    }

    #[test]
    fn weibull_ladder_outside_support_fails() {
        let c = MedMadConstraints::new(9, 1.0, 1.0).unwrap();
        let f = Family::weibull3(0.0, 1.0, 2.0).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(3);
        assert!(init_medmad_state(&c, &f, &mut r, InitMode::Deterministic)
            .unwrap_err()
            .is_infeasible());
    }

    #[test]
    fn median_and_mad_pair_frozen() {
        let c = MedMadConstraints::new(9, 0.0, 1.0).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let mut s = init_medmad_state(&c, &gauss(), &mut r, InitMode::Linear).unwrap();
        let before = s.values().to_vec();
        let (a, b) = (s.median_pins()[0], s.mad_pins()[0]);
        assert_eq!(
            pair_update_odd(&mut s, &c, a, b, &gauss(), &mut r).unwrap(),
            PairMove::Frozen
        );
        assert_eq!(before, s.values());
    }

    #[test]
    fn side_swap_moves_the_pin() {
        // ladder: MAD pin at index 7 (= m + s), Z2 point at index 3
        let c = MedMadConstraints::new(9, 0.0, 1.0).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let mut seen = [false; 2];
        for _ in 0..200 {
            let mut s = init_medmad_state(&c, &gauss(), &mut r, InitMode::Deterministic).unwrap();
            let mv = pair_update_odd(&mut s, &c, 3, 7, &gauss(), &mut r).unwrap();
            let PairMove::SideSwap { flipped } = mv else {
                panic!("{mv:?}")
            };
            if flipped {
                assert!(s.values()[3] > 0.0);
                assert_eq!(s.values()[7], -1.0);
                assert!(matches!(s.config(&c), MedMadConfig::Odd { delta: 0, .. }));
            } else {
                assert!(s.values()[3] < 0.0);
                assert_eq!(s.values()[7], 1.0);
            }
            seen[usize::from(flipped)] = true;
            assert!(audit_medmad(&s, &c).is_ok());
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn complementary_switch_changes_k() {
        // index 0 in Z1, index 5 in Z3: switching to (Z2, Z4) raises k by one
        let c = MedMadConstraints::new(9, 0.0, 1.0).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(6);
        let mut switched = false;
        for _ in 0..200 {
            let mut s = init_medmad_state(&c, &gauss(), &mut r, InitMode::Deterministic).unwrap();
            let mv = pair_update_odd(&mut s, &c, 0, 5, &gauss(), &mut r).unwrap();
            if mv == (PairMove::Complementary { switched: true }) {
                switched = true;
                assert_eq!(s.config(&c), MedMadConfig::Odd { k: 3, delta: 1 });
            }
            assert!(audit_medmad(&s, &c).is_ok());
        }
        assert!(switched);
    }

    #[test]
    fn even_reflections() {
        let c = MedMadConstraints::new(12, 0.0, 1.0).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(7);
        let mut s = init_medmad_state(&c, &gauss(), &mut r, InitMode::Deterministic).unwrap();
        let [a, b] = [s.median_pins()[0], s.median_pins()[1]];
        for _ in 0..50 {
            pair_update_even(&mut s, &c, a, b, &gauss(), &mut r).unwrap();
            assert_eq!((s.values()[a] + s.values()[b]) / 2.0, 0.0);
        }
        let [p, q] = [s.mad_pins()[0], s.mad_pins()[1]];
        for _ in 0..50 {
            pair_update_even(&mut s, &c, p, q, &gauss(), &mut r).unwrap();
            let (dp, dq) = (s.values()[p].abs(), s.values()[q].abs());
            assert!(((dp + dq) / 2.0 - 1.0).abs() < 1e-12);
            assert!(audit_medmad(&s, &c).is_ok());
        }
    }

    #[test]
    fn random_pair_updates_preserve_constraints() {
        let mut r = ChaCha8Rng::seed_from_u64(8);
        for (n, f) in [
            (9, gauss()),
            (12, gauss()),
            (8, Family::cauchy(1.0, 0.5).unwrap()),
            (11, Family::weibull3(-1.0, 2.0, 1.5).unwrap()),
        ] {
            let c = MedMadConstraints::new(n, 0.4, 0.6).unwrap();
            let mut s = init_medmad_state(&c, &f, &mut r, InitMode::Deterministic).unwrap();
            for _ in 0..10_000 {
                let (i, j) = random_pair(n, &mut r);
                pair_update(&mut s, &c, i, j, &f, &mut r, KernelMode::Exact).unwrap();
                let a = audit_medmad(&s, &c);
                assert!(a.is_ok(), "n={n}: {:?}", a.violations);
            }
        }
    }

    #[test]
    fn feasible_config_counts() {
        assert_eq!(
            feasible_configs(&MedMadConstraints::new(9, 0.0, 1.0).unwrap()).len(),
            8
        );
        assert_eq!(
            feasible_configs(&MedMadConstraints::new(12, 0.0, 1.0).unwrap()).len(),
            16
        );
    }

    #[test]
    fn ladder_for_every_configuration() {
        for (n, count) in [(9, 8), (12, 16), (13, 12), (101, 100)] {
            let c = MedMadConstraints::new(n, 1.0, 2.0).unwrap();
            let configs = feasible_configs(&c);
            assert_eq!(configs.len(), count);
            for cfg in configs {
                let st = ladder_state(&c, cfg).unwrap();
                assert_eq!(st.config(&c), cfg, "N={n}");
                assert_eq!(st.values().len(), n);
            }
        }
        let c = MedMadConstraints::new(9, 0.0, 1.0).unwrap();
        assert!(ladder_state(&c, MedMadConfig::Odd { k: 0, delta: 1 }).is_err());
    }
}
