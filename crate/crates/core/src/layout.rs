//! Zone-partitioned storage shared by the quantile and (median, IQR) engines.
//!
//! The latent vector is kept in "sorted-by-zone" order: the order statistic
//! `X_(i)` for every pinned index `i` lives at position `i - 1`, and the
//! positions strictly between two pins hold the coordinates of that zone in
//! arbitrary order. Auditing a constraint is therefore O(1) and refilling a
//! zone never moves a pin.

use rand::Rng;

use crate::distributions::{Family, Interval};
use crate::error::Result;

#[derive(Clone, Debug)]
pub(crate) struct PinnedLayout {
    n: usize,
    /// 0-based positions of the pinned order statistics, increasing.
    pos: Vec<usize>,
}

impl PinnedLayout {
    pub(crate) fn new(n: usize, indices: &[usize]) -> Self {
        PinnedLayout {
            n,
            pos: indices.iter().map(|&i| i - 1).collect(),
        }
    }

    pub(crate) fn write_pins(&self, x: &mut [f64], pins: &[f64]) {
        for (&p, &v) in self.pos.iter().zip(pins) {
            x[p] = v;
        }
    }

    /// (first position, end position, bounding interval) of every zone,
    /// including the two unbounded end zones; empty zones are skipped.
    fn zones<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = (usize, usize, Interval)> + 'a {
        (0..=self.pos.len()).filter_map(move |k| {
            let start = if k == 0 { 0 } else { self.pos[k - 1] + 1 };
            let end = if k == self.pos.len() {
                self.n
            } else {
                self.pos[k]
            };
            if start >= end {
                return None;
            }
            let lo = if k == 0 {
                f64::NEG_INFINITY
            } else {
                x[self.pos[k - 1]]
            };
            let hi = if k == self.pos.len() {
                f64::INFINITY
            } else {
                x[self.pos[k]]
            };
            Some((start, end, Interval::raw(lo, hi)))
        })
    }

    /// Redraws every unpinned coordinate from `family` truncated to its zone.
    pub(crate) fn refill<R: Rng + ?Sized>(
        &self,
        x: &mut [f64],
        family: &Family,
        rng: &mut R,
    ) -> Result<()> {
        let zones: Vec<_> = self.zones(x).collect();
        for (start, end, iv) in zones {
            for slot in &mut x[start..end] {
                *slot = family.sample_truncated(&iv, rng)?;
            }
        }
        Ok(())
    }

    /// Redraws only the unpinned coordinates that fell outside their zone
    /// after the pins moved.
    pub(crate) fn repair<R: Rng + ?Sized>(
        &self,
        x: &mut [f64],
        family: &Family,
        rng: &mut R,
    ) -> Result<()> {
        let zones: Vec<_> = self.zones(x).collect();
        for (start, end, iv) in zones {
            for slot in &mut x[start..end] {
                if !iv.contains(*slot) {
                    *slot = family.sample_truncated(&iv, rng)?;
                }
            }
        }
        Ok(())
    }

    /// True when every zone coordinate lies strictly inside its zone and the
    /// pins are strictly increasing.
    pub(crate) fn is_consistent(&self, x: &[f64]) -> bool {
        self.pos.windows(2).all(|w| x[w[0]] < x[w[1]])
            && self
                .zones(x)
                .all(|(s, e, iv)| x[s..e].iter().all(|&v| iv.contains(v)))
    }
}

/// Per-coordinate random-walk scales with Robbins-Monro adaptation toward a
/// target acceptance rate. Adaptation is only applied when requested, so a
/// chain can freeze its kernel after burn-in.
#[derive(Clone, Debug)]
pub struct RwTuning {
    log_scale: Vec<f64>,
    steps: usize,
    target: f64,
    accepted: Vec<u64>,
    proposed: Vec<u64>,
}

impl RwTuning {
    pub fn new(dim: usize, scale: f64, target: f64) -> Self {
        RwTuning {
            log_scale: vec![scale.ln(); dim],
            steps: 0,
            target,
            accepted: vec![0; dim],
            proposed: vec![0; dim],
        }
    }

    pub fn scales(&self) -> Vec<f64> {
        self.log_scale.iter().map(|l| l.exp()).collect()
    }

    pub(crate) fn record(&mut self, flags: &[bool], adapt: bool) {
        if adapt {
            self.steps += 1;
            let gain = (self.steps as f64 + 1.0).powf(-0.6);
            for (l, &a) in self.log_scale.iter_mut().zip(flags) {
                *l = (*l + gain * (f64::from(u8::from(a)) - self.target)).clamp(-12.0, 8.0);
            }
        }
        for (k, &a) in flags.iter().enumerate() {
            self.proposed[k] += 1;
            self.accepted[k] += u64::from(a);
        }
    }

    /// Overall acceptance rate across coordinates, `None` before any proposal.
    pub fn acceptance(&self) -> Option<f64> {
        let p: u64 = self.proposed.iter().sum();
        (p > 0).then(|| self.accepted.iter().sum::<u64>() as f64 / p as f64)
    }

    pub fn reset_counts(&mut self) {
        self.accepted.iter_mut().for_each(|a| *a = 0);
        self.proposed.iter_mut().for_each(|a| *a = 0);
    }
}
