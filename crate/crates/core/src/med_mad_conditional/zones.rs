//! Zones of the real line induced by the median and MAD pins, and the maps
//! between them.

use crate::distributions::Interval;

/// Reflection through `y`: `x -> 2y - x`.
pub fn reflect(y: f64, x: f64) -> f64 {
    2.0 * y - x
}

/// The four zones that can hold unpinned coordinates, left to right.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Zone {
    Z1,
    Z2,
    Z3,
    Z4,
}

impl Zone {
    pub const ALL: [Zone; 4] = [Zone::Z1, Zone::Z2, Zone::Z3, Zone::Z4];

    /// Mirror image about the median.
    pub fn symmetric(self) -> Zone {
        match self {
            Zone::Z1 => Zone::Z4,
            Zone::Z2 => Zone::Z3,
            Zone::Z3 => Zone::Z2,
            Zone::Z4 => Zone::Z1,
        }
    }

    /// The zone a partner must occupy when a pair trades between
    /// `(Z1, Z3)` and `(Z2, Z4)`.
    pub fn complementary(self) -> Zone {
        match self {
            Zone::Z1 => Zone::Z3,
            Zone::Z2 => Zone::Z4,
            Zone::Z3 => Zone::Z1,
            Zone::Z4 => Zone::Z2,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn below_median(self) -> bool {
        matches!(self, Zone::Z1 | Zone::Z2)
    }

    pub fn outside(self) -> bool {
        matches!(self, Zone::Z1 | Zone::Z4)
    }
}

/// Zone boundaries. For odd `N` the median and MAD are attained, so
/// `m1 = m2 = m` and `s1 = s2 = s`; for even `N` they are the two order
/// statistics averaged by each statistic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub m: f64,
    pub m1: f64,
    pub m2: f64,
    pub s1: f64,
    pub s2: f64,
}

impl Frame {
    pub fn odd(m: f64, s: f64) -> Self {
        Frame {
            m,
            m1: m,
            m2: m,
            s1: s,
            s2: s,
        }
    }

    /// Zone of an unpinned coordinate, `None` if it lies in a buffer
    /// (`Z_m`, `Z_{m-s}`, `Z_{m+s}`) or on a boundary.
    pub fn zone_of(&self, x: f64) -> Option<Zone> {
        Zone::ALL
            .into_iter()
            .find(|z| self.interval(*z).contains(x))
    }

    pub fn interval(&self, z: Zone) -> Interval {
        match z {
            Zone::Z1 => Interval::raw(f64::NEG_INFINITY, self.m - self.s2),
            Zone::Z2 => Interval::raw(self.m - self.s1, self.m1),
            Zone::Z3 => Interval::raw(self.m2, self.m + self.s1),
            Zone::Z4 => Interval::raw(self.m + self.s2, f64::INFINITY),
        }
    }

    /// Extended zone: the zone widened to the midpoint `m -+ s` of the MAD
    /// buffer it borders.
    pub fn extended(&self, z: Zone) -> Interval {
        let s = 0.5 * (self.s1 + self.s2);
        match z {
            Zone::Z1 => Interval::raw(f64::NEG_INFINITY, self.m - s),
            Zone::Z2 => Interval::raw(self.m - s, self.m1),
            Zone::Z3 => Interval::raw(self.m2, self.m + s),
            Zone::Z4 => Interval::raw(self.m + s, f64::INFINITY),
        }
    }

    /// Buffer around `m -+ s` between the two MAD order statistics.
    pub fn mad_buffer(&self, above: bool) -> Interval {
        if above {
            Interval::raw(self.m + self.s1, self.m + self.s2)
        } else {
            Interval::raw(self.m - self.s2, self.m - self.s1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_are_involutions() {
        for z in Zone::ALL {
            assert_eq!(z.symmetric().symmetric(), z);
            assert_eq!(z.complementary().complementary(), z);
            assert_ne!(z.symmetric(), z);
            // complementary zones sit on opposite sides and differ in inside/outside
            assert_ne!(z.below_median(), z.complementary().below_median());
            assert_ne!(z.outside(), z.complementary().outside());
        }
        for (y, x) in [(0.0, 1.5), (-2.0, 7.25), (3.0, 3.0)] {
            assert_eq!(reflect(y, reflect(y, x)), x);
        }
    }

    #[test]
    fn odd_zones_partition_the_line() {
        let f = Frame::odd(1.0, 2.0);
        assert_eq!(f.zone_of(-1.5), Some(Zone::Z1));
        assert_eq!(f.zone_of(0.0), Some(Zone::Z2));
        assert_eq!(f.zone_of(2.0), Some(Zone::Z3));
        assert_eq!(f.zone_of(3.5), Some(Zone::Z4));
        assert_eq!(f.zone_of(1.0), None);
        assert_eq!(f.zone_of(3.0), None);
    }

    #[test]
    fn even_zones_leave_buffers_empty() {
        let f = Frame {
            m: 0.0,
            m1: -0.1,
            m2: 0.1,
            s1: 0.9,
            s2: 1.1,
        };
        assert_eq!(f.zone_of(0.05), None);
        assert_eq!(f.zone_of(1.0), None);
        assert_eq!(f.zone_of(-1.0), None);
        assert_eq!(f.zone_of(-0.5), Some(Zone::Z2));
        assert_eq!(f.zone_of(0.5), Some(Zone::Z3));
        assert_eq!(f.zone_of(-1.2), Some(Zone::Z1));
        let e = f.extended(Zone::Z4);
        assert_eq!((e.lo, e.hi), (1.0, f64::INFINITY));
        let b = f.mad_buffer(true);
        assert_eq!((b.lo, b.hi), (0.9, 1.1));
    }
}
