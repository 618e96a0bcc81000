//! Closed intervals and axis-aligned boxes in the throwing plane.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]`. Either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let iv = Interval { lo, hi };
        iv.validate()?;
        Ok(iv)
    }

    /// Symmetric interval `[-half, half]`.
    pub fn symmetric(half: f64) -> Result<Self> {
        Self::new(-half, half)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.is_nan() || self.hi.is_nan() {
            return Err(Error::invalid("interval bound is NaN"));
        }
        if self.lo > self.hi {
            return Err(Error::invalid(format!(
                "interval lower bound {} exceeds upper bound {}",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_tol(&self, x: f64, tol: f64) -> bool {
        self.lo - tol <= x && x <= self.hi + tol
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lo).min(self.hi)
    }

    /// Intersection; may be empty (`lo > hi`).
    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

/// Box in (radial, vertical) coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2 {
    pub r: Interval,
    pub z: Interval,
}

impl Box2 {
    pub const UNBOUNDED: Box2 = Box2 {
        r: Interval::UNBOUNDED,
        z: Interval::UNBOUNDED,
    };

    pub fn new(r: Interval, z: Interval) -> Result<Self> {
        r.validate()?;
        z.validate()?;
        Ok(Box2 { r, z })
    }

    pub fn symmetric(half: f64) -> Result<Self> {
        Self::new(Interval::symmetric(half)?, Interval::symmetric(half)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.r.validate()?;
        self.z.validate()
    }

    pub fn axis(&self, i: usize) -> &Interval {
        match i {
            0 => &self.r,
            _ => &self.z,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty() || self.z.is_empty()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.r.contains(p[0]) && self.z.contains(p[1])
    }

    pub fn contains_tol(&self, p: [f64; 2], tol: f64) -> bool {
        self.r.contains_tol(p[0], tol) && self.z.contains_tol(p[1], tol)
    }

    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [self.r.clamp(p[0]), self.z.clamp(p[1])]
    }

    pub fn intersect(&self, other: &Box2) -> Box2 {
        Box2 {
            r: self.r.intersect(&other.r),
            z: self.z.intersect(&other.z),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inverted_interval() {
        assert!(Interval::new(1.0, 0.0).is_err());
        assert!(Interval::new(f64::NAN, 0.0).is_err());
        assert!(Interval::new(0.0, 0.0).is_ok());
    }

    #[test]
    fn intersection_of_unbounded_is_unbounded() {
        let b = Box2::UNBOUNDED.intersect(&Box2::UNBOUNDED);
        assert_eq!(b, Box2::UNBOUNDED);
        assert!(!b.is_empty());
    }

    #[test]
    fn disjoint_intersection_is_empty() {
        let a = Interval::new(0.0, 1.0).unwrap();
        let b = Interval::new(2.0, 3.0).unwrap();
        assert!(a.intersect(&b).is_empty());
    }
}
