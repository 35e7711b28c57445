//! Dyadic intervals on the time axis `[0,1)` and on the frequency line, plus
//! the real intervals derived from them (`aI`, `I*`, `Ĩ`).
//!
//! A dyadic interval is stored as the exact pair `(scale, index)`; its
//! endpoints are `index·2^-scale` and `(index+1)·2^-scale`. Real endpoints
//! are computed on demand, which is exact in `f64` for every scale used here.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Time,
    #[serde(rename = "freq")]
    Frequency,
}

/// Half-open dyadic interval `[j·2^-k, (j+1)·2^-k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub scale: i32,
    pub index: i64,
    pub axis: Axis,
}

/// Closed-open real interval `[left, right)`. Empty when `left >= right`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealInterval {
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum DyadicError {
    #[error("time interval escapes [0,1): scale {scale}, index {index}")]
    OutsideUnit { scale: i32, index: i64 },
    #[error("negative scale {0} is only allowed on the frequency axis")]
    NegativeTimeScale(i32),
}

impl DyadicInterval {
    pub fn time(scale: i32, index: i64) -> Self {
        Self { scale, index, axis: Axis::Time }
    }

    pub fn freq(scale: i32, index: i64) -> Self {
        Self { scale, index, axis: Axis::Frequency }
    }

    /// Checked constructor for time intervals inside `[0,1)`.
    pub fn checked_time(scale: i32, index: i64) -> Result<Self, DyadicError> {
        let i = Self::time(scale, index);
        i.validate()?;
        Ok(i)
    }

    pub fn validate(&self) -> Result<(), DyadicError> {
        if self.axis == Axis::Time {
            if self.scale < 0 {
                return Err(DyadicError::NegativeTimeScale(self.scale));
            }
            if self.index < 0 || self.index >= (1i64 << self.scale) {
                return Err(DyadicError::OutsideUnit { scale: self.scale, index: self.index });
            }
        }
        Ok(())
    }

    /// The dyadic interval of the given scale and axis containing `x`.
    pub fn containing(x: f64, scale: i32, axis: Axis) -> Self {
        let index = (x * pow2(scale)).floor() as i64;
        Self { scale, index, axis }
    }

    pub fn length(&self) -> f64 {
        pow2(-self.scale)
    }

    pub fn left(&self) -> f64 {
        self.index as f64 * pow2(-self.scale)
    }

    pub fn right(&self) -> f64 {
        (self.index + 1) as f64 * pow2(-self.scale)
    }

    pub fn center(&self) -> f64 {
        (self.index as f64 + 0.5) * pow2(-self.scale)
    }

    pub fn to_real(&self) -> RealInterval {
        RealInterval::new(self.left(), self.right())
    }

    pub fn contains_point(&self, x: f64) -> bool {
        x >= self.left() && x < self.right()
    }

    /// `self ⊆ other` for intervals on the same axis.
    pub fn is_subset_of(&self, other: &DyadicInterval) -> bool {
        if self.axis != other.axis || self.scale < other.scale {
            return false;
        }
        let shift = (self.scale - other.scale) as u32;
        (self.index >> shift) == other.index
    }

    pub fn intersects(&self, other: &DyadicInterval) -> bool {
        self.is_subset_of(other) || other.is_subset_of(self)
    }

    /// The dyadic ancestor at a coarser (smaller) scale.
    pub fn ancestor(&self, scale: i32) -> DyadicInterval {
        assert!(scale <= self.scale, "ancestor scale must not be finer");
        let shift = (self.scale - scale) as u32;
        DyadicInterval { scale, index: self.index >> shift, axis: self.axis }
    }

    pub fn parent(&self) -> DyadicInterval {
        self.ancestor(self.scale - 1)
    }

    pub fn children(&self) -> [DyadicInterval; 2] {
        let s = self.scale + 1;
        [
            DyadicInterval { scale: s, index: 2 * self.index, axis: self.axis },
            DyadicInterval { scale: s, index: 2 * self.index + 1, axis: self.axis },
        ]
    }

    /// Same length, centre shifted by `+|I|`. The result is not checked
    /// against `[0,1)`; see [`DyadicInterval::validate`].
    pub fn right_brother(&self) -> DyadicInterval {
        DyadicInterval { index: self.index + 1, ..*self }
    }

    pub fn left_brother(&self) -> DyadicInterval {
        DyadicInterval { index: self.index - 1, ..*self }
    }

    /// Shift by `m` lengths.
    pub fn shifted(&self, m: i64) -> DyadicInterval {
        DyadicInterval { index: self.index + m, ..*self }
    }

    pub fn dilate(&self, a: f64) -> RealInterval {
        self.to_real().dilate(a)
    }

    /// `(I*_r, I*_l)`.
    pub fn star_intervals(&self) -> (RealInterval, RealInterval) {
        let c = self.center();
        let l = self.length();
        (
            RealInterval::new(c + 3.5 * l, c + 5.5 * l),
            RealInterval::new(c - 5.5 * l, c - 3.5 * l),
        )
    }

    /// `Ĩ = 13 I`.
    pub fn tilde(&self) -> RealInterval {
        self.dilate(13.0)
    }

    /// All `2^scale` time intervals of a scale, left to right.
    pub fn time_grid(scale: i32) -> impl Iterator<Item = DyadicInterval> {
        (0..(1i64 << scale)).map(move |j| DyadicInterval::time(scale, j))
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.left(), self.right())
    }
}

impl RealInterval {
    pub fn new(left: f64, right: f64) -> Self {
        Self { left, right }
    }

    pub fn empty() -> Self {
        Self { left: 0.0, right: 0.0 }
    }

    pub fn length(&self) -> f64 {
        (self.right - self.left).max(0.0)
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.left + self.right)
    }

    pub fn is_empty(&self) -> bool {
        self.left >= self.right
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.left && x < self.right
    }

    pub fn contains_closed(&self, x: f64) -> bool {
        x >= self.left && x <= self.right
    }

    pub fn intersect(&self, other: &RealInterval) -> RealInterval {
        let r = RealInterval::new(self.left.max(other.left), self.right.min(other.right));
        if r.is_empty() {
            RealInterval::empty()
        } else {
            r
        }
    }

    pub fn dilate(&self, a: f64) -> RealInterval {
        assert!(a > 0.0, "dilation factor must be positive");
        let c = self.center();
        let h = 0.5 * a * (self.right - self.left);
        RealInterval::new(c - h, c + h)
    }

    /// Distance from `x` to the closed interval.
    pub fn dist(&self, x: f64) -> f64 {
        if x < self.left {
            self.left - x
        } else if x > self.right {
            x - self.right
        } else {
            0.0
        }
    }
}

/// `2^e` for small integer exponents (exact).
pub fn pow2(e: i32) -> f64 {
    f64::powi(2.0, e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centers() {
        assert_eq!(DyadicInterval::time(1, 0).center(), 0.25);
        assert_eq!(DyadicInterval::time(0, 0).center(), 0.5);
        assert_eq!(DyadicInterval::time(3, 6).center(), 0.8125);
    }

    #[test]
    fn brothers() {
        let i = DyadicInterval::time(1, 0);
        assert_eq!(i.right_brother(), DyadicInterval::time(1, 1));
        assert_eq!(DyadicInterval::time(1, 1).left_brother(), i);
        assert_eq!(DyadicInterval::time(2, 0).right_brother(), DyadicInterval::time(2, 1));
        assert_eq!(i.right_brother().center(), i.center() + i.length());
        assert!(DyadicInterval::time(1, 1).right_brother().validate().is_err());
    }

    #[test]
    fn dilations() {
        let u = DyadicInterval::time(0, 0);
        assert_eq!(u.dilate(13.0), RealInterval::new(-6.0, 7.0));
        assert_eq!(u.dilate(1.0), RealInterval::new(0.0, 1.0));
        assert_eq!(DyadicInterval::time(2, 1).dilate(2.0), RealInterval::new(0.125, 0.625));
        let twice = u.dilate(3.0).dilate(5.0);
        assert_eq!(twice, u.dilate(15.0));
    }

    #[test]
    fn stars() {
        let (r, l) = DyadicInterval::time(0, 0).star_intervals();
        assert_eq!(r, RealInterval::new(4.0, 6.0));
        assert_eq!(l, RealInterval::new(-5.0, -3.0));
        let (r, _) = DyadicInterval::time(1, 0).star_intervals();
        assert_eq!(r, RealInterval::new(2.0, 3.0));
    }

    #[test]
    fn star_distance_band() {
        for k in 0..6 {
            for i in DyadicInterval::time_grid(k) {
                let (r, l) = i.star_intervals();
                assert_eq!(r.length(), 2.0 * i.length());
                assert_eq!(r.left - i.right(), 3.0 * i.length());
                assert_eq!(i.left() - l.right, 3.0 * i.length());
                assert_eq!(r.right - i.right(), 5.0 * i.length());
            }
        }
    }

    #[test]
    fn sibling_partition_exhaustive() {
        for k in 0..=12 {
            let mut next = 0.0;
            let mut count = 0;
            for i in DyadicInterval::time_grid(k) {
                assert_eq!(i.left(), next);
                next = i.right();
                count += 1;
            }
            assert_eq!(next, 1.0);
            assert_eq!(count, 1usize << k);
        }
    }

    #[test]
    fn nesting() {
        let a = DyadicInterval::time(3, 5);
        assert!(a.is_subset_of(&DyadicInterval::time(1, 1)));
        assert!(!a.is_subset_of(&DyadicInterval::time(1, 0)));
        assert_eq!(a.ancestor(0), DyadicInterval::time(0, 0));
        let f = DyadicInterval::freq(-3, -1);
        assert_eq!(f.left(), -8.0);
        assert_eq!(f.length(), 8.0);
        assert!(DyadicInterval::freq(-1, -3).is_subset_of(&f));
        assert!(!DyadicInterval::freq(-1, 0).is_subset_of(&f));
    }

    #[test]
    fn json_shape() {
        let s = serde_json::to_string(&DyadicInterval::freq(-2, 3)).unwrap();
        assert_eq!(s, r#"{"scale":-2,"index":3,"axis":"freq"}"#);
        let t: DyadicInterval = serde_json::from_str(r#"{"scale":1,"index":1,"axis":"time"}"#).unwrap();
        assert_eq!(t, DyadicInterval::time(1, 1));
    }
}
