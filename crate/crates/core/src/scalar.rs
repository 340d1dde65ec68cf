//! Scalar abstraction for the numeric core.
//!
//! Everything that is pure arithmetic (distributions, t-tests, the Mahalanobis
//! cost and its gradient, caliper filtering, greedy matching, fairness gaps) is
//! written against [`Real`], so it can be instantiated with `f64` for audits or
//! `f32` for memory-tight candidate sets.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type usable by the numeric core.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only for values the type cannot hold,
    /// which never happens for the constants used in this crate.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + Sum
        + Default
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Total order on floats with NaN sorted last, used for deterministic sorts.
#[inline]
pub(crate) fn cmp_total<T: Real>(a: T, b: T) -> std::cmp::Ordering {
    match a.partial_cmp(&b) {
        Some(o) => o,
        None => a.is_nan().cmp(&b.is_nan()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        assert_eq!(<f64 as Real>::lit(0.25), 0.25);
        assert_eq!(<f32 as Real>::lit(0.25), 0.25f32);
        assert_eq!(<f64 as Real>::from_count(7), 7.0);
    }

    #[test]
    fn nan_sorts_last() {
        let mut v = [2.0, f64::NAN, -1.0];
        v.sort_by(|a, b| cmp_total(*a, *b));
        assert_eq!(v[0], -1.0);
        assert_eq!(v[1], 2.0);
        assert!(v[2].is_nan());
    }
}
