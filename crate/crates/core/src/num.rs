//! Scalar abstraction shared by every solver component.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar the simulator is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        // from_f64 is infallible for f32/f64 (overflow saturates to inf)
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count into the scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Maximum absolute value of a slice (0 for an empty slice).
pub fn max_abs<T: Real>(values: &[T]) -> T {
    values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
}

/// Maximum absolute difference between two slices of equal length.
pub fn max_abs_diff<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc.max((*x - *y).abs()))
}
