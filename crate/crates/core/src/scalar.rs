//! Floating-point abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used throughout the crate: `f32` or `f64`.
///
/// Text and JSON I/O go through `f64`, which is lossless for both widths.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    /// Conversion from a count.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count is representable in every Scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}


/// Mean accumulated as offsets from the first value, so a run of equal
/// values averages to exactly that value. Returns the count alongside.
pub(crate) fn pivot_mean<T: Scalar>(mut values: impl Iterator<Item = T>) -> Option<(T, usize)> {
    let first = values.next()?;
    let (offset, count) = values.fold((T::zero(), 1usize), |(s, n), y| (s + (y - first), n + 1));
    Some((first + offset / T::of_usize(count), count))
}
