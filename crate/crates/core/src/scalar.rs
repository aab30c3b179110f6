//! Scalar abstraction: the whole library is generic over the floating-point
//! type. `f64` is the default used by the CLI; `f32` halves memory on the
//! large 4D grids at the cost of tolerance headroom.

use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Floating-point scalar usable for all grid and cone arithmetic.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Shorthand for lossy conversion from an `f64` literal.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal must convert")
    }

    /// Lossy conversion to `f64` for reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Convenience free function mirroring [`Scalar::of`].
#[inline]
pub fn real<T: Scalar>(x: f64) -> T {
    T::of(x)
}
