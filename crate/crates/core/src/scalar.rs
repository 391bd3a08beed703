//! Floating point abstraction shared by every numerical routine.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Real scalar used for coordinates, rates and every derived quantity.
///
/// Implemented for `f32` and `f64`. Random draws and special-function
/// evaluations that have no generic formulation go through `f64` and are
/// converted with [`Scalar::lit`].
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Complementary error function.
    fn erfc(self) -> Self;

    /// Converts an `f64` literal or computed constant.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::lit(n as f64)
    }

    /// Unit roundoff of the type.
    fn unit_roundoff() -> Self {
        Self::epsilon() / Self::lit(2.0)
    }
}

impl Scalar for f64 {
    #[inline]
    fn erfc(self) -> f64 {
        libm::erfc(self)
    }
}

impl Scalar for f32 {
    #[inline]
    fn erfc(self) -> f32 {
        libm::erfcf(self)
    }
}
