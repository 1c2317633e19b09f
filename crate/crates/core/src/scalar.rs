//! Floating point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// A real scalar: `f32` or `f64`.
///
/// All model arithmetic is written against this trait. Experiments run in
/// `f64`; `f32` is supported for the library routines but sup-norm style
/// statistics spanning several decades should stay in double precision.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + ndarray::ScalarOperand
    + 'static
{
    /// Converts an `f64` literal into this type.
    fn lit(v: f64) -> Self;

    /// Lossy view as `f64`, used for metrics and text output.
    fn as_f64(self) -> f64;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn lit(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// Hyperbolic secant squared, `1 - tanh(u)^2`, given `tanh(u)`.
#[inline]
pub(crate) fn sech2_from_tanh<T: Scalar>(t: T) -> T {
    T::one() - t * t
}
