//! Floating-point abstraction shared by the channel algebra, the bound
//! recursions and the decoder.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// f32 or f64.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + Sum + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Slack accepted when a caller-supplied mass function is checked to sum
    /// to one. Accepted inputs are renormalized afterwards.
    fn mass_tolerance() -> Self;

    /// Smallest absolute step worth taking in a bisection.
    fn bisection_floor() -> Self;

    /// Converts an `f64` literal. Every `f64` is representable (possibly
    /// rounded) in both implementors, so this never fails.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn mass_tolerance() -> Self {
        1e-9
    }

    fn bisection_floor() -> Self {
        1e-13
    }
}

impl Scalar for f32 {
    fn mass_tolerance() -> Self {
        1e-4
    }

    fn bisection_floor() -> Self {
        1e-7
    }
}
