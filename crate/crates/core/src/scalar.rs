//! Floating-point abstraction used by the numerical kernel in [`crate::stats`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar accepted by the least-squares, testing and smoothing routines.
///
/// Distribution quantiles are always evaluated in `f64`; the conversion helpers
/// below are the only bridge between the generic code and those functions.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Relative residual norm under which a column counts as collinear with the
    /// columns kept before it.
    fn rank_tolerance() -> Self;

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to every Scalar")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize converts to every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn rank_tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn rank_tolerance() -> Self {
        5e-5
    }
}
