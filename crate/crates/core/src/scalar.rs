//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! The forecasters, smoothing and certificate code need transcendental
//! functions and are bounded on [`Scalar`]. The purely order-and-sum based
//! metrics (Wasserstein-1, normalized deviation) only need [`Exact`], which
//! rational types also satisfy.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, Signed, ToPrimitive};

/// Floating point scalar used by models and Monte-Carlo code (`f32`, `f64`).
pub trait Scalar:
    Float + FloatConst + NumAssign + FromPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl<T> Scalar for T where
    T: Float + FloatConst + NumAssign + FromPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
}

/// Ordered field arithmetic without rounding requirements; satisfied by the
/// float types and by `num_rational::Ratio<i64>`.
pub trait Exact: Copy + PartialOrd + Signed + NumAssign + FromPrimitive + ToPrimitive + Debug {}

impl<T> Exact for T where T: Copy + PartialOrd + Signed + NumAssign + FromPrimitive + ToPrimitive + Debug {}
