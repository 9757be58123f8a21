//! Scalar abstraction shared by every geometric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar the geometry is generic over: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }

    /// Absolute tolerance for invariant checks: `base` for `f64`, widened to
    /// the type's own resolution for coarser types.
    #[inline]
    fn tolerance(base: f64) -> Self {
        let eps = Self::epsilon().as_f64();
        Self::lit(base.max(1e4 * eps))
    }
}

impl Real for f32 {}
impl Real for f64 {}
