//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the geometry, photometric and solver code is generic over.
///
/// Implemented for `f32` and `f64`. The pipeline and the file formats run in `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    /// Machine epsilon scaled for tolerance checks that should hold in any precision.
    #[inline]
    fn tiny() -> Self {
        Self::epsilon() * Self::of(16.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}
