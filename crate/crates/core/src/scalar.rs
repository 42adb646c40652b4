//! Scalar abstraction for the numeric kernels.
//!
//! Everything numeric in this crate is generic over [`Real`], which is any
//! floating-point type nalgebra can factorize (`f32`, `f64`). The on-disk
//! formats and the CLI are pinned to `f64`; the concrete aliases at the crate
//! root reflect that.

use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the toolkit.
///
/// Combines nalgebra's `RealField` (elementary functions, decompositions)
/// with num-traits conversions so tolerances and literals can be written as
/// `f64` constants regardless of the working precision.
pub trait Real:
    nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default + std::iter::Sum
{
    /// Converts an `f64` constant into the working precision.
    ///
    /// Panics on values unrepresentable in the target type; constants used
    /// through this path are all finite and modest in magnitude.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 constant")
    }

    /// Widens to `f64` for reporting and serialization.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("real scalar widens to f64")
    }

    /// Machine epsilon of the working precision.
    fn eps() -> Self;
}

impl Real for f32 {
    fn eps() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn eps() -> Self {
        f64::EPSILON
    }
}
