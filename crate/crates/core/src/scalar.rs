//! Scalar abstraction shared by every numeric routine in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar type the engine is generic over (`f32` or `f64`).
///
/// Literals in expression trees are stored as `f64` and converted with
/// [`Real::lit`] at evaluation time.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Converts an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal is representable")
    }

    /// Lossless (f64) or widening (f32) conversion for reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the scalar type.
    fn machine_eps() -> Self;

    /// Central finite-difference step for coordinate value `x`:
    /// `h = max(1, |x|) * eps^(1/3)`.
    fn fd_step(x: Self) -> Self {
        let scale = if x.abs() > Self::one() { x.abs() } else { Self::one() };
        scale * Self::machine_eps().cbrt()
    }
}

impl Real for f64 {
    fn machine_eps() -> Self {
        f64::EPSILON
    }
}

impl Real for f32 {
    fn machine_eps() -> Self {
        f32::EPSILON
    }
}

/// Max-norm of a slice.
pub fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}
