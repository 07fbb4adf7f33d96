//! Scalar abstraction shared by the analytic modules.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar the analytic solution is generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Absolute tolerance floor: `base`, raised to a few ulps when the type cannot resolve it.
    fn tol(base: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(16.0);
        Self::lit(base).max(floor)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Principal argument normalized to (−π, π]; `atan2` returns −π for a negative-zero imaginary part.
pub fn principal_arg<T: Real>(z: Complex<T>) -> T {
    let a = z.im.atan2(z.re);
    if a <= -T::PI() {
        T::PI()
    } else {
        a
    }
}

/// Shifts `angle` by a multiple of 2π so that it lies closest to `reference`.
pub fn unwrap_near<T: Real>(angle: T, reference: T) -> T {
    let two_pi = T::PI() + T::PI();
    let turns = ((reference - angle) / two_pi).round();
    angle + turns * two_pi
}
