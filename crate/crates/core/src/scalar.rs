//! Scalar abstraction shared by every numeric routine in the crate.

use nalgebra as na;
use num_traits as nt;

/// Real floating point type the network math is generic over (`f32` or `f64`).
pub trait Real:
    Copy + na::RealField + na::Scalar + nt::FromPrimitive + nt::ToPrimitive + nt::FloatConst
{
    /// Converts an `f64` literal into `Self`.
    fn lit(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    /// Lossy conversion used for diagnostics and reporting.
    fn as_f64(self) -> f64 {
        nt::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Converts a count into `Self`.
    fn from_count(n: usize) -> Self {
        <Self as nt::FromPrimitive>::from_usize(n).expect("count representable")
    }

    /// Positive floor that guards divisions by a vanishing norm.
    fn tiny() -> Self {
        Self::lit(1e-30)
    }

    /// Relative tolerance used for structural checks such as diagonalization residuals.
    fn structural_tol() -> Self {
        let eps = Self::default_epsilon() * Self::lit(1e5);
        na::RealField::max(eps, Self::lit(1e-9))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over `T`.
pub type Complex<T> = num_complex::Complex<T>;
