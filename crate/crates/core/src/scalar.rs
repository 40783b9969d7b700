//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All math is written against [`Real`], implemented for `f32` and `f64`.
//! Complex quantities are `num_complex::Complex<T>` for the same `T`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + ScalarOperand
    + LinalgScalar
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type C<T> = Complex<T>;

/// `e^{j x}`.
#[inline]
pub fn cis<T: Real>(x: T) -> Complex<T> {
    Complex::new(x.cos(), x.sin())
}

/// Squared modulus.
#[inline]
pub fn abs2<T: Real>(z: Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}
