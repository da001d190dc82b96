//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All algorithms are written against [`Real`], which is implemented for
//! `f32` and `f64`. Complex samples use [`Complex<T>`] from `num-complex`
//! (re-exported by nalgebra) and the elementary complex functions go through
//! nalgebra's `ComplexField` so that no `num_traits::Float` bound is needed.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::{ComplexField, RealField};

pub use nalgebra::Complex;

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real: RealField + Copy + LowerExp + Debug + Display {}

impl Real for f32 {}
impl Real for f64 {}

/// Convert an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(v: f64) -> T {
    nalgebra::convert::<f64, T>(v)
}

/// Widen `T` to `f64` (lossless for both supported types).
#[inline]
pub fn to_f64<T: Real>(v: T) -> f64 {
    nalgebra::try_convert::<T, f64>(v).expect("f32/f64 always widen to f64")
}

#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    lit(n as f64)
}

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub fn creal<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

/// `e^{iθ}`.
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

#[inline]
pub fn cexp<T: Real>(z: Complex<T>) -> Complex<T> {
    ComplexField::exp(z)
}

#[inline]
pub fn cln<T: Real>(z: Complex<T>) -> Complex<T> {
    ComplexField::ln(z)
}

#[inline]
pub fn csqrt<T: Real>(z: Complex<T>) -> Complex<T> {
    ComplexField::sqrt(z)
}

#[inline]
pub fn ccosh<T: Real>(z: Complex<T>) -> Complex<T> {
    ComplexField::cosh(z)
}

#[inline]
pub fn ctanh<T: Real>(z: Complex<T>) -> Complex<T> {
    ComplexField::tanh(z)
}

#[inline]
pub fn cabs<T: Real>(z: Complex<T>) -> T {
    z.norm_sqr().sqrt()
}

#[inline]
pub fn cfinite<T: Real>(z: Complex<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip() {
        assert_eq!(to_f64(lit::<f64>(0.25)), 0.25);
        assert_eq!(to_f64(lit::<f32>(0.5)), 0.5);
        assert_eq!(from_usize::<f64>(7), 7.0);
    }

    #[test]
    fn complex_helpers() {
        let z = cis(std::f64::consts::FRAC_PI_2);
        assert!((z.re).abs() < 1e-15 && (z.im - 1.0).abs() < 1e-15);
        let e = cexp(cplx(0.0, std::f64::consts::PI));
        assert!((e.re + 1.0).abs() < 1e-15);
        assert!((cabs(cplx(3.0f64, 4.0)) - 5.0).abs() < 1e-15);
        assert!(!cfinite(cplx(f64::NAN, 0.0)));
    }
}
