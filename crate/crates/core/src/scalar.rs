//! Scalar abstraction shared by every numeric module.

use nalgebra::{Complex, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point type the numerical core is generic over (`f32` or `f64`).
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Default {
    /// Tolerance used when checking normalization and Hermiticity contracts.
    fn contract_tol() -> Self;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn contract_tol() -> Self {
        1e-10
    }
}

impl Real for f32 {
    fn contract_tol() -> Self {
        1e-4
    }
}

pub type C<R> = Complex<R>;

pub(crate) fn czero<R: Real>() -> C<R> {
    Complex::new(R::zero(), R::zero())
}

pub fn creal<R: Real>(x: R) -> C<R> {
    Complex::new(x, R::zero())
}

pub(crate) fn norm_sqr<R: Real>(v: &[C<R>]) -> R {
    v.iter().fold(R::zero(), |acc, z| acc + z.norm_sqr())
}

pub(crate) fn norm<R: Real>(v: &[C<R>]) -> R {
    norm_sqr(v).sqrt()
}

/// `<x|y>` with the conjugate on the left argument.
pub(crate) fn inner<R: Real>(x: &[C<R>], y: &[C<R>]) -> C<R> {
    x.iter().zip(y).fold(czero(), |acc, (a, b)| acc + a.conj() * b)
}

pub(crate) fn to_complex<R: Real>(v: &[R]) -> Vec<C<R>> {
    v.iter().map(|&x| creal(x)).collect()
}

/// `|z|` (works for any [`Real`], unlike `Complex::norm`).
pub fn cabs<R: Real>(z: C<R>) -> R {
    z.norm_sqr().sqrt()
}

pub fn carg<R: Real>(z: C<R>) -> R {
    z.im.atan2(z.re)
}

pub fn cis<R: Real>(theta: R) -> C<R> {
    Complex::new(theta.cos(), theta.sin())
}
