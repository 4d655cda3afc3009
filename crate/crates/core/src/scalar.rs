//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All operators, propagators and diagnostics are generic over a real field
//! `T` (in practice `f32` or `f64`); complex amplitudes are `Complex<T>`.

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable throughout the crate.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

/// Complex amplitude over `T`.
pub type C<T> = Complex<T>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("usize representable in scalar type")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn czero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub fn cone<T: Real>() -> C<T> {
    Complex::new(T::one(), T::zero())
}

#[inline]
pub fn creal<T: Real>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}

/// `e^{iθ}`.
#[inline]
pub fn cis<T: Real>(theta: T) -> C<T> {
    Complex::new(theta.cos(), theta.sin())
}

#[inline]
pub fn cabs<T: Real>(z: C<T>) -> T {
    z.re.hypot(z.im)
}

/// Principal argument in `(-π, π]`.
#[inline]
pub fn carg<T: Real>(z: C<T>) -> T {
    z.im.atan2(z.re)
}

/// Complex exponential.
#[inline]
pub fn cexp<T: Real>(z: C<T>) -> C<T> {
    cis(z.im) * z.re.exp()
}

/// Machine epsilon of `T`.
#[inline]
pub fn eps<T: Real>() -> T {
    T::default_epsilon()
}

/// Euclidean norm of a complex slice.
pub fn norm2<T: Real>(v: &[C<T>]) -> T {
    let mut scale = T::zero();
    let mut ssq = T::one();
    for z in v {
        for part in [z.re, z.im] {
            if part != T::zero() {
                let a = part.abs();
                if scale < a {
                    let r = scale / a;
                    ssq = T::one() + ssq * r * r;
                    scale = a;
                } else {
                    let r = a / scale;
                    ssq += r * r;
                }
            }
        }
    }
    scale * ssq.sqrt()
}

/// `‖a − b‖₂`.
pub fn dist2<T: Real>(a: &[C<T>], b: &[C<T>]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let d: Vec<C<T>> = a.iter().zip(b).map(|(x, y)| *x - *y).collect();
    norm2(&d)
}

/// `⟨a, b⟩ = Σ conj(a_i) b_i`.
pub fn inner<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    a.iter()
        .zip(b)
        .fold(czero(), |acc, (x, y)| acc + x.conj() * *y)
}

/// Sorts a slice of reals ascending; NaNs go last.
pub fn sort_reals<T: Real>(v: &mut [T]) {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Greater));
}
