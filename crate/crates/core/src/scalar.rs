//! Scalar abstractions.
//!
//! The polynomial, basis and shift code only needs field arithmetic and is
//! written against [`Scalar`], so it runs on `f32`, `f64` and exact rationals
//! alike. Geometry and quadrature need square roots and trigonometry and are
//! written against [`Real`].

use std::fmt::Debug;

pub use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, ToPrimitive};

/// Field-like number type: exact rationals as well as IEEE floats.
pub trait Scalar:
    Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + FromRational + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Clone
        + Debug
        + PartialOrd
        + Num
        + Signed
        + FromPrimitive
        + FromRational
        + Send
        + Sync
        + 'static
{
}

/// Nearest value to an exact rational.
pub trait FromRational {
    fn from_rational(r: &BigRational) -> Self;
}

impl FromRational for f64 {
    fn from_rational(r: &BigRational) -> Self {
        r.to_f64().expect("rational is finite")
    }
}

impl FromRational for f32 {
    fn from_rational(r: &BigRational) -> Self {
        r.to_f32().expect("rational is finite")
    }
}

impl FromRational for BigRational {
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
}

/// Floating point scalar: `f32` or `f64`.
pub trait Real: Scalar + Float + FloatConst + Copy {}

impl<T> Real for T where T: Scalar + Float + FloatConst + Copy {}

/// Converts a small integer into any scalar type.
#[inline]
pub fn from_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("integer is representable in every scalar type")
}

/// Converts an `f64` literal into any scalar type (exactly, for rationals).
#[inline]
pub fn from_f64<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("finite literal")
}

/// `n!` as a scalar.
pub fn factorial<T: Scalar>(n: usize) -> T {
    from_usize::<T>(FACTORIALS[n] as usize)
}

/// Binomial coefficient `n choose k` as a scalar.
pub fn binomial<T: Scalar>(n: usize, k: usize) -> T {
    debug_assert!(k <= n);
    from_usize::<T>((FACTORIALS[n] / (FACTORIALS[k] * FACTORIALS[n - k])) as usize)
}

/// Factorials through 20!, the largest that fits in a `u64`.
pub const FACTORIALS: [u64; 21] = {
    let mut table = [1u64; 21];
    let mut i = 1;
    while i < 21 {
        table[i] = table[i - 1] * i as u64;
        i += 1;
    }
    table
};

pub(crate) fn dot<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn sub<T: Real>(a: [T; 2], b: [T; 2]) -> [T; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn norm<T: Real>(a: [T; 2]) -> T {
    a[0].hypot(a[1])
}
