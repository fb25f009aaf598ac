//! Scalar abstractions shared by the whole engine.
//!
//! [`Real`] is the base field (`f32` or `f64`). [`Scalar`] is anything the
//! geometric code can be evaluated over: the base field itself, first-order
//! multi-seed duals ([`Dual`](crate::calculus::Dual)) and nilpotent jets
//! ([`Jet`](crate::calculus::Jet)). Every map that
//! enters the engine is evaluated through [`Scalar::eval_map`], so the same
//! generic code path produces values, Jacobians and iterated directional
//! derivatives.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{Float, FloatConst, NumCast, ToPrimitive};

use crate::calculus::SmoothMap;

/// Number type the engine can push through maps, solves and factorizations.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    type Real: Real;

    fn from_real(r: Self::Real) -> Self;
    /// Primal part.
    fn value(&self) -> Self::Real;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, n: i32) -> Self;

    /// True when every stored component is finite.
    fn is_finite(&self) -> bool;

    /// Evaluates `map` at `x` using the map's entry point for this scalar type.
    fn eval_map(map: &dyn SmoothMap<Self::Real>, x: &[Self]) -> Vec<Self>;

    fn zero() -> Self {
        Self::from_real(Self::Real::ZERO)
    }

    fn one() -> Self {
        Self::from_real(Self::Real::ONE)
    }

    /// Lifts an `f64` literal.
    fn c(x: f64) -> Self {
        Self::from_real(Self::Real::from_f64(x))
    }

    fn scale(self, r: Self::Real) -> Self {
        self * Self::from_real(r)
    }
}

/// Base field of the engine.
pub trait Real:
    Scalar<Real = Self> + PartialOrd + Display + LowerExp + Default + Sum + NumCast + ToPrimitive
{
    const ZERO: Self;
    const ONE: Self;

    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
    fn abs(self) -> Self;
    fn max(self, other: Self) -> Self;
    fn min(self, other: Self) -> Self;
    fn epsilon() -> Self;
    fn pi() -> Self;
    fn ln(self) -> Self;
    fn powf(self, e: Self) -> Self;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Scalar for $t {
            type Real = $t;

            #[inline]
            fn from_real(r: $t) -> Self {
                r
            }
            #[inline]
            fn value(&self) -> $t {
                *self
            }
            #[inline]
            fn sin(self) -> Self {
                Float::sin(self)
            }
            #[inline]
            fn cos(self) -> Self {
                Float::cos(self)
            }
            #[inline]
            fn exp(self) -> Self {
                Float::exp(self)
            }
            #[inline]
            fn sqrt(self) -> Self {
                Float::sqrt(self)
            }
            #[inline]
            fn powi(self, n: i32) -> Self {
                Float::powi(self, n)
            }
            #[inline]
            fn is_finite(&self) -> bool {
                Float::is_finite(*self)
            }
            fn eval_map(map: &dyn SmoothMap<$t>, x: &[Self]) -> Vec<Self> {
                map.eval(x)
            }
        }

        impl Real for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;

            #[inline]
            fn from_f64(x: f64) -> Self {
                <$t as NumCast>::from(x).unwrap_or(<$t>::NAN)
            }
            #[inline]
            fn as_f64(self) -> f64 {
                ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
            }
            #[inline]
            fn abs(self) -> Self {
                Float::abs(self)
            }
            #[inline]
            fn max(self, other: Self) -> Self {
                Float::max(self, other)
            }
            #[inline]
            fn min(self, other: Self) -> Self {
                Float::min(self, other)
            }
            #[inline]
            fn epsilon() -> Self {
                <$t as Float>::epsilon()
            }
            #[inline]
            fn pi() -> Self {
                <$t as FloatConst>::PI()
            }
            #[inline]
            fn ln(self) -> Self {
                Float::ln(self)
            }
            #[inline]
            fn powf(self, e: Self) -> Self {
                Float::powf(self, e)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Euclidean norm of a real vector.
pub fn norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Max-abs norm of a real vector.
pub fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::ZERO, |acc, &x| acc.max(x.abs()))
}

/// Euclidean distance between two real vectors of equal length.
pub fn distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Lifts a slice of reals into any scalar type.
pub fn lift<S: Scalar>(x: &[S::Real]) -> Vec<S> {
    x.iter().map(|&v| S::from_real(v)).collect()
}

/// Primal parts of a slice of scalars.
pub fn values<S: Scalar>(x: &[S]) -> Vec<S::Real> {
    x.iter().map(Scalar::value).collect()
}
