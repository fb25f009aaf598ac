use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::calculus::SmoothMap;
use crate::scalar::{Real, Scalar};

/// Largest number of simultaneous seeds a [`Dual`] carries.
pub const MAX_SEEDS: usize = 16;

/// First-order forward-mode dual number with up to [`MAX_SEEDS`] partials.
///
/// `len` is the number of active seeds. Constants have `len == 0` and are
/// broadcast against seeded values; entries past `len` are always zero.
#[derive(Clone, Copy)]
pub struct Dual<T: Real> {
    value: T,
    grad: [T; MAX_SEEDS],
    len: u8,
}

impl<T: Real> Dual<T> {
    pub fn constant(value: T) -> Self {
        Dual {
            value,
            grad: [T::ZERO; MAX_SEEDS],
            len: 0,
        }
    }

    /// Independent variable `value` carrying a unit partial in slot `seed` of `len`.
    pub fn variable(value: T, seed: usize, len: usize) -> Self {
        assert!(len <= MAX_SEEDS && seed < len, "seed {seed} out of range for {len} seeds");
        let mut grad = [T::ZERO; MAX_SEEDS];
        grad[seed] = T::ONE;
        Dual {
            value,
            grad,
            len: len as u8,
        }
    }

    /// Value with an explicit tangent vector.
    pub fn with_tangent(value: T, tangent: &[T]) -> Self {
        assert!(tangent.len() <= MAX_SEEDS);
        let mut grad = [T::ZERO; MAX_SEEDS];
        grad[..tangent.len()].copy_from_slice(tangent);
        Dual {
            value,
            grad,
            len: tangent.len() as u8,
        }
    }

    pub fn real(&self) -> T {
        self.value
    }

    pub fn seeds(&self) -> usize {
        self.len as usize
    }

    /// Partial derivative with respect to seed `i` (zero past the active length).
    pub fn partial(&self, i: usize) -> T {
        if i < MAX_SEEDS {
            self.grad[i]
        } else {
            T::ZERO
        }
    }

    pub fn gradient(&self) -> &[T] {
        &self.grad[..self.len as usize]
    }

    /// Chain rule for a unary function with value `f` and derivative `df` at `self.value`.
    #[inline]
    fn chain(&self, f: T, df: T) -> Self {
        let mut grad = [T::ZERO; MAX_SEEDS];
        for i in 0..self.len as usize {
            grad[i] = df * self.grad[i];
        }
        Dual {
            value: f,
            grad,
            len: self.len,
        }
    }
}

impl<T: Real> fmt::Debug for Dual<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dual({:?}, {:?})", self.value, self.gradient())
    }
}

impl<T: Real> PartialEq for Dual<T> {
    fn eq(&self, other: &Self) -> bool {
        let n = self.len.max(other.len) as usize;
        self.value == other.value && self.grad[..n] == other.grad[..n]
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        let len = self.len.max(rhs.len);
        let mut grad = [T::ZERO; MAX_SEEDS];
        for i in 0..len as usize {
            grad[i] = self.grad[i] + rhs.grad[i];
        }
        Dual {
            value: self.value + rhs.value,
            grad,
            len,
        }
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        let len = self.len.max(rhs.len);
        let mut grad = [T::ZERO; MAX_SEEDS];
        for i in 0..len as usize {
            grad[i] = self.grad[i] - rhs.grad[i];
        }
        Dual {
            value: self.value - rhs.value,
            grad,
            len,
        }
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let len = self.len.max(rhs.len);
        let mut grad = [T::ZERO; MAX_SEEDS];
        for i in 0..len as usize {
            grad[i] = self.value * rhs.grad[i] + rhs.value * self.grad[i];
        }
        Dual {
            value: self.value * rhs.value,
            grad,
            len,
        }
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let len = self.len.max(rhs.len);
        let inv = T::ONE / rhs.value;
        let value = self.value * inv;
        let mut grad = [T::ZERO; MAX_SEEDS];
        for i in 0..len as usize {
            grad[i] = (self.grad[i] - value * rhs.grad[i]) * inv;
        }
        Dual { value, grad, len }
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.chain(-self.value, -T::ONE)
    }
}

impl<T: Real> Scalar for Dual<T> {
    type Real = T;

    fn from_real(r: T) -> Self {
        Dual::constant(r)
    }

    fn value(&self) -> T {
        self.value
    }

    fn sin(self) -> Self {
        self.chain(self.value.sin(), self.value.cos())
    }

    fn cos(self) -> Self {
        self.chain(self.value.cos(), -self.value.sin())
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }

    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, T::ONE / (T::from_f64(2.0) * s))
    }

    fn powi(self, n: i32) -> Self {
        match n {
            0 => Dual::constant(T::ONE),
            1 => self,
            _ => {
                let d = T::from_f64(n as f64) * self.value.powi(n - 1);
                self.chain(self.value.powi(n), d)
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.value.is_finite() && self.gradient().iter().all(|g| g.is_finite())
    }

    fn eval_map(map: &dyn SmoothMap<T>, x: &[Self]) -> Vec<Self> {
        map.eval_dual(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(v: f64, i: usize) -> Dual<f64> {
        Dual::variable(v, i, 2)
    }

    #[test]
    fn product_rule_is_exact() {
        let x = var(2.0, 0);
        let y = var(3.0, 1);
        let f = x * y + x.powi(2);
        assert_eq!(f.value(), 10.0);
        assert_eq!(f.gradient(), &[7.0, 2.0]);
    }

    #[test]
    fn quotient_and_transcendentals() {
        let x = var(0.5, 0);
        let f = x.sin() / x.exp();
        let expected = (0.5f64.cos() - 0.5f64.sin()) / 0.5f64.exp();
        assert!((f.partial(0) - expected).abs() < 1e-15);
        let s = var(4.0, 0).sqrt();
        assert_eq!(s.partial(0), 0.25);
    }

    #[test]
    fn constants_broadcast_against_seeded_values() {
        let c = Dual::constant(5.0);
        let x = var(1.0, 1);
        let f = c * x - c;
        assert_eq!(f.seeds(), 2);
        assert_eq!(f.gradient(), &[0.0, 5.0]);
    }

    #[test]
    fn powi_zero_has_zero_derivative_at_origin() {
        let x = var(0.0, 0);
        assert_eq!(x.powi(0).partial(0), 0.0);
        assert_eq!(x.powi(1).partial(0), 1.0);
        assert_eq!(x.powi(2).partial(0), 0.0);
    }
}
