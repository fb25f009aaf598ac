use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::calculus::SmoothMap;
use crate::scalar::{Real, Scalar};

/// Maximum number of independent nilpotent directions in a [`Jet`].
pub const MAX_DIRECTIONS: usize = 6;
const COEFFS: usize = 1 << MAX_DIRECTIONS;

/// Multilinear jet in commuting nilpotent directions `ε_0 … ε_{k-1}` with `ε_i² = 0`.
///
/// Coefficient `c[S]` multiplies `∏_{i∈S} ε_i` for the subset bitmask `S`, so
/// nested directional derivatives along different vector fields are exact.
/// Used to differentiate Lie bracket fields without finite differences.
#[derive(Clone, Copy)]
pub struct Jet<T: Real> {
    coef: [T; COEFFS],
    dirs: u8,
}

const INV_FACT: [f64; MAX_DIRECTIONS + 1] = [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0, 1.0 / 120.0, 1.0 / 720.0];

impl<T: Real> Jet<T> {
    pub fn constant(v: T) -> Self {
        let mut coef = [T::ZERO; COEFFS];
        coef[0] = v;
        Jet { coef, dirs: 0 }
    }

    pub fn directions(&self) -> usize {
        self.dirs as usize
    }

    #[inline]
    fn width(&self) -> usize {
        1 << self.dirs
    }

    /// Coefficient of the monomial given by bitmask `subset`.
    pub fn coefficient(&self, subset: usize) -> T {
        if subset < self.width() {
            self.coef[subset]
        } else {
            T::ZERO
        }
    }

    /// `self · ε_dir`. Requires that `self` does not depend on `ε_dir`.
    pub fn times_direction(&self, dir: usize) -> Self {
        assert!(dir < MAX_DIRECTIONS, "jet direction {dir} exceeds capacity");
        let dirs = self.dirs.max(dir as u8 + 1);
        let mut coef = [T::ZERO; COEFFS];
        let bit = 1usize << dir;
        for s in 0..self.width() {
            if s & bit == 0 {
                coef[s | bit] = self.coef[s];
            }
        }
        Jet { coef, dirs }
    }

    /// Coefficient of `ε_dir` as a jet in the remaining directions.
    pub fn derivative(&self, dir: usize) -> Self {
        let bit = 1usize << dir;
        let mut coef = [T::ZERO; COEFFS];
        for s in 0..self.width() {
            if s & bit != 0 {
                coef[s & !bit] = self.coef[s];
            }
        }
        let mut dirs = self.dirs;
        while dirs > 0 && (0..(1usize << dirs)).all(|s| s < (1 << (dirs - 1)) || coef[s] == T::ZERO) {
            dirs -= 1;
        }
        Jet { coef, dirs }
    }

    /// Applies `f` given its derivatives `f^(j)(a)` for `j = 0..=dirs`.
    fn compose(&self, derivs: &[T]) -> Self {
        let mut out = Jet::constant(derivs[0]);
        out.dirs = self.dirs;
        if self.dirs == 0 {
            return out;
        }
        let mut delta = *self;
        delta.coef[0] = T::ZERO;
        let mut power = delta;
        for (j, &d) in derivs.iter().enumerate().skip(1) {
            if j > self.dirs as usize {
                break;
            }
            let w = d * T::from_f64(INV_FACT[j]);
            for s in 1..self.width() {
                out.coef[s] = out.coef[s] + w * power.coef[s];
            }
            power = power * delta;
        }
        out
    }

    fn derivative_table(&self, f: impl Fn(usize) -> T) -> [T; MAX_DIRECTIONS + 1] {
        let mut d = [T::ZERO; MAX_DIRECTIONS + 1];
        for (j, slot) in d.iter_mut().enumerate().take(self.dirs as usize + 1) {
            *slot = f(j);
        }
        d
    }

    fn recip(&self) -> Self {
        let a = self.coef[0];
        let table = self.derivative_table(|j| {
            let sign = if j % 2 == 0 { T::ONE } else { -T::ONE };
            let fact: f64 = (1..=j).map(|i| i as f64).product();
            sign * T::from_f64(fact) * a.powi(-(j as i32) - 1)
        });
        self.compose(&table)
    }
}

impl<T: Real> fmt::Debug for Jet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet{:?}", &self.coef[..self.width()])
    }
}

impl<T: Real> Add for Jet<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let dirs = self.dirs.max(rhs.dirs);
        let mut coef = [T::ZERO; COEFFS];
        for (s, c) in coef.iter_mut().enumerate().take(1 << dirs) {
            *c = self.coef[s] + rhs.coef[s];
        }
        Jet { coef, dirs }
    }
}

impl<T: Real> Sub for Jet<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let dirs = self.dirs.max(rhs.dirs);
        let mut coef = [T::ZERO; COEFFS];
        for (s, c) in coef.iter_mut().enumerate().take(1 << dirs) {
            *c = self.coef[s] - rhs.coef[s];
        }
        Jet { coef, dirs }
    }
}

impl<T: Real> Mul for Jet<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let dirs = self.dirs.max(rhs.dirs);
        let mut coef = [T::ZERO; COEFFS];
        for (s, c) in coef.iter_mut().enumerate().take(1 << dirs) {
            // sum over submasks a of s
            let mut acc = self.coef[0] * rhs.coef[s];
            let mut a = s;
            while a != 0 {
                acc = acc + self.coef[a] * rhs.coef[s ^ a];
                a = (a - 1) & s;
            }
            *c = acc;
        }
        Jet { coef, dirs }
    }
}

impl<T: Real> Div for Jet<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        if rhs.dirs == 0 {
            let inv = T::ONE / rhs.coef[0];
            let mut out = self;
            for c in out.coef.iter_mut().take(self.width()) {
                *c = *c * inv;
            }
            return out;
        }
        self * rhs.recip()
    }
}

impl<T: Real> Neg for Jet<T> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut out = self;
        for c in out.coef.iter_mut().take(self.width()) {
            *c = -*c;
        }
        out
    }
}

impl<T: Real> Scalar for Jet<T> {
    type Real = T;

    fn from_real(r: T) -> Self {
        Jet::constant(r)
    }

    fn value(&self) -> T {
        self.coef[0]
    }

    fn sin(self) -> Self {
        let (s, c) = (self.coef[0].sin(), self.coef[0].cos());
        let table = self.derivative_table(|j| [s, c, -s, -c][j % 4]);
        self.compose(&table)
    }

    fn cos(self) -> Self {
        let (s, c) = (self.coef[0].sin(), self.coef[0].cos());
        let table = self.derivative_table(|j| [c, -s, -c, s][j % 4]);
        self.compose(&table)
    }

    fn exp(self) -> Self {
        let e = self.coef[0].exp();
        let table = self.derivative_table(|_| e);
        self.compose(&table)
    }

    fn sqrt(self) -> Self {
        let a = self.coef[0];
        let table = self.derivative_table(|j| {
            // d^j/da^j a^(1/2) = (1/2)(1/2 - 1)...(1/2 - j + 1) a^(1/2 - j)
            let mut c = 1.0;
            for i in 0..j {
                c *= 0.5 - i as f64;
            }
            T::from_f64(c) * a.sqrt() / a.powi(j as i32)
        });
        self.compose(&table)
    }

    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Jet::constant(T::ONE);
        }
        let a = self.coef[0];
        let table = self.derivative_table(|j| {
            if n >= 0 && j as i32 > n {
                return T::ZERO;
            }
            let mut c = 1.0;
            for i in 0..j {
                c *= (n - i as i32) as f64;
            }
            T::from_f64(c) * a.powi(n - j as i32)
        });
        self.compose(&table)
    }

    fn is_finite(&self) -> bool {
        self.coef[..self.width()].iter().all(|c| c.is_finite())
    }

    fn eval_map(map: &dyn SmoothMap<T>, x: &[Self]) -> Vec<Self> {
        map.eval_jet(x)
    }
}
