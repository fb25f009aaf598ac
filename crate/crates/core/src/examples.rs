//! Hand-coded reference systems: the vertical-rolling particle with `σ(y) = y`,
//! the rolling disk, and a few auxiliary maps.
//!
//! These are written directly against [`GenericMap`] and serve as an oracle
//! for the config-driven systems in [`crate::io`].

use crate::calculus::GenericMap;
use crate::mechanics::{EuclideanMetric, MechanicalSystem, SystemBuilder};
use crate::scalar::{Real, Scalar};

/// Diagonal constant metric.
#[derive(Clone, Debug)]
pub struct DiagonalMetric<T>(pub Vec<T>);

impl<T: Real> GenericMap<T> for DiagonalMetric<T> {
    fn input_dim(&self) -> usize {
        self.0.len()
    }
    fn output_dim(&self) -> usize {
        self.0.len() * self.0.len()
    }
    fn call<S: Scalar<Real = T>>(&self, _x: &[S]) -> Vec<S> {
        let n = self.0.len();
        let mut out = vec![S::zero(); n * n];
        for (i, &d) in self.0.iter().enumerate() {
            out[i * n + i] = S::from_real(d);
        }
        out
    }
}

/// Constant `rows × cols` matrix (row-major) as a map of `cols` inputs.
#[derive(Clone, Debug)]
pub struct ConstantMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> ConstantMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        ConstantMatrix { rows, cols, data }
    }
}

impl<T: Real> GenericMap<T> for ConstantMatrix<T> {
    fn input_dim(&self) -> usize {
        self.cols
    }
    fn output_dim(&self) -> usize {
        self.rows * self.cols
    }
    fn call<S: Scalar<Real = T>>(&self, _x: &[S]) -> Vec<S> {
        self.data.iter().map(|&v| S::from_real(v)).collect()
    }
}

/// `V(q) = ½|q|²`.
#[derive(Clone, Copy, Debug)]
pub struct HalfSquare(pub usize);

impl<T: Real> GenericMap<T> for HalfSquare {
    fn input_dim(&self) -> usize {
        self.0
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn call<S: Scalar<Real = T>>(&self, x: &[S]) -> Vec<S> {
        vec![S::c(0.5) * crate::scalar::dot(x, x)]
    }
}

/// Particle constraint `ż = σ(y) ẋ` with `σ(y) = y`: `A = [−y, 0, 1]`.
#[derive(Clone, Copy, Debug)]
pub struct ParticleConstraint;

impl<T: Real> GenericMap<T> for ParticleConstraint {
    fn input_dim(&self) -> usize {
        3
    }
    fn output_dim(&self) -> usize {
        3
    }
    fn call<S: Scalar<Real = T>>(&self, q: &[S]) -> Vec<S> {
        vec![-q[1], S::zero(), S::one()]
    }
}

/// Particle on `ℝ³` with unit mass and `ż = y ẋ`.
pub fn particle<T: Real>() -> MechanicalSystem<T> {
    SystemBuilder::new(["x", "y", "z"])
        .name("particle")
        .metric(EuclideanMetric(3))
        .constraints(1, ParticleConstraint)
        .build()
        .expect("particle system is valid")
}

/// Parameters of the rolling disk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiskParams {
    pub mass: f64,
    /// Moment of inertia about the rolling axis.
    pub inertia: f64,
    /// Moment of inertia about the vertical axis.
    pub spin_inertia: f64,
    pub radius: f64,
}

impl Default for DiskParams {
    fn default() -> Self {
        DiskParams {
            mass: 1.0,
            inertia: 2.0,
            spin_inertia: 1.0,
            radius: 1.0,
        }
    }
}

/// Rolling constraints `ẋ = R cosφ θ̇`, `ẏ = R sinφ θ̇`.
#[derive(Clone, Copy, Debug)]
pub struct DiskConstraint {
    pub radius: f64,
}

impl<T: Real> GenericMap<T> for DiskConstraint {
    fn input_dim(&self) -> usize {
        4
    }
    fn output_dim(&self) -> usize {
        8
    }
    fn call<S: Scalar<Real = T>>(&self, q: &[S]) -> Vec<S> {
        let r = S::c(self.radius);
        let (c, s) = (q[3].cos(), q[3].sin());
        let (o, z) = (S::one(), S::zero());
        vec![o, z, -r * c, z, z, o, -r * s, z]
    }
}

/// Vertical disk rolling without slipping, coordinates `(x, y, θ, φ)`.
pub fn disk<T: Real>(params: DiskParams) -> MechanicalSystem<T> {
    SystemBuilder::new(["x", "y", "theta", "phi"])
        .name("disk")
        .metric(DiagonalMetric(
            [params.mass, params.mass, params.inertia, params.spin_inertia]
                .iter()
                .map(|&v| T::from_f64(v))
                .collect(),
        ))
        .constraints(2, DiskConstraint { radius: params.radius })
        .pivots(vec![0, 1])
        .periodic(vec![false, false, true, true])
        .build()
        .expect("disk system is valid")
}

/// Unconstrained unit-mass particle in a harmonic well on `ℝⁿ`.
pub fn harmonic<T: Real>(n: usize) -> MechanicalSystem<T> {
    SystemBuilder::new((0..n).map(|i| format!("q{}", i + 1)))
        .name("harmonic")
        .metric(EuclideanMetric(n))
        .potential(HalfSquare(n))
        .build()
        .expect("harmonic system is valid")
}

/// Free unit-mass particle on `ℝⁿ` (no constraints, no potential).
pub fn free_particle<T: Real>(n: usize) -> MechanicalSystem<T> {
    SystemBuilder::new((0..n).map(|i| format!("q{}", i + 1)))
        .name("free")
        .metric(EuclideanMetric(n))
        .build()
        .expect("free system is valid")
}

/// `γ = c₁dx + c₂dy + σ(y)c₁dz`: M-valued but not closed on `D` unless `c₁ = 0`.
#[derive(Clone, Copy, Debug)]
pub struct ParticleLinearSection {
    pub c1: f64,
    pub c2: f64,
}

impl<T: Real> GenericMap<T> for ParticleLinearSection {
    fn input_dim(&self) -> usize {
        3
    }
    fn output_dim(&self) -> usize {
        3
    }
    fn call<S: Scalar<Real = T>>(&self, q: &[S]) -> Vec<S> {
        let c1 = S::c(self.c1);
        vec![c1, S::c(self.c2), c1 * q[1]]
    }
}

/// `γ = c/√(1+y²) dx + b dy + c·y/√(1+y²) dz`: M-valued, closed on `D`, `H∘γ` constant.
#[derive(Clone, Copy, Debug)]
pub struct ParticleClosedSection {
    pub b: f64,
    pub c: f64,
}

impl<T: Real> GenericMap<T> for ParticleClosedSection {
    fn input_dim(&self) -> usize {
        3
    }
    fn output_dim(&self) -> usize {
        3
    }
    fn call<S: Scalar<Real = T>>(&self, q: &[S]) -> Vec<S> {
        let y = q[1];
        let w = S::c(self.c) / (S::one() + y * y).sqrt();
        vec![w, S::c(self.b), w * y]
    }
}

/// Disk section with constant `(γ₇, γ₈) = (p_θ, p_φ)` and `γ₅, γ₆` fixed by membership in `M`.
#[derive(Clone, Copy, Debug)]
pub struct DiskSection {
    pub p_theta: f64,
    pub p_phi: f64,
    pub params: DiskParams,
}

impl<T: Real> GenericMap<T> for DiskSection {
    fn input_dim(&self) -> usize {
        4
    }
    fn output_dim(&self) -> usize {
        4
    }
    fn call<S: Scalar<Real = T>>(&self, q: &[S]) -> Vec<S> {
        let p = &self.params;
        let k = S::c(p.mass * p.radius / p.inertia * self.p_theta);
        vec![k * q[3].cos(), k * q[3].sin(), S::c(self.p_theta), S::c(self.p_phi)]
    }
}
