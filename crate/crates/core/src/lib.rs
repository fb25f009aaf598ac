//! Distributional Hamiltonian mechanics on cotangent bundles of coordinate charts.
//!
//! Systems are kinetic-plus-potential Lagrangians with linear velocity constraints.
//! The constraint submanifold `M` is parametrised by `(q, u)`; every check in
//! [`hamilton_jacobi`] and [`reduction`] is a residual evaluated on that chart.

// `!(x <= tol)` is used on purpose so that NaN counts as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod dynamics;
pub mod error;
pub mod examples;
pub mod geometry;
pub mod hamilton_jacobi;
pub mod io;
pub mod linalg;
pub mod mechanics;
pub mod reduction;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Real, Scalar};

pub type Dual64 = calculus::Dual<f64>;
pub type Jet64 = calculus::Jet<f64>;
pub type Matrix = linalg::Mat<f64>;
pub type System = mechanics::MechanicalSystem<f64>;
pub type Phase = mechanics::PhasePoint<f64>;
pub type ChartPoint = geometry::ConstrainedChartPoint<f64>;
pub type Section = hamilton_jacobi::OneFormSection<f64>;
pub type Frame = geometry::KFrame<f64>;
pub type Traj = dynamics::Trajectory<f64>;
