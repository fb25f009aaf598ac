//! The nonholonomic field `X_K` from `i_{X_K}ω_K = dH_K`, its projection
//! cross-check `P(X_H)`, and integration of trajectories on `M`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    embed, f_basis, k_frame, m_residual, symplectic_orthogonal, ConstrainedChartPoint, KFrame,
};
use crate::linalg::{condition_number, solve};
use crate::mechanics::{MechanicalSystem, PhasePoint};
use crate::reduction::{momentum_map, CotangentLiftedAction};
use crate::scalar::{max_abs, Real};

/// `X_K` at a point of `M`.
#[derive(Clone, Debug)]
pub struct NonholonomicField<T: Real> {
    /// Chart tangent `(δq, δu)`.
    pub chart: Vec<T>,
    /// Ambient phase tangent `(q̇, ṗ)`.
    pub ambient: Vec<T>,
    /// Coefficients in the `K` basis.
    pub coefficients: Vec<T>,
    pub frame: KFrame<T>,
}

impl<T: Real> NonholonomicField<T> {
    pub fn qdot(&self) -> &[T] {
        &self.ambient[..self.ambient.len() / 2]
    }

    pub fn pdot(&self) -> &[T] {
        &self.ambient[self.ambient.len() / 2..]
    }
}

/// Solves the distributional Hamiltonian equation at `point`.
pub fn nonholonomic_field<T: Real>(
    sys: &MechanicalSystem<T>,
    point: &ConstrainedChartPoint<T>,
) -> Result<NonholonomicField<T>> {
    let frame = k_frame(sys, point)?;
    let c = frame.solve_interior(&frame.dh_k)?;
    let chart = frame.k_basis.matvec(&c);
    let ambient = frame.ambient_push.matvec(&chart);
    Ok(NonholonomicField {
        chart,
        ambient,
        coefficients: c,
        frame,
    })
}

/// Result of the Whitney-sum decomposition `X_H = P(X_H) + (F⊥ part)`.
#[derive(Clone, Debug)]
pub struct ProjectedField<T> {
    pub ambient: Vec<T>,
    pub chart: Vec<T>,
    /// The discarded `F⊥` component.
    pub normal: Vec<T>,
}

/// Projects `X_H` at `embed(point)` onto `TM` along `F⊥`.
pub fn projection_field<T: Real>(
    sys: &MechanicalSystem<T>,
    point: &ConstrainedChartPoint<T>,
) -> Result<ProjectedField<T>> {
    let phase = embed(sys, point)?;
    let (qd, pd) = sys.hamiltonian_vector_field(&phase)?;
    let mut xh = qd;
    xh.extend(pd);
    let b = sys.d_basis(&point.q)?;
    let push = crate::geometry::ambient_push(sys, point)?;
    let f_orth = symplectic_orthogonal(&f_basis(sys, &b))?;
    let system = push.hstack(&f_orth);
    let cond = condition_number(&system);
    if !(cond <= T::from_f64(1e12)) {
        return Err(Error::Compatibility {
            condition: cond.as_f64(),
        });
    }
    let z = solve(&system, &xh).map_err(|_| Error::Compatibility {
        condition: cond.as_f64(),
    })?;
    let dim = push.cols();
    let chart = z[..dim].to_vec();
    let ambient = push.matvec(&chart);
    let normal = f_orth.matvec(&z[dim..]);
    Ok(ProjectedField {
        ambient,
        chart,
        normal,
    })
}

/// Time stepping scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Midpoint,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rk4" => Ok(Method::Rk4),
            "midpoint" | "implicit-midpoint" => Ok(Method::Midpoint),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}` (rk4 | midpoint)"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Rk4 => "rk4",
            Method::Midpoint => "midpoint",
        })
    }
}

/// Sampled solution of the chart ODE.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<ConstrainedChartPoint<T>>,
    pub phase: Vec<PhasePoint<T>>,
    pub energy: Vec<T>,
    /// `max |A G⁻¹ p|` per sample.
    pub constraint_residual: Vec<T>,
    pub constraint_residual_max: T,
    /// `J(t)` per sample when an action was supplied.
    pub momentum_series: Option<Vec<Vec<T>>>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&ConstrainedChartPoint<T>> {
        self.states.last()
    }
}

/// Integration that stopped early; carries the samples computed so far.
#[derive(Debug)]
pub struct IntegrationFailure<T> {
    pub partial: Trajectory<T>,
    pub error: Error,
}

impl<T: fmt::Debug> fmt::Display for IntegrationFailure<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "integration stopped after {} samples: {}", self.partial.times.len(), self.error)
    }
}

impl<T: fmt::Debug> std::error::Error for IntegrationFailure<T> {}

impl<T> From<IntegrationFailure<T>> for Error {
    fn from(f: IntegrationFailure<T>) -> Error {
        f.error
    }
}

const MAX_STEPS: f64 = 1e8;

/// Integrates `X_K` in the `(q, u)` chart.
pub fn integrate<T: Real>(
    sys: &MechanicalSystem<T>,
    start: &ConstrainedChartPoint<T>,
    t_final: T,
    dt: T,
    method: Method,
) -> std::result::Result<Trajectory<T>, IntegrationFailure<T>> {
    integrate_with_momentum(sys, start, t_final, dt, method, None)
}

/// [`integrate`], additionally recording the momentum map of `action`.
pub fn integrate_with_momentum<T: Real>(
    sys: &MechanicalSystem<T>,
    start: &ConstrainedChartPoint<T>,
    t_final: T,
    dt: T,
    method: Method,
    action: Option<&CotangentLiftedAction<T>>,
) -> std::result::Result<Trajectory<T>, IntegrationFailure<T>> {
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        phase: Vec::new(),
        energy: Vec::new(),
        constraint_residual: Vec::new(),
        constraint_residual_max: T::ZERO,
        momentum_series: action.map(|_| Vec::new()),
    };
    let fail = |traj: Trajectory<T>, error: Error| Err(IntegrationFailure { partial: traj, error });

    if !(dt > T::ZERO) || !(t_final >= T::ZERO) || !dt.is_finite() || !t_final.is_finite() {
        return fail(
            traj,
            Error::InvalidArgument("need dt > 0 and t_final ≥ 0, both finite".into()),
        );
    }
    let ratio = (t_final / dt).as_f64();
    if ratio > MAX_STEPS {
        return fail(
            traj,
            Error::InvalidArgument(format!("{ratio:.3e} steps exceeds the limit of {MAX_STEPS:.0e}")),
        );
    }
    let steps = (ratio - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { T::ZERO } else { t_final / T::from_f64(steps as f64) };
    let n = sys.n();

    if let Err(e) = record(sys, &mut traj, T::ZERO, start, action) {
        return fail(traj, e);
    }
    let mut x = start.to_vec();
    let rhs = |x: &[T]| -> Result<Vec<T>> {
        Ok(nonholonomic_field(sys, &ConstrainedChartPoint::from_slice(n, x))?.chart)
    };
    for step in 1..=steps {
        let next = match method {
            Method::Rk4 => rk4_step(&rhs, &x, h),
            Method::Midpoint => midpoint_step(&rhs, &x, h),
        };
        x = match next {
            Ok(v) => v,
            Err(e) => return fail(traj, e),
        };
        let t = if step == steps { t_final } else { h * T::from_f64(step as f64) };
        if let Err(e) = record(sys, &mut traj, t, &ConstrainedChartPoint::from_slice(n, &x), action) {
            return fail(traj, e);
        }
    }
    Ok(traj)
}

fn record<T: Real>(
    sys: &MechanicalSystem<T>,
    traj: &mut Trajectory<T>,
    t: T,
    state: &ConstrainedChartPoint<T>,
    action: Option<&CotangentLiftedAction<T>>,
) -> Result<()> {
    if !state.q.iter().chain(&state.u).all(|v| v.is_finite()) {
        return Err(Error::NonFinite(format!("state at t = {t}")));
    }
    let phase = embed(sys, state)?;
    let energy = sys.hamiltonian(&phase)?;
    let residual = max_abs(&m_residual(sys, &phase)?);
    if let (Some(series), Some(action)) = (traj.momentum_series.as_mut(), action) {
        series.push(momentum_map(action, &phase)?);
    }
    traj.times.push(t);
    traj.states.push(state.clone());
    traj.phase.push(phase);
    traj.energy.push(energy);
    traj.constraint_residual.push(residual);
    traj.constraint_residual_max = traj.constraint_residual_max.max(residual);
    Ok(())
}

fn axpy<T: Real>(x: &[T], a: T, y: &[T]) -> Vec<T> {
    x.iter().zip(y).map(|(&xi, &yi)| xi + a * yi).collect()
}

fn rk4_step<T: Real>(f: &impl Fn(&[T]) -> Result<Vec<T>>, x: &[T], h: T) -> Result<Vec<T>> {
    let half = h * T::from_f64(0.5);
    let k1 = f(x)?;
    let k2 = f(&axpy(x, half, &k1))?;
    let k3 = f(&axpy(x, half, &k2))?;
    let k4 = f(&axpy(x, h, &k3))?;
    let sixth = h / T::from_f64(6.0);
    Ok(x
        .iter()
        .enumerate()
        .map(|(i, &xi)| xi + sixth * (k1[i] + T::from_f64(2.0) * (k2[i] + k3[i]) + k4[i]))
        .collect())
}

/// Implicit midpoint `x₁ = x₀ + h f((x₀ + x₁)/2)` by fixed-point iteration.
fn midpoint_step<T: Real>(f: &impl Fn(&[T]) -> Result<Vec<T>>, x: &[T], h: T) -> Result<Vec<T>> {
    let half = T::from_f64(0.5);
    let mut next = axpy(x, h, &f(x)?);
    let tol = T::from_f64(1e-15);
    for _ in 0..100 {
        let mid: Vec<T> = x.iter().zip(&next).map(|(&a, &b)| half * (a + b)).collect();
        let candidate = axpy(x, h, &f(&mid)?);
        let change = candidate
            .iter()
            .zip(&next)
            .fold(T::ZERO, |m, (&a, &b)| m.max((a - b).abs()));
        let scale = max_abs(&candidate).max(T::ONE);
        next = candidate;
        if change <= tol * scale {
            return Ok(next);
        }
    }
    Err(Error::NonFinite("implicit midpoint iteration did not converge".into()))
}

/// Summary statistics of a trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics<T> {
    pub energy_drift: T,
    pub constraint_max: T,
    pub momentum_drift: Option<Vec<T>>,
}

pub fn diagnostics<T: Real>(traj: &Trajectory<T>) -> Diagnostics<T> {
    let e0 = traj.energy.first().copied().unwrap_or(T::ZERO);
    let energy_drift = traj
        .energy
        .iter()
        .fold(T::ZERO, |m, &e| m.max((e - e0).abs()));
    let momentum_drift = traj.momentum_series.as_ref().map(|series| drift(series));
    Diagnostics {
        energy_drift,
        constraint_max: traj.constraint_residual_max,
        momentum_drift,
    }
}

pub(crate) fn drift<T: Real>(series: &[Vec<T>]) -> Vec<T> {
    let Some(first) = series.first() else {
        return Vec::new();
    };
    let mut out = vec![T::ZERO; first.len()];
    for row in series {
        for (o, (&a, &b)) in out.iter_mut().zip(row.iter().zip(first)) {
            *o = o.max((a - b).abs());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{self, DiskParams};

    #[test]
    fn particle_field_at_golden_point() {
        let sys = examples::particle();
        let pt = ConstrainedChartPoint::new(vec![0.0, 1.0, 0.0], vec![2.0, 3.0]);
        let f = nonholonomic_field(&sys, &pt).unwrap();
        let expect_q = [2.0, 3.0, 2.0];
        // ṗ_x = −σσ′p_x p_y/(1+σ²) = −3, ṗ_z = σ′ẏp_x + σṗ_x = 6 − 3
        let expect_p = [-3.0, 0.0, 3.0];
        for (a, b) in f.qdot().iter().zip(expect_q).chain(f.pdot().iter().zip(expect_p)) {
            assert!((a - b).abs() < 1e-13, "{:?}", f.ambient);
        }
    }

    #[test]
    fn disk_field_at_golden_point() {
        let sys = examples::disk(DiskParams::default());
        // p_θ = 2, p_φ = 3 at φ = 0 means u = (1, 3)
        let pt = ConstrainedChartPoint::new(vec![0.0; 4], vec![1.0, 3.0]);
        let f = nonholonomic_field(&sys, &pt).unwrap();
        let expect = [1.0, 0.0, 1.0, 3.0];
        for (a, b) in f.qdot().iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(f.pdot()[2].abs() < 1e-14 && f.pdot()[3].abs() < 1e-14);
    }

    #[test]
    fn rest_state_has_zero_field() {
        let sys = examples::disk(DiskParams::default());
        let f = nonholonomic_field(&sys, &ConstrainedChartPoint::new(vec![0.2; 4], vec![0.0; 2])).unwrap();
        assert!(max_abs(&f.ambient) == 0.0);
    }

    #[test]
    fn projection_agrees_with_distributional_solve() {
        let sys = examples::particle();
        let pt = ConstrainedChartPoint::new(vec![0.3, -1.4, 0.9], vec![-0.8, 1.1]);
        let a = nonholonomic_field(&sys, &pt).unwrap();
        let b = projection_field(&sys, &pt).unwrap();
        for (x, y) in a.ambient.iter().zip(&b.ambient) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn unconstrained_projection_is_identity() {
        let sys = examples::harmonic(2);
        let pt = ConstrainedChartPoint::new(vec![0.5, 1.0], vec![-1.0, 2.0]);
        let b = projection_field(&sys, &pt).unwrap();
        assert_eq!(b.ambient, vec![-1.0, 2.0, -0.5, -1.0]);
    }

    #[test]
    fn particle_closed_form_flow() {
        // p_x(t) = 2/√(1+9t²), y = 3t, x = (2/3) asinh(3t), z = (2/3)(√(1+9t²) − 1)
        let sys = examples::particle();
        let start = ConstrainedChartPoint::new(vec![0.0; 3], vec![2.0, 3.0]);
        let traj = integrate(&sys, &start, 1.0, 1e-3, Method::Rk4).unwrap();
        let end = traj.last().unwrap();
        let s10 = 10f64.sqrt();
        let expected = [2.0 / 3.0 * 3f64.asinh(), 3.0, 2.0 / 3.0 * (s10 - 1.0)];
        for (a, b) in end.q.iter().zip(expected) {
            assert!((a - b).abs() < 1e-10, "{:?}", end.q);
        }
        assert!((end.u[0] - 2.0 / s10).abs() < 1e-10);
        assert!((end.u[1] - 3.0).abs() < 1e-12);
        assert_eq!(traj.len(), 1001);
        assert_eq!(*traj.times.last().unwrap(), 1.0);
    }

    #[test]
    fn disk_straight_roll() {
        let sys = examples::disk(DiskParams::default());
        let start = ConstrainedChartPoint::new(vec![0.0; 4], vec![1.0, 0.0]);
        for method in [Method::Rk4, Method::Midpoint] {
            let traj = integrate(&sys, &start, 1.0, 1e-2, method).unwrap();
            let end = traj.last().unwrap();
            assert!((end.q[0] - 1.0).abs() < 1e-12 && end.q[1].abs() < 1e-12);
            assert!((end.q[2] - 1.0).abs() < 1e-12 && end.q[3].abs() < 1e-12);
        }
    }

    #[test]
    fn zero_horizon_and_bad_steps() {
        let sys = examples::particle();
        let start = ConstrainedChartPoint::new(vec![0.0; 3], vec![2.0, 3.0]);
        let traj = integrate(&sys, &start, 0.0, 1e-3, Method::Rk4).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.states[0], start);
        let d = diagnostics(&traj);
        assert_eq!(d.energy_drift, 0.0);
        assert_eq!(d.constraint_max, 0.0);
        assert!(integrate(&sys, &start, 1.0, 0.0, Method::Rk4).is_err());
        let guard = integrate(&sys, &start, 1e3, 1e-6, Method::Rk4).unwrap_err();
        assert!(matches!(guard.error, Error::InvalidArgument(_)));
    }

    #[test]
    fn failure_returns_partial_trajectory() {
        // eliminating x breaks at y = 0, reached at t = 0.5 from y = −1.5 with p_y = 3
        let sys = crate::mechanics::SystemBuilder::new(["x", "y", "z"])
            .metric(crate::mechanics::EuclideanMetric(3))
            .constraints(1, examples::ParticleConstraint)
            .reference(vec![0.0, -1.0, 0.0])
            .pivots(vec![0])
            .build()
            .unwrap();
        let start = ConstrainedChartPoint::new(vec![0.0, -1.5, 0.0], vec![3.0, 0.0]);
        let err = integrate(&sys, &start, 1.0, 0.125, Method::Rk4).unwrap_err();
        assert!(err.partial.len() >= 2 && err.partial.len() < 9);
        assert!(matches!(err.error, Error::InvalidPivot(_)));
    }
}
