//! Symmetry reduction through explicit quotient charts, reduced HJ residuals,
//! and momentum maps of cotangent-lifted actions.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::calculus::{apply, check_dim, directional_with, jacobian, SmoothMap};
use crate::dynamics::{drift, nonholonomic_field, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{chart_point_from_phase, embed, ConstrainedChartPoint};
use crate::hamilton_jacobi::{
    closedness_on_d, gamma_into_m, symplecticity_residual, type2_residual, OneFormSection, PhaseMap, MEMBERSHIP_TOL,
    SYMPLECTIC_TOL,
};
use crate::linalg::{cholesky_solve, relative_rank};
use crate::mechanics::{MapRef, MechanicalSystem, PhasePoint};
use crate::scalar::{distance, dot, max_abs, Real, Scalar};

/// Tolerance for comparing pushed-down components with printed reduced equations.
pub const CONFLICT_TOL: f64 = 1e-9;

/// Coordinates on `M/G` given by a projection from the `(q, u)` chart and a lift back.
#[derive(Clone)]
pub struct QuotientChart<T: Real> {
    pub name: String,
    pub reduced_names: Vec<String>,
    pub fiber_names: Vec<String>,
    /// `(q, u) ↦ x̄`.
    pub project: MapRef<T>,
    /// `(x̄, f) ↦ (q, u)`; for fixed `f` a section of `project`.
    pub lift: MapRef<T>,
    /// Reduced equations as printed, if any, for conflict reporting.
    pub expected: Option<MapRef<T>>,
}

impl<T: Real> QuotientChart<T> {
    pub fn reduced_dim(&self) -> usize {
        self.reduced_names.len()
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_names.len()
    }

    fn validate(&self, sys: &MechanicalSystem<T>) -> Result<()> {
        let chart_dim = sys.n() + sys.m();
        let r = self.reduced_dim();
        let f = self.fiber_dim();
        let bad = |what: &str| Err(Error::Config(format!("chart {}: {what}", self.name)));
        if self.project.input_dim() != chart_dim || self.project.output_dim() != r {
            return bad("project must map (q, u) to the reduced coordinates");
        }
        if self.lift.input_dim() != r + f || self.lift.output_dim() != chart_dim {
            return bad("lift must map (reduced, fiber) to (q, u)");
        }
        if r + f != chart_dim {
            return bad("reduced and fiber dimensions must add up to dim M");
        }
        if let Some(e) = &self.expected {
            if e.input_dim() != r || e.output_dim() != r {
                return bad("expected field must map reduced coordinates to reduced tangents");
            }
        }
        Ok(())
    }
}

/// Sampling parameters of the invariance audit.
#[derive(Clone, Copy, Debug)]
pub struct ReduceOptions {
    pub base_samples: usize,
    pub fiber_samples: usize,
    pub seed: u64,
    pub tol: f64,
    /// Half-width of the sampling box for reduced and fiber coordinates.
    pub radius: f64,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions {
            base_samples: 16,
            fiber_samples: 4,
            seed: 0x0eb17,
            tol: 1e-10,
            radius: 1.5,
        }
    }
}

/// Outcome of the fiber sampling audit.
#[derive(Clone, Debug, Serialize)]
pub struct AuditSummary {
    pub samples: usize,
    /// Largest spread of `Dproject·X_K` over one fiber, relative to its size.
    pub field_spread: f64,
    pub hamiltonian_spread: f64,
    /// `max |project(lift(x̄, f)) − x̄|`.
    pub section_error: f64,
}

/// A quotient chart whose reduced field passed the invariance audit.
#[derive(Clone)]
pub struct ReducedChart<T: Real> {
    pub system: MechanicalSystem<T>,
    pub chart: QuotientChart<T>,
    pub audit: AuditSummary,
}

/// Printed reduced component that disagrees with the pushed-down field.
#[derive(Clone, Debug, Serialize)]
pub struct Conflict<T> {
    pub component: String,
    pub pushed_down: T,
    pub printed: T,
}

fn sample_box<T: Real>(rng: &mut impl Rng, dim: usize, radius: f64) -> Vec<T> {
    (0..dim).map(|_| T::from_f64(rng.gen_range(-radius..radius))).collect()
}

/// Audits `chart` against `sys` with default sampling and returns the populated chart.
pub fn reduce<T: Real>(sys: &MechanicalSystem<T>, chart: QuotientChart<T>) -> Result<ReducedChart<T>> {
    reduce_with(sys, chart, ReduceOptions::default())
}

pub fn reduce_with<T: Real>(
    sys: &MechanicalSystem<T>,
    chart: QuotientChart<T>,
    opts: ReduceOptions,
) -> Result<ReducedChart<T>> {
    chart.validate(sys)?;
    let mut red = ReducedChart {
        system: sys.clone(),
        chart,
        audit: AuditSummary {
            samples: 0,
            field_spread: 0.0,
            hamiltonian_spread: 0.0,
            section_error: 0.0,
        },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (r, f) = (red.chart.reduced_dim(), red.chart.fiber_dim());
    for _ in 0..opts.base_samples {
        let xbar: Vec<T> = sample_box(&mut rng, r, opts.radius);
        let mut reference: Option<(Vec<T>, T)> = None;
        for j in 0..opts.fiber_samples.max(1) {
            let fiber = if j == 0 { vec![T::ZERO; f] } else { sample_box(&mut rng, f, opts.radius) };
            let point = red.lift_point(&xbar, &fiber)?;
            let back = red.project_point(&point)?;
            red.audit.section_error = red.audit.section_error.max(distance(&back, &xbar).as_f64());
            let jac = jacobian(&*red.chart.project, &point.to_vec())?;
            if relative_rank(&jac, T::from_f64(1e-10)) < r {
                return Err(Error::Audit(format!(
                    "chart {}: project is not a submersion at {:?}",
                    red.chart.name,
                    point.to_vec()
                )));
            }
            let v = red.pushed_field(&point)?;
            let h = red.system.hamiltonian(&embed(&red.system, &point)?)?;
            red.audit.samples += 1;
            match &reference {
                None => reference = Some((v, h)),
                Some((v0, h0)) => {
                    let scale = max_abs(v0).max(T::ONE);
                    red.audit.field_spread = red.audit.field_spread.max((distance(&v, v0) / scale).as_f64());
                    let hs = h0.abs().max(T::ONE);
                    red.audit.hamiltonian_spread = red.audit.hamiltonian_spread.max(((h - *h0).abs() / hs).as_f64());
                }
            }
        }
    }
    let a = &red.audit;
    if !(a.section_error <= opts.tol && a.field_spread <= opts.tol && a.hamiltonian_spread <= opts.tol) {
        return Err(Error::Audit(format!(
            "chart {} does not reduce {}: section error {:e}, field spread {:e}, H spread {:e}",
            red.chart.name,
            sys.name(),
            a.section_error,
            a.field_spread,
            a.hamiltonian_spread
        )));
    }
    Ok(red)
}

impl<T: Real> ReducedChart<T> {
    pub fn reduced_dim(&self) -> usize {
        self.chart.reduced_dim()
    }

    pub fn lift_point(&self, xbar: &[T], fiber: &[T]) -> Result<ConstrainedChartPoint<T>> {
        check_dim("reduced coordinates", self.chart.reduced_dim(), xbar.len())?;
        check_dim("fiber coordinates", self.chart.fiber_dim(), fiber.len())?;
        let mut x = xbar.to_vec();
        x.extend_from_slice(fiber);
        let out = apply(&*self.chart.lift, &x)?;
        Ok(ConstrainedChartPoint::from_slice(self.system.n(), &out))
    }

    pub fn project_point(&self, point: &ConstrainedChartPoint<T>) -> Result<Vec<T>> {
        apply(&*self.chart.project, &point.to_vec())
    }

    /// `Dproject·X_K` at a chart point.
    pub fn pushed_field(&self, point: &ConstrainedChartPoint<T>) -> Result<Vec<T>> {
        let field = nonholonomic_field(&self.system, point)?;
        let (_, d) = directional_with(&point.to_vec(), &field.chart, |x| Ok(self.chart.project.eval_dual(x)))?;
        Ok(d)
    }

    /// `X_K̄(x̄)`, evaluated at the lift with zero fiber coordinates.
    pub fn reduced_field(&self, xbar: &[T]) -> Result<Vec<T>> {
        let zero = vec![T::ZERO; self.chart.fiber_dim()];
        self.pushed_field(&self.lift_point(xbar, &zero)?)
    }

    /// `h(x̄) = H∘embed∘lift(x̄, 0)`.
    pub fn reduced_hamiltonian(&self, xbar: &[T]) -> Result<T> {
        let zero = vec![T::ZERO; self.chart.fiber_dim()];
        let point = self.lift_point(xbar, &zero)?;
        self.system.hamiltonian(&embed(&self.system, &point)?)
    }

    pub fn expected_field(&self, xbar: &[T]) -> Option<Result<Vec<T>>> {
        self.chart.expected.as_ref().map(|e| apply(&**e, xbar))
    }

    /// Components where the printed reduced equations disagree with the pushed-down field.
    pub fn conflicts(&self, xbar: &[T]) -> Result<Vec<Conflict<T>>> {
        let Some(expected) = self.expected_field(xbar) else {
            return Ok(Vec::new());
        };
        let expected = expected?;
        let pushed = self.reduced_field(xbar)?;
        Ok(pushed
            .iter()
            .zip(&expected)
            .enumerate()
            .filter(|(_, (a, b))| !((**a - **b).abs() <= T::from_f64(CONFLICT_TOL)))
            .map(|(i, (&a, &b))| Conflict {
                component: format!("d{}/dt", self.chart.reduced_names[i]),
                pushed_down: a,
                printed: b,
            })
            .collect())
    }

    /// RK4 samples of the reduced flow.
    pub fn flow(&self, start: &[T], t_final: T, dt: T) -> Result<Vec<(T, Vec<T>)>> {
        check_dim("reduced start", self.reduced_dim(), start.len())?;
        if !(dt > T::ZERO) || !(t_final >= T::ZERO) {
            return Err(Error::InvalidArgument("reduced flow needs dt > 0 and t_final ≥ 0".into()));
        }
        let steps = ((t_final / dt).as_f64() - 1e-9).ceil().max(0.0) as usize;
        let h = if steps == 0 { T::ZERO } else { t_final / T::from_f64(steps as f64) };
        let mut x = start.to_vec();
        let mut out = vec![(T::ZERO, x.clone())];
        let axpy = |x: &[T], k: &[T], s: T| -> Vec<T> { x.iter().zip(k).map(|(&a, &b)| a + s * b).collect() };
        let half = T::from_f64(0.5);
        for i in 1..=steps {
            let k1 = self.reduced_field(&x)?;
            let k2 = self.reduced_field(&axpy(&x, &k1, h * half))?;
            let k3 = self.reduced_field(&axpy(&x, &k2, h * half))?;
            let k4 = self.reduced_field(&axpy(&x, &k3, h))?;
            let sixth = h / T::from_f64(6.0);
            for j in 0..x.len() {
                x[j] = x[j] + sixth * (k1[j] + T::from_f64(2.0) * (k2[j] + k3[j]) + k4[j]);
            }
            let t = if i == steps { t_final } else { h * T::from_f64(i as f64) };
            out.push((t, x.clone()));
        }
        Ok(out)
    }

    /// `γ̄ = project∘(q ↦ chart point of γ(q))` over any scalar.
    fn gamma_bar_at<S: Scalar<Real = T>>(&self, gamma: &OneFormSection<T>, q: &[S]) -> Result<Vec<S>> {
        let p = S::eval_map(&*gamma.gamma, q);
        let v = cholesky_solve(&self.system.metric_at(q), &p)?;
        let mut x = q.to_vec();
        x.extend(self.system.free().iter().map(|&i| v[i]));
        Ok(S::eval_map(&*self.chart.project, &x))
    }

    /// Reduced image of a phase point through its chart coordinates.
    fn project_phase(&self, point: &PhasePoint<T>) -> Result<Vec<T>> {
        self.project_point(&chart_point_from_phase(&self.system, point)?)
    }

    fn fiber_points(&self, xbar: &[T], seed: u64) -> Result<Vec<ConstrainedChartPoint<T>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..6)
            .map(|_| {
                let f = sample_box(&mut rng, self.chart.fiber_dim(), 1.5);
                self.lift_point(xbar, &f)
            })
            .collect()
    }

    fn audit_gamma(&self, gamma: &OneFormSection<T>, q: &[T]) -> Result<Vec<T>> {
        let xbar = self.gamma_bar_at(gamma, q)?;
        let tol = T::from_f64(MEMBERSHIP_TOL);
        for c in self.fiber_points(&xbar, 0x6a3)? {
            let moved = self.gamma_bar_at(gamma, &c.q)?;
            if !(distance(&moved, &xbar) <= tol * max_abs(&xbar).max(T::ONE)) {
                return Err(Error::Audit(format!(
                    "γ is not invariant along the fiber of chart {} at q = {:?}",
                    self.chart.name, c.q
                )));
            }
        }
        Ok(xbar)
    }

    fn audit_eps(&self, eps: &PhaseMap<T>, point: &PhasePoint<T>) -> Result<()> {
        let xbar = self.project_phase(point)?;
        let ebar = self.project_phase(&eps.apply(point)?)?;
        let tol = T::from_f64(MEMBERSHIP_TOL);
        for c in self.fiber_points(&xbar, 0xe95)? {
            let moved = self.project_phase(&eps.apply(&embed(&self.system, &c)?)?)?;
            if !(distance(&moved, &ebar) <= tol * max_abs(&ebar).max(T::ONE)) {
                return Err(Error::Audit(format!(
                    "ε is not equivariant along the fiber of chart {} through {:?}",
                    self.chart.name,
                    c.to_vec()
                )));
            }
        }
        Ok(())
    }

    fn require_section_hypotheses(&self, gamma: &OneFormSection<T>, q: &[T]) -> Result<()> {
        let tol = T::from_f64(MEMBERSHIP_TOL);
        let r = max_abs(&gamma_into_m(&self.system, gamma, q)?);
        if !(r <= tol) {
            return Err(Error::Hypothesis(format!("γ(q) is off M (residual {r:e})")));
        }
        let c = closedness_on_d(&self.system, gamma, q)?;
        if !(c <= tol) {
            return Err(Error::Hypothesis(format!("γ is not closed on D (|dγ| = {c:e})")));
        }
        Ok(())
    }

    /// `|Dγ̄·v − X_K̄(x̄)|` with `v` the base velocity at `point`.
    fn reduced_gap(&self, gamma: &OneFormSection<T>, point: &PhasePoint<T>, xbar: &[T]) -> Result<T> {
        let v = self.system.hamiltonian_vector_field(point)?.0;
        let (_, lhs) = directional_with(&point.q, &v, |q| self.gamma_bar_at(gamma, q))?;
        Ok(distance(&lhs, &self.reduced_field(xbar)?))
    }
}

/// `|Dproject·X_K(point) − X_K̄(project(point))|`.
pub fn pi_relatedness_residual<T: Real>(red: &ReducedChart<T>, point: &ConstrainedChartPoint<T>) -> Result<T> {
    let pushed = red.pushed_field(point)?;
    let reduced = red.reduced_field(&red.project_point(point)?)?;
    Ok(distance(&pushed, &reduced))
}

/// `|Tγ̄·X_H^γ − X_K̄·γ̄|` at `q`.
pub fn reduced_type1_residual<T: Real>(red: &ReducedChart<T>, gamma: &OneFormSection<T>, q: &[T]) -> Result<T> {
    red.require_section_hypotheses(gamma, q)?;
    let xbar = red.audit_gamma(gamma, q)?;
    red.reduced_gap(gamma, &gamma.point(q)?, &xbar)
}

/// Reduced Type II residual together with its unreduced counterpart.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ReducedType2<T> {
    pub reduced: T,
    pub unreduced: T,
}

/// `|Tγ̄·X_H^ε − X_K̄·ε̄|` at `point ∈ M`, plus the unreduced Type II residual.
pub fn reduced_type2_residual<T: Real>(
    red: &ReducedChart<T>,
    gamma: &OneFormSection<T>,
    eps: &PhaseMap<T>,
    point: &PhasePoint<T>,
) -> Result<ReducedType2<T>> {
    let sys = &red.system;
    let tol = T::from_f64(MEMBERSHIP_TOL);
    let r = max_abs(&crate::geometry::m_residual(sys, point)?);
    if !(r <= tol) {
        return Err(Error::Hypothesis(format!("point is off M (residual {r:e})")));
    }
    red.audit_eps(eps, point)?;
    let s = symplecticity_residual(eps, point, 16)?;
    if !(s <= T::from_f64(SYMPLECTIC_TOL)) {
        return Err(Error::Hypothesis(format!("ε is not symplectic (defect {s:e})")));
    }
    let image = eps.apply(point)?;
    red.require_section_hypotheses(gamma, &image.q)?;
    red.audit_gamma(gamma, &image.q)?;
    let r = max_abs(&crate::geometry::m_residual(sys, &image)?);
    if !(r <= tol) {
        return Err(Error::Hypothesis(format!("ε(point) is off M (residual {r:e})")));
    }
    let ebar = red.project_phase(&image)?;
    let reduced = red.reduced_gap(gamma, &image, &ebar)?;
    let unreduced = type2_residual(sys, gamma, eps, point)?;
    Ok(ReducedType2 { reduced, unreduced })
}

/// Cotangent lift of an action on `Q`, given by its infinitesimal generators.
#[derive(Clone)]
pub struct CotangentLiftedAction<T: Real> {
    pub name: String,
    pub generators: Vec<MapRef<T>>,
    pub labels: Vec<String>,
}

impl<T: Real> CotangentLiftedAction<T> {
    pub fn new(name: impl Into<String>, generators: Vec<MapRef<T>>, labels: Vec<String>) -> Self {
        CotangentLiftedAction {
            name: name.into(),
            generators,
            labels,
        }
    }

    pub fn from_maps(name: impl Into<String>, maps: Vec<(String, Arc<dyn SmoothMap<T>>)>) -> Self {
        let (labels, generators) = maps.into_iter().unzip();
        Self::new(name, generators, labels)
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    /// Number of linearly independent generators at `q`.
    pub fn rank_at(&self, q: &[T]) -> Result<usize> {
        let cols = self
            .generators
            .iter()
            .map(|g| apply(&**g, q))
            .collect::<Result<Vec<_>>>()?;
        if cols.is_empty() {
            return Ok(0);
        }
        Ok(relative_rank(&crate::linalg::Mat::from_columns(&cols), T::from_f64(1e-10)))
    }
}

/// `J_i(q, p) = ⟨p, ξ_i(q)⟩`.
pub fn momentum_map<T: Real>(action: &CotangentLiftedAction<T>, point: &PhasePoint<T>) -> Result<Vec<T>> {
    action
        .generators
        .iter()
        .map(|g| Ok(dot(&point.p, &apply(&**g, &point.q)?)))
        .collect()
}

/// Per-component `max_t |J_i(t) − J_i(0)|` along a trajectory.
pub fn momentum_drift<T: Real>(traj: &Trajectory<T>, action: &CotangentLiftedAction<T>) -> Result<Vec<T>> {
    let series = traj
        .phase
        .iter()
        .map(|pt| momentum_map(action, pt))
        .collect::<Result<Vec<_>>>()?;
    Ok(drift(&series))
}
