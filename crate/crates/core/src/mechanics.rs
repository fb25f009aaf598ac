//! Mechanical systems `L = ½vᵀG(q)v − V(q)` with Pfaffian constraints `A(q)v = 0`,
//! their Legendre transform, Hamiltonian side and constraint distribution `D`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::calculus::{apply, check_dim, jacobian_with, GenericMap, SmoothMap};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, det, singular_values, Lu, Mat};
use crate::scalar::{dot, lift, Real, Scalar};

/// Shared handle to a smooth map.
pub type MapRef<T> = Arc<dyn SmoothMap<T>>;

/// Phase-space point `(q, p)` in canonical coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhasePoint<T> {
    pub q: Vec<T>,
    pub p: Vec<T>,
}

impl<T: Real> PhasePoint<T> {
    pub fn new(q: Vec<T>, p: Vec<T>) -> Self {
        PhasePoint { q, p }
    }

    /// Splits a concatenated `(q, p)` vector.
    pub fn from_slice(x: &[T]) -> Self {
        let n = x.len() / 2;
        PhasePoint {
            q: x[..n].to_vec(),
            p: x[n..].to_vec(),
        }
    }

    pub fn to_vec(&self) -> Vec<T> {
        let mut x = self.q.clone();
        x.extend_from_slice(&self.p);
        x
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|v| v.is_finite())
    }
}

/// Zero potential.
#[derive(Clone, Copy, Debug)]
pub struct NoPotential(pub usize);

impl<T: Real> GenericMap<T> for NoPotential {
    fn input_dim(&self) -> usize {
        self.0
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn call<S: Scalar<Real = T>>(&self, _x: &[S]) -> Vec<S> {
        vec![S::zero()]
    }
}

/// Constant identity metric.
#[derive(Clone, Copy, Debug)]
pub struct EuclideanMetric(pub usize);

impl<T: Real> GenericMap<T> for EuclideanMetric {
    fn input_dim(&self) -> usize {
        self.0
    }
    fn output_dim(&self) -> usize {
        self.0 * self.0
    }
    fn call<S: Scalar<Real = T>>(&self, _x: &[S]) -> Vec<S> {
        let n = self.0;
        (0..n * n)
            .map(|i| if i / n == i % n { S::one() } else { S::zero() })
            .collect()
    }
}

/// Kinetic-minus-potential system on an `n`-chart with `k` Pfaffian constraints.
#[derive(Clone)]
pub struct MechanicalSystem<T: Real> {
    name: String,
    coordinates: Vec<String>,
    periodic: Vec<bool>,
    metric: MapRef<T>,
    potential: MapRef<T>,
    constraints: Option<MapRef<T>>,
    k: usize,
    pivots: Vec<usize>,
    free: Vec<usize>,
    reference: Vec<T>,
    rank_tol: T,
}

impl<T: Real> fmt::Debug for MechanicalSystem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MechanicalSystem")
            .field("name", &self.name)
            .field("coordinates", &self.coordinates)
            .field("k", &self.k)
            .field("pivots", &self.pivots)
            .finish_non_exhaustive()
    }
}

/// Builder validating a [`MechanicalSystem`] at its reference point.
pub struct SystemBuilder<T: Real> {
    name: String,
    coordinates: Vec<String>,
    periodic: Option<Vec<bool>>,
    metric: Option<MapRef<T>>,
    potential: Option<MapRef<T>>,
    constraints: Option<(usize, MapRef<T>)>,
    pivots: Option<Vec<usize>>,
    reference: Option<Vec<T>>,
    rank_tol: T,
}

impl<T: Real> SystemBuilder<T> {
    pub fn new<I, N>(coordinates: I) -> Self
    where
        I: IntoIterator<Item = N>,
        N: Into<String>,
    {
        SystemBuilder {
            name: "system".into(),
            coordinates: coordinates.into_iter().map(Into::into).collect(),
            periodic: None,
            metric: None,
            potential: None,
            constraints: None,
            pivots: None,
            reference: None,
            rank_tol: T::from_f64(1e-10),
        }
    }

    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Metric as a map `q ↦ G(q)` flattened row-major (`n → n²`).
    pub fn metric(mut self, map: impl SmoothMap<T> + 'static) -> Self {
        self.metric = Some(Arc::new(map));
        self
    }

    pub fn metric_ref(mut self, map: MapRef<T>) -> Self {
        self.metric = Some(map);
        self
    }

    pub fn potential(mut self, map: impl SmoothMap<T> + 'static) -> Self {
        self.potential = Some(Arc::new(map));
        self
    }

    pub fn potential_ref(mut self, map: MapRef<T>) -> Self {
        self.potential = Some(map);
        self
    }

    /// `k` constraint rows as a map `q ↦ A(q)` flattened row-major (`n → k·n`).
    pub fn constraints(mut self, k: usize, map: impl SmoothMap<T> + 'static) -> Self {
        self.constraints = Some((k, Arc::new(map)));
        self
    }

    pub fn constraints_ref(mut self, k: usize, map: MapRef<T>) -> Self {
        self.constraints = Some((k, map));
        self
    }

    /// Columns of `A` eliminated when building the `D` frame. Chosen at the
    /// reference point when not given.
    pub fn pivots(mut self, pivots: Vec<usize>) -> Self {
        self.pivots = Some(pivots);
        self
    }

    pub fn reference(mut self, q: Vec<T>) -> Self {
        self.reference = Some(q);
        self
    }

    pub fn periodic(mut self, flags: Vec<bool>) -> Self {
        self.periodic = Some(flags);
        self
    }

    pub fn rank_tol(mut self, tol: T) -> Self {
        self.rank_tol = tol;
        self
    }

    pub fn build(self) -> Result<MechanicalSystem<T>> {
        let n = self.coordinates.len();
        if n == 0 {
            return Err(Error::Config("system needs at least one coordinate".into()));
        }
        let metric = self
            .metric
            .ok_or_else(|| Error::Config("metric missing".into()))?;
        check_dim("metric input", n, metric.input_dim())?;
        check_dim("metric output", n * n, metric.output_dim())?;
        let potential = self.potential.unwrap_or_else(|| Arc::new(NoPotential(n)));
        check_dim("potential input", n, potential.input_dim())?;
        check_dim("potential output", 1, potential.output_dim())?;
        let (k, constraints) = match self.constraints {
            Some((0, _)) | None => (0, None),
            Some((k, map)) => {
                if k >= n {
                    return Err(Error::Config(format!(
                        "{k} constraint rows on a {n}-dimensional chart; need fewer rows than coordinates"
                    )));
                }
                check_dim("constraint input", n, map.input_dim())?;
                check_dim("constraint output", k * n, map.output_dim())?;
                (k, Some(map))
            }
        };
        let reference = self.reference.unwrap_or_else(|| vec![T::ZERO; n]);
        check_dim("reference point", n, reference.len())?;
        let periodic = self.periodic.unwrap_or_else(|| vec![false; n]);
        check_dim("periodic flags", n, periodic.len())?;

        let mut sys = MechanicalSystem {
            name: self.name,
            coordinates: self.coordinates,
            periodic,
            metric,
            potential,
            constraints,
            k,
            pivots: Vec::new(),
            free: (0..n).collect(),
            reference,
            rank_tol: self.rank_tol,
        };

        let g = sys.metric_matrix(&sys.reference)?;
        let scale = g.max_abs().max(T::ONE);
        if g.sub(&g.transpose()).max_abs() > T::from_f64(1e-12) * scale {
            return Err(Error::Config("metric is not symmetric at the reference point".into()));
        }
        cholesky(&g)?;

        if k > 0 {
            let a = sys.constraint_matrix(&sys.reference)?;
            sys.check_rank(&a)?;
            let pivots = match self.pivots {
                Some(p) => p,
                None => choose_pivots(&a, sys.rank_tol)?,
            };
            sys.set_pivots(pivots)?;
            sys.check_pivots(&a)?;
        } else if matches!(self.pivots, Some(ref p) if !p.is_empty()) {
            return Err(Error::Config("pivots given for an unconstrained system".into()));
        }
        Ok(sys)
    }
}

/// Greedy column pivoting with row elimination: largest entry first, ties to the lowest index.
fn choose_pivots<T: Real>(a: &Mat<T>, rank_tol: T) -> Result<Vec<usize>> {
    let (k, n) = a.shape();
    let mut work = a.clone();
    let scale = a.max_abs();
    let mut used = vec![false; n];
    let mut pivots = Vec::with_capacity(k);
    for r in 0..k {
        let mut best: Option<(usize, T)> = None;
        for j in (0..n).filter(|&j| !used[j]) {
            let v = work[(r, j)].abs();
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        let (j, v) = best.ok_or_else(|| Error::RankDeficient("no pivot column left".into()))?;
        if !(v > rank_tol * scale) {
            return Err(Error::RankDeficient(format!("constraint row {r} is dependent")));
        }
        used[j] = true;
        pivots.push(j);
        for i in r + 1..k {
            let f = work[(i, j)] / work[(r, j)];
            for c in 0..n {
                work[(i, c)] = work[(i, c)] - f * work[(r, c)];
            }
        }
    }
    Ok(pivots)
}

impl<T: Real> MechanicalSystem<T> {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Chart dimension.
    pub fn n(&self) -> usize {
        self.coordinates.len()
    }

    /// Number of constraints.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Rank of `D`.
    pub fn m(&self) -> usize {
        self.n() - self.k
    }

    pub fn coordinates(&self) -> &[String] {
        &self.coordinates
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Coordinates whose velocities parametrize `D` (the `u` coordinates of `M`).
    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn reference(&self) -> &[T] {
        &self.reference
    }

    pub fn rank_tol(&self) -> T {
        self.rank_tol
    }

    fn set_pivots(&mut self, pivots: Vec<usize>) -> Result<()> {
        let n = self.n();
        if pivots.len() != self.k {
            return Err(Error::Config(format!(
                "{} pivots given for {} constraints",
                pivots.len(),
                self.k
            )));
        }
        let mut seen = vec![false; n];
        for &p in &pivots {
            if p >= n || seen[p] {
                return Err(Error::Config(format!("invalid pivot column {p}")));
            }
            seen[p] = true;
        }
        self.free = (0..n).filter(|&j| !seen[j]).collect();
        self.pivots = pivots;
        Ok(())
    }

    fn check_rank(&self, a: &Mat<T>) -> Result<()> {
        let s = singular_values(a);
        let top = s.first().copied().unwrap_or(T::ZERO);
        let low = s.last().copied().unwrap_or(T::ZERO);
        if s.len() < self.k || !(low > self.rank_tol * top) {
            return Err(Error::RankDeficient(format!(
                "constraint matrix singular values {:?}",
                s.iter().map(|x| x.as_f64()).collect::<Vec<_>>()
            )));
        }
        Ok(())
    }

    fn check_pivots(&self, a: &Mat<T>) -> Result<()> {
        let ap = select_columns(a, &self.pivots);
        let top = singular_values(a).first().copied().unwrap_or(T::ZERO);
        let low = singular_values(&ap).last().copied().unwrap_or(T::ZERO);
        if !(low > self.rank_tol * top) {
            return Err(Error::InvalidPivot(format!(
                "pivot block of A has smallest singular value {} (largest of A {}); change the pivots or the chart",
                low, top
            )));
        }
        Ok(())
    }

    /// `G(q)` over any scalar.
    pub fn metric_at<S: Scalar<Real = T>>(&self, q: &[S]) -> Mat<S> {
        let n = self.n();
        Mat::from_vec(n, n, S::eval_map(&*self.metric, q))
    }

    pub fn potential_at<S: Scalar<Real = T>>(&self, q: &[S]) -> S {
        S::eval_map(&*self.potential, q)[0]
    }

    /// `A(q)` (`k × n`) over any scalar.
    pub fn constraint_matrix_at<S: Scalar<Real = T>>(&self, q: &[S]) -> Mat<S> {
        match &self.constraints {
            Some(map) => Mat::from_vec(self.k, self.n(), S::eval_map(&**map, q)),
            None => Mat::zeros(0, self.n()),
        }
    }

    pub fn metric_matrix(&self, q: &[T]) -> Result<Mat<T>> {
        self.check_q(q)?;
        let g = Mat::from_vec(self.n(), self.n(), apply(&*self.metric, q)?);
        if !g.is_finite() {
            return Err(Error::NonFinite("metric".into()));
        }
        Ok(g)
    }

    pub fn constraint_matrix(&self, q: &[T]) -> Result<Mat<T>> {
        self.check_q(q)?;
        let a = self.constraint_matrix_at(q);
        if !a.is_finite() {
            return Err(Error::NonFinite("constraint matrix".into()));
        }
        Ok(a)
    }

    pub fn potential(&self, q: &[T]) -> Result<T> {
        self.check_q(q)?;
        Ok(apply(&*self.potential, q)?[0])
    }

    fn check_q(&self, q: &[T]) -> Result<()> {
        check_dim("configuration", self.n(), q.len())
    }

    /// `D` frame over any scalar: free rows are the identity, pivot rows `−A_P⁻¹A_F`.
    ///
    /// Only checks that the pivot block is invertible; [`Self::d_basis`] adds
    /// the rank audits.
    pub fn d_basis_at<S: Scalar<Real = T>>(&self, q: &[S]) -> Result<Mat<S>> {
        let n = self.n();
        let m = self.m();
        let mut b = Mat::zeros(n, m);
        for (j, &f) in self.free.iter().enumerate() {
            b[(f, j)] = S::one();
        }
        if self.k == 0 {
            return Ok(b);
        }
        let a = self.constraint_matrix_at(q);
        let ap = select_columns(&a, &self.pivots);
        let af = select_columns(&a, &self.free);
        let lu = Lu::new(&ap).map_err(|_| Error::InvalidPivot("pivot block of A is singular".into()))?;
        let x = lu.solve_mat(&af);
        for (i, &p) in self.pivots.iter().enumerate() {
            for j in 0..m {
                b[(p, j)] = -x[(i, j)];
            }
        }
        Ok(b)
    }

    /// Basis `B_D(q)` of `null A(q)` from the frozen pivot pattern.
    pub fn d_basis(&self, q: &[T]) -> Result<Mat<T>> {
        self.check_q(q)?;
        if self.k > 0 {
            let a = self.constraint_matrix(q)?;
            self.check_rank(&a)?;
            self.check_pivots(&a)?;
        }
        let b = self.d_basis_at(q)?;
        if !b.is_finite() {
            return Err(Error::NonFinite("D basis".into()));
        }
        Ok(b)
    }

    /// `p = G(q) v`.
    pub fn legendre(&self, q: &[T], v: &[T]) -> Result<Vec<T>> {
        check_dim("velocity", self.n(), v.len())?;
        Ok(self.metric_matrix(q)?.matvec(v))
    }

    /// `v` with `G(q) v = p`.
    pub fn inverse_legendre(&self, q: &[T], p: &[T]) -> Result<Vec<T>> {
        check_dim("momentum", self.n(), p.len())?;
        cholesky_solve(&self.metric_matrix(q)?, p)
    }

    /// `H = ½ pᵀG⁻¹p + V` over any scalar.
    pub fn hamiltonian_at<S: Scalar<Real = T>>(&self, q: &[S], p: &[S]) -> Result<S> {
        let g = self.metric_at(q);
        let v = cholesky_solve(&g, p)?;
        Ok(S::c(0.5) * dot(p, &v) + self.potential_at(q))
    }

    pub fn hamiltonian(&self, point: &PhasePoint<T>) -> Result<T> {
        self.check_q(&point.q)?;
        check_dim("momentum", self.n(), point.p.len())?;
        self.hamiltonian_at(&point.q, &point.p)
    }

    /// `dH` at `(q, p)` as a length-`2n` vector `(∂H/∂q, ∂H/∂p)`.
    pub fn hamiltonian_gradient(&self, point: &PhasePoint<T>) -> Result<Vec<T>> {
        let n = self.n();
        self.check_q(&point.q)?;
        check_dim("momentum", n, point.p.len())?;
        let x = point.to_vec();
        let j = jacobian_with(&x, 1, |xd| Ok(vec![self.hamiltonian_at(&xd[..n], &xd[n..])?]))?;
        Ok(j.row(0).to_vec())
    }

    /// `X_H = (∂H/∂p, −∂H/∂q)`.
    pub fn hamiltonian_vector_field(&self, point: &PhasePoint<T>) -> Result<(Vec<T>, Vec<T>)> {
        let n = self.n();
        let grad = self.hamiltonian_gradient(point)?;
        let qdot = grad[n..].to_vec();
        let pdot = grad[..n].iter().map(|&g| -g).collect();
        Ok((qdot, pdot))
    }

    /// Scale-free nondegeneracy of `B_Dᵀ G B_D`: `|det|^{1/m}` over its RMS entry size.
    pub fn d_regularity_measure(&self, q: &[T]) -> Result<T> {
        let b = self.d_basis(q)?;
        let g = self.metric_matrix(q)?;
        let h = b.transpose().matmul(&g).matmul(&b);
        let m = h.rows();
        let scale = h.frobenius() / T::from_f64((m as f64).sqrt());
        if scale == T::ZERO {
            return Ok(T::ZERO);
        }
        let d = det(&h).abs();
        Ok(d.powf(T::ONE / T::from_f64(m as f64)) / scale)
    }

    /// True when the kinetic Hessian restricted to `D(q)` is nondegenerate.
    pub fn d_regularity(&self, q: &[T]) -> bool {
        self.d_regularity_measure(q)
            .map(|r| r > T::from_f64(1e-8))
            .unwrap_or(false)
    }

    /// Vector field `q ↦ B_D(q) e_i` spanning `D`.
    pub fn d_frame_field(&self, i: usize) -> DFrameField<T> {
        assert!(i < self.m(), "D frame index {i} out of range");
        DFrameField {
            sys: self.clone(),
            index: i,
        }
    }

    /// `A(q) · G(q)⁻¹ · p` over any scalar; vanishes exactly on `M`.
    pub fn m_residual_at<S: Scalar<Real = T>>(&self, q: &[S], p: &[S]) -> Result<Vec<S>> {
        if self.k == 0 {
            return Ok(Vec::new());
        }
        let v = cholesky_solve(&self.metric_at(q), p)?;
        Ok(self.constraint_matrix_at(q).matvec(&v))
    }

    /// Lifted copy of the reference point.
    pub fn reference_as<S: Scalar<Real = T>>(&self) -> Vec<S> {
        lift(&self.reference)
    }
}

pub(crate) fn select_columns<S: Scalar>(a: &Mat<S>, cols: &[usize]) -> Mat<S> {
    let mut out = Mat::zeros(a.rows(), cols.len());
    for i in 0..a.rows() {
        for (j, &c) in cols.iter().enumerate() {
            out[(i, j)] = a[(i, c)];
        }
    }
    out
}

/// Column `index` of the `D` frame as a vector field on the chart.
#[derive(Clone)]
pub struct DFrameField<T: Real> {
    sys: MechanicalSystem<T>,
    index: usize,
}

impl<T: Real> GenericMap<T> for DFrameField<T> {
    fn input_dim(&self) -> usize {
        self.sys.n()
    }
    fn output_dim(&self) -> usize {
        self.sys.n()
    }
    fn call<S: Scalar<Real = T>>(&self, q: &[S]) -> Vec<S> {
        match self.sys.d_basis_at(q) {
            Ok(b) => b.column(self.index),
            Err(_) => vec![S::c(f64::NAN); self.sys.n()],
        }
    }
}
