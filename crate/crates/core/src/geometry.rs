//! The constraint submanifold `M = FL(D)` as an intrinsic `(q, u)` chart, the
//! distributions `F` and `K`, and the distributional two-form `ω_K`.

use serde::Serialize;

use crate::calculus::{check_dim, jacobian_with};
use crate::error::{Error, Result};
use crate::linalg::{condition_number, det, relative_rank, svd, Mat};
use crate::mechanics::{MechanicalSystem, PhasePoint};
use crate::scalar::{max_abs, Real, Scalar};

/// Point of `M` in chart coordinates: configuration `q` and the coefficients
/// `u` of the velocity in the `D` frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstrainedChartPoint<T> {
    pub q: Vec<T>,
    pub u: Vec<T>,
}

impl<T: Real> ConstrainedChartPoint<T> {
    pub fn new(q: Vec<T>, u: Vec<T>) -> Self {
        ConstrainedChartPoint { q, u }
    }

    /// Concatenated chart vector `(q, u)`.
    pub fn to_vec(&self) -> Vec<T> {
        let mut x = self.q.clone();
        x.extend_from_slice(&self.u);
        x
    }

    pub fn from_slice(n: usize, x: &[T]) -> Self {
        ConstrainedChartPoint {
            q: x[..n].to_vec(),
            u: x[n..].to_vec(),
        }
    }
}

impl<T: Real> MechanicalSystem<T> {
    /// `(q, u) ↦ G(q) B_D(q) u` over any scalar.
    pub fn embed_momentum_at<S: Scalar<Real = T>>(&self, q: &[S], u: &[S]) -> Result<Vec<S>> {
        let b = self.d_basis_at(q)?;
        let v = b.matvec(u);
        Ok(self.metric_at(q).matvec(&v))
    }

    fn check_chart(&self, point: &ConstrainedChartPoint<T>) -> Result<()> {
        check_dim("chart configuration", self.n(), point.q.len())?;
        check_dim("chart fiber coordinates", self.m(), point.u.len())
    }
}

/// Phase point `(q, G(q) B_D(q) u)` of `M`.
pub fn embed<T: Real>(sys: &MechanicalSystem<T>, point: &ConstrainedChartPoint<T>) -> Result<PhasePoint<T>> {
    sys.check_chart(point)?;
    sys.d_basis(&point.q)?;
    let p = sys.embed_momentum_at(&point.q, &point.u)?;
    Ok(PhasePoint::new(point.q.clone(), p))
}

/// `A(q) G(q)⁻¹ p`, zero exactly on `M`.
pub fn m_residual<T: Real>(sys: &MechanicalSystem<T>, point: &PhasePoint<T>) -> Result<Vec<T>> {
    check_dim("configuration", sys.n(), point.q.len())?;
    check_dim("momentum", sys.n(), point.p.len())?;
    sys.m_residual_at(&point.q, &point.p)
}

/// Chart coordinates of a phase point: `u` are the free components of `G⁻¹p`.
///
/// Exact for points of `M`; elsewhere it is the chart point with the same free velocities.
pub fn chart_point_from_phase<T: Real>(
    sys: &MechanicalSystem<T>,
    point: &PhasePoint<T>,
) -> Result<ConstrainedChartPoint<T>> {
    let v = sys.inverse_legendre(&point.q, &point.p)?;
    let u = sys.free().iter().map(|&i| v[i]).collect();
    Ok(ConstrainedChartPoint::new(point.q.clone(), u))
}

/// Linear-algebra data of the distributional Hamiltonian equation at a point of `M`.
#[derive(Clone, Debug)]
pub struct KFrame<T: Real> {
    pub base: ConstrainedChartPoint<T>,
    /// Chart tangents spanning `K`, `(n+m) × 2m`.
    pub k_basis: Mat<T>,
    /// `ω_K` in the `k_basis`, `2m × 2m`.
    pub omega_k: Mat<T>,
    /// `dH_K` on the `k_basis`, length `2m`.
    pub dh_k: Vec<T>,
    /// Jacobian of the embedding, `2n × (n+m)`.
    pub ambient_push: Mat<T>,
    /// `D` frame at `base.q`.
    pub d_basis: Mat<T>,
    /// Gradient of `H∘embed` in chart coordinates.
    pub chart_dh: Vec<T>,
}

impl<T: Real> KFrame<T> {
    /// Ambient images of the `K` basis, `2n × 2m`.
    pub fn k_ambient(&self) -> Mat<T> {
        self.ambient_push.matmul(&self.k_basis)
    }

    /// Scale-free nondegeneracy measure `|det ω_K|^{1/2m}` over the RMS entry size.
    pub fn nondegeneracy(&self) -> T {
        nondegeneracy(&self.omega_k)
    }

    pub fn condition(&self) -> T {
        condition_number(&self.omega_k)
    }

    /// Solves `Ω_Kᵀ c = rhs`, the coefficient form of `ω_K(X, ·) = rhs`.
    pub fn solve_interior(&self, rhs: &[T]) -> Result<Vec<T>> {
        let condition = self.condition();
        if !(self.nondegeneracy() > T::from_f64(1e-8)) || !(condition <= T::from_f64(1e12)) {
            return Err(Error::Compatibility {
                condition: condition.as_f64(),
            });
        }
        crate::linalg::solve(&self.omega_k.transpose(), rhs).map_err(|_| Error::Compatibility {
            condition: condition.as_f64(),
        })
    }

    /// `τ_K`: the projection of an ambient phase tangent onto `K` along its
    /// `ω`-complement, returned as an ambient vector.
    pub fn project_onto_k(&self, x: &[T]) -> Result<Vec<T>> {
        let n2 = self.ambient_push.rows();
        check_dim("ambient tangent", n2, x.len())?;
        let kamb = self.k_ambient();
        let j = Mat::<T>::symplectic(n2 / 2);
        // ω(x, K e_j) = xᵀ J K e_j
        let rhs = kamb.tr_matvec(&j.tr_matvec(x));
        let c = self.solve_interior(&rhs)?;
        Ok(kamb.matvec(&c))
    }
}

fn nondegeneracy<T: Real>(omega: &Mat<T>) -> T {
    let dim = omega.rows();
    if dim == 0 {
        return T::ONE;
    }
    let scale = omega.frobenius() / T::from_f64((dim as f64).sqrt());
    if scale == T::ZERO {
        return T::ZERO;
    }
    det(omega).abs().powf(T::ONE / T::from_f64(dim as f64)) / scale
}

/// Jacobian of `(q, u) ↦ (q, G B u)` at a chart point.
pub fn ambient_push<T: Real>(sys: &MechanicalSystem<T>, point: &ConstrainedChartPoint<T>) -> Result<Mat<T>> {
    let n = sys.n();
    let x = point.to_vec();
    jacobian_with(&x, 2 * n, |xd| {
        let mut out = xd[..n].to_vec();
        out.extend(sys.embed_momentum_at(&xd[..n], &xd[n..])?);
        Ok(out)
    })
}

/// `ω_M = i_M^*ω` in chart coordinates: `Pᵀ J P`, `(n+m) × (n+m)`.
pub fn omega_m<T: Real>(sys: &MechanicalSystem<T>, point: &ConstrainedChartPoint<T>) -> Result<Mat<T>> {
    let push = ambient_push(sys, point)?;
    let j = Mat::symplectic(sys.n());
    Ok(push.transpose().matmul(&j).matmul(&push))
}

/// Chart basis of `K = {(δq, δu) : A(q) δq = 0}`.
pub fn k_basis<T: Real>(sys: &MechanicalSystem<T>, d_basis: &Mat<T>) -> Mat<T> {
    let (n, m) = (sys.n(), sys.m());
    let mut kb = Mat::zeros(n + m, 2 * m);
    for i in 0..m {
        for r in 0..n {
            kb[(r, i)] = d_basis[(r, i)];
        }
        kb[(n + i, m + i)] = T::ONE;
    }
    kb
}

/// Builds `K`, `ω_K` and `dH_K` at a point of `M`.
pub fn k_frame<T: Real>(sys: &MechanicalSystem<T>, point: &ConstrainedChartPoint<T>) -> Result<KFrame<T>> {
    sys.check_chart(point)?;
    let n = sys.n();
    let d_basis = sys.d_basis(&point.q)?;
    let push = ambient_push(sys, point)?;
    if !push.is_finite() {
        return Err(Error::NonFinite("embedding Jacobian".into()));
    }
    let kb = k_basis(sys, &d_basis);
    let kamb = push.matmul(&kb);
    let j = Mat::symplectic(n);
    let omega_k = kamb.transpose().matmul(&j).matmul(&kamb);

    let x = point.to_vec();
    let grad = jacobian_with(&x, 1, |xd| {
        let p = sys.embed_momentum_at(&xd[..n], &xd[n..])?;
        Ok(vec![sys.hamiltonian_at(&xd[..n], &p)?])
    })?;
    let chart_dh = grad.row(0).to_vec();
    let dh_k = kb.tr_matvec(&chart_dh);
    Ok(KFrame {
        base: point.clone(),
        k_basis: kb,
        omega_k,
        dh_k,
        ambient_push: push,
        d_basis,
        chart_dh,
    })
}

/// Admissibility and compatibility diagnostics at a point of `M`.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionsReport {
    pub admissible: bool,
    pub compatible: bool,
    pub omega_k_condition: f64,
    pub nondegeneracy: f64,
    pub dim_m: usize,
    pub rank_f: usize,
    pub rank_tm: usize,
}

/// Phase-space basis of `F = {(a, b) : A(q) a = 0}` at configuration `q`: `[[B, 0], [0, I]]`.
pub fn f_basis<T: Real>(sys: &MechanicalSystem<T>, d_basis: &Mat<T>) -> Mat<T> {
    let (n, m) = (sys.n(), sys.m());
    let mut f = Mat::zeros(2 * n, m + n);
    for r in 0..n {
        for c in 0..m {
            f[(r, c)] = d_basis[(r, c)];
        }
        f[(n + r, m + r)] = T::ONE;
    }
    f
}

/// Checks `dim M = rank F` (as a rank audit) and `TM ∩ F⊥ = {0}` (as nondegeneracy of `ω_K`).
pub fn conditions_check<T: Real>(sys: &MechanicalSystem<T>, point: &ConstrainedChartPoint<T>) -> ConditionsReport {
    let dim_m = sys.n() + sys.m();
    let frame = match k_frame(sys, point) {
        Ok(f) => f,
        Err(_) => {
            return ConditionsReport {
                admissible: false,
                compatible: false,
                omega_k_condition: f64::INFINITY,
                nondegeneracy: 0.0,
                dim_m,
                rank_f: 0,
                rank_tm: 0,
            }
        }
    };
    let rel = T::from_f64(1e-10);
    let rank_f = relative_rank(&f_basis(sys, &frame.d_basis), rel);
    let rank_tm = relative_rank(&frame.ambient_push, rel);
    let nondeg = frame.nondegeneracy();
    let cond = frame.condition();
    ConditionsReport {
        admissible: rank_f == 2 * sys.n() - sys.k() && rank_tm == dim_m && rank_f == dim_m,
        compatible: nondeg > T::from_f64(1e-8) && cond <= T::from_f64(1e12),
        omega_k_condition: cond.as_f64(),
        nondegeneracy: nondeg.as_f64(),
        dim_m,
        rank_f,
        rank_tm,
    }
}

/// Basis of the `ω`-orthogonal complement of `span(basis)` in `ℝ^{2n}`.
pub fn symplectic_orthogonal<T: Real>(basis: &Mat<T>) -> Result<Mat<T>> {
    let (n2, r) = basis.shape();
    if n2 % 2 != 0 {
        return Err(Error::InvalidArgument("phase tangents need even dimension".into()));
    }
    if r > 0 && relative_rank(basis, T::from_f64(1e-10)) < r {
        return Err(Error::RankDeficient("symplectic_orthogonal input".into()));
    }
    if r == 0 {
        return Ok(Mat::identity(n2));
    }
    let j = Mat::symplectic(n2 / 2);
    // w ⟂_ω span  ⇔  (J·basis)ᵀ w = 0
    let constraint = j.matmul(basis).transpose();
    let d = svd(&constraint);
    let cols: Vec<Vec<T>> = (r..n2).map(|c| d.v.column(c)).collect();
    if cols.is_empty() {
        return Ok(Mat::zeros(n2, 0));
    }
    Ok(Mat::from_columns(&cols))
}

/// `max |ω(v, w)|` over columns of two bases.
pub fn max_pairing<T: Real>(a: &Mat<T>, b: &Mat<T>) -> T {
    let j = Mat::symplectic(a.rows() / 2);
    max_abs(a.transpose().matmul(&j).matmul(b).as_slice())
}
