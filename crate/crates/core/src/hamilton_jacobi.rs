//! One-form sections `γ`, phase maps `ε`, and the Type I / Type II
//! Hamilton–Jacobi residuals together with the supporting identities.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::calculus::{apply, check_dim, d_oneform, directional_with, jacobian, ConstantField, SmoothMap};
use crate::dynamics::nonholonomic_field;
use crate::error::{Error, Result};
use crate::geometry::{chart_point_from_phase, k_frame, m_residual};
use crate::linalg::Mat;
use crate::mechanics::{MapRef, MechanicalSystem, PhasePoint};
use crate::scalar::{distance, dot, max_abs, norm, Real};

/// Membership tolerance for hypotheses of the residual checks.
pub const MEMBERSHIP_TOL: f64 = 1e-8;
/// Largest symplecticity defect accepted for `ε`.
pub const SYMPLECTIC_TOL: f64 = 1e-8;

/// `q ↦ (q, γ(q))`, given by its covector coefficients.
#[derive(Clone)]
pub struct OneFormSection<T: Real> {
    pub gamma: MapRef<T>,
}

impl<T: Real> OneFormSection<T> {
    pub fn new(map: impl SmoothMap<T> + 'static) -> Self {
        OneFormSection { gamma: Arc::new(map) }
    }

    pub fn from_ref(gamma: MapRef<T>) -> Self {
        OneFormSection { gamma }
    }

    pub fn dim(&self) -> usize {
        self.gamma.input_dim()
    }

    pub fn eval(&self, q: &[T]) -> Result<Vec<T>> {
        let v = apply(&*self.gamma, q)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("one-form section".into()));
        }
        Ok(v)
    }

    /// `Dγ(q)`.
    pub fn jacobian(&self, q: &[T]) -> Result<Mat<T>> {
        jacobian(&*self.gamma, q)
    }

    /// `(q, γ(q))`.
    pub fn point(&self, q: &[T]) -> Result<PhasePoint<T>> {
        Ok(PhasePoint::new(q.to_vec(), self.eval(q)?))
    }

    /// `Tγ·v = (v, Dγ v)`.
    pub fn push(&self, q: &[T], v: &[T]) -> Result<Vec<T>> {
        let mut out = v.to_vec();
        out.extend(self.jacobian(q)?.matvec(v));
        Ok(out)
    }
}

/// Phase-space map `ε: T*Q → T*Q` in canonical coordinates.
#[derive(Clone)]
pub struct PhaseMap<T: Real> {
    pub eps: MapRef<T>,
}

impl<T: Real> PhaseMap<T> {
    pub fn new(map: impl SmoothMap<T> + 'static) -> Self {
        PhaseMap { eps: Arc::new(map) }
    }

    pub fn from_ref(eps: MapRef<T>) -> Self {
        PhaseMap { eps }
    }

    pub fn apply(&self, point: &PhasePoint<T>) -> Result<PhasePoint<T>> {
        let v = apply(&*self.eps, &point.to_vec())?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("phase map".into()));
        }
        Ok(PhasePoint::from_slice(&v))
    }

    pub fn jacobian(&self, point: &PhasePoint<T>) -> Result<Mat<T>> {
        jacobian(&*self.eps, &point.to_vec())
    }
}

fn check_section<T: Real>(sys: &MechanicalSystem<T>, gamma: &OneFormSection<T>) -> Result<()> {
    check_dim("one-form section input", sys.n(), gamma.gamma.input_dim())?;
    check_dim("one-form section output", sys.n(), gamma.gamma.output_dim())
}

/// `max_{i<j} |dγ(α_i, α_j)|` over the `D` frame fields.
pub fn closedness_on_d<T: Real>(sys: &MechanicalSystem<T>, gamma: &OneFormSection<T>, q: &[T]) -> Result<T> {
    check_section(sys, gamma)?;
    sys.d_basis(q)?;
    let fields: Vec<_> = (0..sys.m()).map(|i| sys.d_frame_field(i)).collect();
    let mut worst = T::ZERO;
    for i in 0..fields.len() {
        for j in i + 1..fields.len() {
            let v = d_oneform(&*gamma.gamma, q, &fields[i], &fields[j])?;
            worst = worst.max(v.abs());
        }
    }
    Ok(worst)
}

/// `A G⁻¹ γ(q)`: zero iff `γ(q) ∈ M`.
pub fn gamma_into_m<T: Real>(sys: &MechanicalSystem<T>, gamma: &OneFormSection<T>, q: &[T]) -> Result<Vec<T>> {
    check_section(sys, gamma)?;
    m_residual(sys, &gamma.point(q)?)
}

fn require_on_m<T: Real>(sys: &MechanicalSystem<T>, point: &PhasePoint<T>, what: &str) -> Result<()> {
    let r = max_abs(&m_residual(sys, point)?);
    if !(r <= T::from_f64(MEMBERSHIP_TOL)) {
        return Err(Error::Hypothesis(format!("{what} is off M (residual {r:e})")));
    }
    Ok(())
}

/// Ambient `X_K` at a phase point of `M`.
fn x_k_ambient<T: Real>(sys: &MechanicalSystem<T>, point: &PhasePoint<T>) -> Result<Vec<T>> {
    let chart = chart_point_from_phase(sys, point)?;
    Ok(nonholonomic_field(sys, &chart)?.ambient)
}

/// Base part of `X_H` at a phase point.
fn base_velocity<T: Real>(sys: &MechanicalSystem<T>, point: &PhasePoint<T>) -> Result<Vec<T>> {
    Ok(sys.hamiltonian_vector_field(point)?.0)
}

/// `max_i dist(Tγ·α_i, TM)` measured by `d(A G⁻¹ p)(Tγ·α_i)`; zero when `Tγ(D) ⊂ K`.
pub fn tangent_in_k_residual<T: Real>(
    sys: &MechanicalSystem<T>,
    gamma: &OneFormSection<T>,
    q: &[T],
) -> Result<T> {
    check_section(sys, gamma)?;
    let n = sys.n();
    let b = sys.d_basis(q)?;
    let base = gamma.point(q)?.to_vec();
    let mut worst = T::ZERO;
    for i in 0..sys.m() {
        let tangent = gamma.push(q, &b.column(i))?;
        let (_, d) = directional_with(&base, &tangent, |x| sys.m_residual_at(&x[..n], &x[n..]))?;
        worst = worst.max(max_abs(&d));
    }
    Ok(worst)
}

/// `|Tγ·X_H^γ − X_K·γ|` at `q`.
pub fn type1_residual<T: Real>(sys: &MechanicalSystem<T>, gamma: &OneFormSection<T>, q: &[T]) -> Result<T> {
    check_section(sys, gamma)?;
    let point = gamma.point(q)?;
    require_on_m(sys, &point, "γ(q)")?;
    let v = base_velocity(sys, &point)?;
    let lhs = gamma.push(q, &v)?;
    let rhs = x_k_ambient(sys, &point)?;
    Ok(distance(&lhs, &rhs))
}

/// `|X_K(γ(q))|`: zero iff the classical Hamilton–Jacobi equation holds at `q`.
pub fn classical_hj_residual<T: Real>(sys: &MechanicalSystem<T>, gamma: &OneFormSection<T>, q: &[T]) -> Result<T> {
    check_section(sys, gamma)?;
    let point = gamma.point(q)?;
    require_on_m(sys, &point, "γ(q)")?;
    Ok(norm(&x_k_ambient(sys, &point)?))
}

/// `max |ω(Dε v, Dε w) − ω(v, w)|` over all basis pairs and `trials` random unit pairs.
pub fn symplecticity_residual<T: Real>(eps: &PhaseMap<T>, point: &PhasePoint<T>, trials: usize) -> Result<T> {
    symplecticity_residual_seeded(eps, point, trials, 0x5eed)
}

pub fn symplecticity_residual_seeded<T: Real>(
    eps: &PhaseMap<T>,
    point: &PhasePoint<T>,
    trials: usize,
    seed: u64,
) -> Result<T> {
    let dim = 2 * point.q.len();
    check_dim("phase map input", dim, eps.eps.input_dim())?;
    check_dim("phase map output", dim, eps.eps.output_dim())?;
    let de = eps.jacobian(point)?;
    let j = Mat::<T>::symplectic(dim / 2);
    // defect matrix Dεᵀ J Dε − J; each pair is a bilinear evaluation
    let defect = de.transpose().matmul(&j).matmul(&de).sub(&j);
    let mut worst = max_abs(defect.as_slice());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let v = random_unit(&mut rng, dim);
        let w = random_unit(&mut rng, dim);
        worst = worst.max(dot(&v, &defect.matvec(&w)).abs());
    }
    Ok(worst)
}

pub(crate) fn random_unit<T: Real>(rng: &mut impl Rng, dim: usize) -> Vec<T> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-3 {
            return v.iter().map(|x| T::from_f64(x / r)).collect();
        }
    }
}

fn require_symplectic<T: Real>(eps: &PhaseMap<T>, point: &PhasePoint<T>) -> Result<T> {
    let s = symplecticity_residual(eps, point, 16)?;
    if !(s <= T::from_f64(SYMPLECTIC_TOL)) {
        return Err(Error::Hypothesis(format!("ε is not symplectic (defect {s:e})")));
    }
    Ok(s)
}

/// `|Tγ·X_H^ε − X_K·ε|` at `point`.
pub fn type2_residual<T: Real>(
    sys: &MechanicalSystem<T>,
    gamma: &OneFormSection<T>,
    eps: &PhaseMap<T>,
    point: &PhasePoint<T>,
) -> Result<T> {
    check_section(sys, gamma)?;
    require_symplectic(eps, point)?;
    type2_gap(sys, gamma, &eps.apply(point)?)
}

fn type2_gap<T: Real>(sys: &MechanicalSystem<T>, gamma: &OneFormSection<T>, image: &PhasePoint<T>) -> Result<T> {
    require_on_m(sys, image, "ε(point)")?;
    let qe = &image.q;
    require_on_m(sys, &gamma.point(qe)?, "γ at the base of ε(point)")?;
    let v = base_velocity(sys, image)?;
    let lhs = gamma.push(qe, &v)?;
    let rhs = x_k_ambient(sys, image)?;
    Ok(distance(&lhs, &rhs))
}

/// Gaps of the two equivalent forms of the Type II equation.
#[derive(Clone, Debug, Serialize)]
pub struct Type2Equivalence<T> {
    /// `|τ_K·Tε·X_{H∘ε} − Tλ·X_H·ε|`.
    pub lhs_rhs_gap: T,
    /// `|Tγ·X_H^ε − X_K·ε|`.
    pub hj_gap: T,
    pub symplecticity: T,
    /// False when `ε` failed the symplecticity audit; the gaps then need not co-vanish.
    pub symplectic: bool,
}

/// Evaluates both sides of the Type II equivalence without rejecting non-symplectic `ε`.
pub fn type2_equivalence_residual<T: Real>(
    sys: &MechanicalSystem<T>,
    gamma: &OneFormSection<T>,
    eps: &PhaseMap<T>,
    point: &PhasePoint<T>,
) -> Result<Type2Equivalence<T>> {
    check_section(sys, gamma)?;
    let n = sys.n();
    let symplecticity = symplecticity_residual(eps, point, 16)?;
    let image = eps.apply(point)?;
    let hj_gap = type2_gap(sys, gamma, &image)?;

    // X_{H∘ε} at point, pushed forward by Dε
    let x = point.to_vec();
    let grad = crate::calculus::jacobian_with(&x, 1, |xd| {
        let e = eps.eps.eval_dual(xd);
        Ok(vec![sys.hamiltonian_at(&e[..n], &e[n..])?])
    })?;
    let g = grad.row(0);
    let mut x_hbar: Vec<T> = g[n..].to_vec();
    x_hbar.extend(g[..n].iter().map(|&v| -v));
    let pushed = eps.jacobian(point)?.matvec(&x_hbar);
    let frame = k_frame(sys, &chart_point_from_phase(sys, &image)?)?;
    let projected = frame.project_onto_k(&pushed)?;

    let v = base_velocity(sys, &image)?;
    let t_lambda = gamma.push(&image.q, &v)?;
    Ok(Type2Equivalence {
        lhs_rhs_gap: distance(&projected, &t_lambda),
        hj_gap,
        symplecticity,
        symplectic: symplecticity <= T::from_f64(SYMPLECTIC_TOL),
    })
}

/// Residuals of the three pullback identities behind `γ*ω = −dγ`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PullbackResiduals<T> {
    pub r_i: T,
    pub r_ii: T,
    pub r_iii: T,
}

fn omega<T: Real>(a: &[T], b: &[T]) -> T {
    let n = a.len() / 2;
    dot(&a[..n], &b[n..]) - dot(&b[..n], &a[n..])
}

/// `dγ(a, b)` for tangent vectors at `q`, via constant extensions.
fn d_gamma<T: Real>(gamma: &OneFormSection<T>, q: &[T], a: &[T], b: &[T]) -> Result<T> {
    let x = ConstantField { value: a.to_vec() };
    let y = ConstantField { value: b.to_vec() };
    d_oneform(&*gamma.gamma, q, &x, &y)
}

/// Evaluates the three identities for `λ = γ∘π_Q` at `point` on tangents `v`, `w`.
pub fn pullback_residuals<T: Real>(
    sys: &MechanicalSystem<T>,
    gamma: &OneFormSection<T>,
    point: &PhasePoint<T>,
    v: &[T],
    w: &[T],
) -> Result<PullbackResiduals<T>> {
    check_section(sys, gamma)?;
    let n = sys.n();
    check_dim("phase tangent", 2 * n, v.len())?;
    check_dim("phase tangent", 2 * n, w.len())?;
    let q = &point.q;
    let t_lambda = |x: &[T]| gamma.push(q, &x[..n]);
    let lv = t_lambda(v)?;
    let lw = t_lambda(w)?;
    let dg = d_gamma(gamma, q, &v[..n], &w[..n])?;
    let r_i = (omega(&lv, &lw) + dg).abs();
    let w_minus: Vec<T> = w.iter().zip(&lw).map(|(&a, &b)| a - b).collect();
    let r_ii = (omega(&lv, w) - omega(v, &w_minus) + dg).abs();
    let lambda_point = gamma.point(q)?;
    let base = base_velocity(sys, &lambda_point)?;
    let r_iii = max_abs(&sys.constraint_matrix(q)?.matvec(&base));
    Ok(PullbackResiduals { r_i, r_ii, r_iii })
}

/// `|θ(Tγ·x) − γ(x)|` for the tautological one-form `θ = p dq`.
pub fn tautological_residual<T: Real>(gamma: &OneFormSection<T>, q: &[T], x: &[T]) -> Result<T> {
    let g = gamma.eval(q)?;
    let pushed = gamma.push(q, x)?;
    let n = q.len();
    Ok((dot(&g, &pushed[..n]) - dot(&g, x)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::GenericMap;
    use crate::examples::{self, DiskParams, DiskSection, ParticleClosedSection, ParticleLinearSection};
    use crate::scalar::Scalar;

    /// γ = dF for F = q₁²q₂ on ℝ³
    struct ExactForm;
    impl GenericMap<f64> for ExactForm {
        fn input_dim(&self) -> usize {
            3
        }
        fn output_dim(&self) -> usize {
            3
        }
        fn call<S: Scalar<Real = f64>>(&self, q: &[S]) -> Vec<S> {
            vec![S::c(2.0) * q[0] * q[1], q[0] * q[0], S::zero()]
        }
    }

    struct Identity;
    impl GenericMap<f64> for Identity {
        fn input_dim(&self) -> usize {
            6
        }
        fn output_dim(&self) -> usize {
            6
        }
        fn call<S: Scalar<Real = f64>>(&self, x: &[S]) -> Vec<S> {
            x.to_vec()
        }
    }

    struct Scale2;
    impl GenericMap<f64> for Scale2 {
        fn input_dim(&self) -> usize {
            6
        }
        fn output_dim(&self) -> usize {
            6
        }
        fn call<S: Scalar<Real = f64>>(&self, x: &[S]) -> Vec<S> {
            let mut out = x.to_vec();
            for v in &mut out[3..] {
                *v = S::c(2.0) * *v;
            }
            out
        }
    }

    /// time-t flow of H = ½|p|²
    struct FreeFlow(f64);
    impl GenericMap<f64> for FreeFlow {
        fn input_dim(&self) -> usize {
            6
        }
        fn output_dim(&self) -> usize {
            6
        }
        fn call<S: Scalar<Real = f64>>(&self, x: &[S]) -> Vec<S> {
            let t = S::c(self.0);
            (0..6)
                .map(|i| if i < 3 { x[i] + t * x[i + 3] } else { x[i] })
                .collect()
        }
    }

    #[test]
    fn exact_form_is_closed_and_particle_linear_section_is_not() {
        let sys = examples::particle();
        let exact = OneFormSection::new(ExactForm);
        assert!(closedness_on_d(&sys, &exact, &[0.3, -1.1, 0.7]).unwrap() < 1e-12);
        let linear = OneFormSection::new(ParticleLinearSection { c1: 2.0, c2: 3.0 });
        // dγ(α, β) = −c₁σ′(y)·y-independent part cancels only for c₁ = 0
        let v = closedness_on_d(&sys, &linear, &[0.0, 1.0, 0.0]).unwrap();
        assert!((v - 2.0).abs() < 1e-12, "{v}");
        let closed = OneFormSection::new(ParticleClosedSection { b: 3.0, c: 2.0 });
        assert!(closedness_on_d(&sys, &closed, &[0.5, -1.7, 2.0]).unwrap() < 1e-12);
    }

    #[test]
    fn membership_of_example_sections() {
        let particle = examples::particle();
        let linear = OneFormSection::new(ParticleLinearSection { c1: 2.0, c2: 3.0 });
        assert!(max_abs(&gamma_into_m(&particle, &linear, &[0.2, 1.3, -0.4]).unwrap()) < 1e-15);
        let disk = examples::disk(DiskParams::default());
        let section = OneFormSection::new(DiskSection {
            p_theta: 2.0,
            p_phi: -1.0,
            params: DiskParams::default(),
        });
        assert!(max_abs(&gamma_into_m(&disk, &section, &[0.2, 1.3, -0.4, 0.9]).unwrap()) < 1e-15);
    }

    #[test]
    fn type1_holds_for_closed_sections() {
        let particle = examples::particle();
        let closed = OneFormSection::new(ParticleClosedSection { b: 3.0, c: 2.0 });
        for q in [[0.0, 1.0, 0.0], [1.2, -0.7, 0.3]] {
            assert!(type1_residual(&particle, &closed, &q).unwrap() < 1e-12);
            assert!(tangent_in_k_residual(&particle, &closed, &q).unwrap() < 1e-12);
        }
        let disk = examples::disk(DiskParams::default());
        let section = OneFormSection::new(DiskSection {
            p_theta: 2.0,
            p_phi: 3.0,
            params: DiskParams::default(),
        });
        let q = [0.1, -0.3, 0.8, 1.9];
        assert!(closedness_on_d(&disk, &section, &q).unwrap() < 1e-12);
        assert!(type1_residual(&disk, &section, &q).unwrap() < 1e-12);
    }

    #[test]
    fn type1_rejects_sections_off_m() {
        let particle = examples::particle();
        let off = OneFormSection::new(ParticleLinearSection { c1: 2.0, c2: 3.0 });
        assert!(type1_residual(&particle, &off, &[0.0, 0.0, 0.0]).is_ok());
        let bad = OneFormSection::new(ExactForm);
        assert!(matches!(
            type1_residual(&particle, &bad, &[1.0, 1.0, 0.0]),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn classical_hj_examples() {
        let free = examples::free_particle(3);
        let zero = OneFormSection::new(ParticleLinearSection { c1: 0.0, c2: 0.0 });
        assert_eq!(classical_hj_residual(&free, &zero, &[0.1, 0.2, 0.3]).unwrap(), 0.0);
        assert_eq!(type1_residual(&free, &zero, &[0.1, 0.2, 0.3]).unwrap(), 0.0);
        let particle = examples::particle();
        let linear = OneFormSection::new(ParticleLinearSection { c1: 2.0, c2: 3.0 });
        let r = classical_hj_residual(&particle, &linear, &[0.0, 1.0, 0.0]).unwrap();
        assert!(r > 1.0);
    }

    #[test]
    fn symplecticity_of_examples() {
        let pt = PhasePoint::new(vec![0.1, 0.2, 0.3], vec![1.0, -1.0, 0.5]);
        assert_eq!(symplecticity_residual(&PhaseMap::new(Identity), &pt, 20).unwrap(), 0.0);
        assert!(symplecticity_residual(&PhaseMap::new(FreeFlow(0.7)), &pt, 20).unwrap() < 1e-10);
        let s = symplecticity_residual(&PhaseMap::new(Scale2), &pt, 20).unwrap();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn type2_with_identity_reduces_to_type1() {
        let sys = examples::particle();
        let closed = OneFormSection::new(ParticleClosedSection { b: 3.0, c: 2.0 });
        let q = [0.4, 0.9, -1.0];
        let point = closed.point(&q).unwrap();
        let id = PhaseMap::new(Identity);
        let r2 = type2_residual(&sys, &closed, &id, &point).unwrap();
        let r1 = type1_residual(&sys, &closed, &q).unwrap();
        assert!((r2 - r1).abs() < 1e-15 && r2 < 1e-12);
        let eq = type2_equivalence_residual(&sys, &closed, &id, &point).unwrap();
        assert!(eq.symplectic && eq.lhs_rhs_gap < 1e-12 && eq.hj_gap < 1e-12);
    }

    #[test]
    fn type2_rejects_nonsymplectic_and_off_m() {
        let sys = examples::particle();
        let closed = OneFormSection::new(ParticleClosedSection { b: 3.0, c: 2.0 });
        let point = closed.point(&[0.4, 0.9, -1.0]).unwrap();
        assert!(matches!(
            type2_residual(&sys, &closed, &PhaseMap::new(Scale2), &point),
            Err(Error::Hypothesis(_))
        ));
        let eq = type2_equivalence_residual(&sys, &closed, &PhaseMap::new(Scale2), &point).unwrap();
        assert!(!eq.symplectic && eq.hj_gap > 1e-3);
        // the free flow leaves M
        assert!(matches!(
            type2_residual(&sys, &closed, &PhaseMap::new(FreeFlow(0.5)), &point),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn pullback_identities_on_exact_and_particle_sections() {
        let sys = examples::particle();
        let point = PhasePoint::new(vec![0.3, -0.2, 1.0], vec![0.0; 3]);
        let v = [0.1, 0.2, -0.3, 0.5, 0.0, 1.0];
        let w = [-0.7, 0.4, 0.2, 0.0, 0.3, -0.2];
        let exact = OneFormSection::new(ExactForm);
        let r = pullback_residuals(&sys, &exact, &point, &v, &w).unwrap();
        assert!(r.r_i < 1e-14 && r.r_ii < 1e-14);
        let linear = OneFormSection::new(ParticleLinearSection { c1: 2.0, c2: 3.0 });
        let r = pullback_residuals(&sys, &linear, &point, &v, &w).unwrap();
        assert!(r.r_i < 1e-14 && r.r_ii < 1e-14 && r.r_iii < 1e-15);
    }

    #[test]
    fn tautological_pullback() {
        let linear = OneFormSection::new(ParticleLinearSection { c1: 2.0, c2: 3.0 });
        assert!(tautological_residual(&linear, &[0.1, 0.5, 0.2], &[1.0, -2.0, 0.5]).unwrap() < 1e-15);
    }
}
