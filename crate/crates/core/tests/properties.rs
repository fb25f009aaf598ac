//! Invariants checked on random inputs.

use distham::calculus::{d_oneform, lie_bracket, GenericMap};
use distham::dynamics::nonholonomic_field;
use distham::examples::{self, DiskParams};
use distham::geometry::{embed, max_pairing, symplectic_orthogonal, ConstrainedChartPoint};
use distham::io::bundled;
use distham::linalg::Mat;
use distham::reduction::reduce;
use distham::scalar::dot;
use distham::Scalar;
use proptest::prelude::*;

/// `x ↦ A x + b` on ℝ³, plus a quadratic term so brackets are nontrivial.
#[derive(Clone, Debug)]
struct Field {
    a: Vec<f64>,
    b: Vec<f64>,
    c: f64,
}

impl GenericMap<f64> for Field {
    fn input_dim(&self) -> usize {
        3
    }
    fn output_dim(&self) -> usize {
        3
    }
    fn call<S: Scalar<Real = f64>>(&self, x: &[S]) -> Vec<S> {
        (0..3)
            .map(|i| {
                let mut v = S::c(self.b[i]);
                for j in 0..3 {
                    v = v + S::c(self.a[3 * i + j]) * x[j];
                }
                v + S::c(self.c) * x[(i + 1) % 3] * x[(i + 2) % 3]
            })
            .collect()
    }
}

/// Gradient of `f = Σ s_ij x_i x_j + Σ t_i x_i³ + x₀ sin(x₁)`.
#[derive(Clone, Debug)]
struct Gradient {
    s: Vec<f64>,
    t: Vec<f64>,
}

impl GenericMap<f64> for Gradient {
    fn input_dim(&self) -> usize {
        3
    }
    fn output_dim(&self) -> usize {
        3
    }
    fn call<S: Scalar<Real = f64>>(&self, x: &[S]) -> Vec<S> {
        let mut g: Vec<S> = (0..3)
            .map(|k| {
                let mut v = S::c(3.0 * self.t[k]) * x[k] * x[k];
                for j in 0..3 {
                    v = v + S::c(self.s[3 * k + j] + self.s[3 * j + k]) * x[j];
                }
                v
            })
            .collect();
        g[0] = g[0] + x[1].sin();
        g[1] = g[1] + x[0] * x[1].cos();
        g
    }
}

fn coeffs(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, len)
}

fn field() -> impl Strategy<Value = Field> {
    (coeffs(9), coeffs(3), -1.0..1.0f64).prop_map(|(a, b, c)| Field { a, b, c })
}

fn gradient() -> impl Strategy<Value = Gradient> {
    (coeffs(9), coeffs(3)).prop_map(|(s, t)| Gradient { s, t })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exterior_derivative_is_antisymmetric(g in field(), x in field(), y in field(), q in coeffs(3)) {
        let xy = d_oneform(&g, &q, &x, &y).unwrap();
        let yx = d_oneform(&g, &q, &y, &x).unwrap();
        prop_assert!((xy + yx).abs() <= 1e-10 * (1.0 + xy.abs()));
    }

    #[test]
    fn bracket_with_itself_vanishes(x in field(), q in coeffs(3)) {
        let b = lie_bracket(&x, &x, &q).unwrap();
        prop_assert!(b.iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn bracket_is_antisymmetric(x in field(), y in field(), q in coeffs(3)) {
        let xy = lie_bracket(&x, &y, &q).unwrap();
        let yx = lie_bracket(&y, &x, &q).unwrap();
        prop_assert!(xy.iter().zip(&yx).all(|(a, b)| (a + b).abs() <= 1e-10));
    }

    #[test]
    fn exact_forms_are_closed(f in gradient(), x in field(), y in field(), q in coeffs(3)) {
        let r = d_oneform(&f, &q, &x, &y).unwrap();
        prop_assert!(r.abs() <= 1e-9, "dγ = {r}");
    }

    #[test]
    fn symplectic_complement_pairs_to_zero(cols in 1usize..4, data in coeffs(24)) {
        let basis = Mat::from_vec(6, cols, data[..6 * cols].to_vec());
        if let Ok(orth) = symplectic_orthogonal(&basis) {
            prop_assert_eq!(orth.cols(), 6 - cols);
            prop_assert!(max_pairing(&basis, &orth) <= 1e-10);
        }
    }

    #[test]
    fn constrained_flow_conserves_energy(q in coeffs(4), u in coeffs(2), particle in any::<bool>()) {
        let sys = if particle { examples::particle::<f64>() } else { examples::disk::<f64>(DiskParams::default()) };
        let c = ConstrainedChartPoint::new(q[..sys.n()].to_vec(), u);
        let f = nonholonomic_field(&sys, &c).unwrap();
        let grad = sys.hamiltonian_gradient(&embed(&sys, &c).unwrap()).unwrap();
        let dh = dot(&grad, &f.ambient);
        prop_assert!(dh.abs() <= 1e-10, "dH(X) = {dh}");
    }

    #[test]
    fn reduced_hamiltonian_matches_on_fibers(q in coeffs(4), u in coeffs(2)) {
        let loaded = bundled::load("disk").unwrap();
        for name in ["disk-R2", "disk-SE2"] {
            let red = reduce(&loaded.system, loaded.chart(name).unwrap().clone()).unwrap();
            let c = ConstrainedChartPoint::new(q.clone(), u.clone());
            let h = loaded.system.hamiltonian(&embed(&loaded.system, &c).unwrap()).unwrap();
            let hbar = red.reduced_hamiltonian(&red.project_point(&c).unwrap()).unwrap();
            prop_assert!((h - hbar).abs() <= 1e-12 * (1.0 + h.abs()));
        }
    }
}
