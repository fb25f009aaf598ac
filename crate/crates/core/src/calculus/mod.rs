//! Forward-mode differentiation and the exterior/Lie calculus built on it.

mod dual;
mod jet;

pub use dual::{Dual, MAX_SEEDS};
pub use jet::{Jet, MAX_DIRECTIONS};

use crate::error::{Error, Result};
use crate::linalg::{rank, Mat};
use crate::scalar::{dot, lift, values, Real, Scalar};

/// A smooth map `ℝ^input_dim → ℝ^output_dim` evaluable over every engine scalar.
///
/// Implemented automatically for every [`GenericMap`]; use that trait to
/// define new maps.
pub trait SmoothMap<T: Real>: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval(&self, x: &[T]) -> Vec<T>;
    fn eval_dual(&self, x: &[Dual<T>]) -> Vec<Dual<T>>;
    fn eval_jet(&self, x: &[Jet<T>]) -> Vec<Jet<T>>;
}

/// A map written once, generically over the scalar type.
pub trait GenericMap<T: Real>: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn call<S: Scalar<Real = T>>(&self, x: &[S]) -> Vec<S>;
}

impl<T: Real, G: GenericMap<T>> SmoothMap<T> for G {
    fn input_dim(&self) -> usize {
        GenericMap::input_dim(self)
    }
    fn output_dim(&self) -> usize {
        GenericMap::output_dim(self)
    }
    fn eval(&self, x: &[T]) -> Vec<T> {
        self.call(x)
    }
    fn eval_dual(&self, x: &[Dual<T>]) -> Vec<Dual<T>> {
        self.call(x)
    }
    fn eval_jet(&self, x: &[Jet<T>]) -> Vec<Jet<T>> {
        self.call(x)
    }
}

/// Evaluates `map` at `x` after checking the input dimension.
pub fn apply<S: Scalar>(map: &dyn SmoothMap<S::Real>, x: &[S]) -> Result<Vec<S>> {
    check_dim("map input", map.input_dim(), x.len())?;
    let out = S::eval_map(map, x);
    check_dim("map output", map.output_dim(), out.len())?;
    Ok(out)
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

/// Constant vector field, handy for pairing forms with fixed tangent vectors.
#[derive(Clone, Debug)]
pub struct ConstantField<T: Real> {
    pub value: Vec<T>,
}

impl<T: Real> GenericMap<T> for ConstantField<T> {
    fn input_dim(&self) -> usize {
        self.value.len()
    }
    fn output_dim(&self) -> usize {
        self.value.len()
    }
    fn call<S: Scalar<Real = T>>(&self, _x: &[S]) -> Vec<S> {
        lift(&self.value)
    }
}

/// Jacobian of an arbitrary dual-evaluable closure, seeding in chunks of [`MAX_SEEDS`].
pub fn jacobian_with<T, F>(x: &[T], output_dim: usize, f: F) -> Result<Mat<T>>
where
    T: Real,
    F: Fn(&[Dual<T>]) -> Result<Vec<Dual<T>>>,
{
    let n = x.len();
    let mut jac = Mat::zeros(output_dim, n);
    let mut start = 0;
    while start < n || (n == 0 && start == 0) {
        let width = (n - start).min(MAX_SEEDS);
        let xd: Vec<Dual<T>> = x
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                if j >= start && j < start + width {
                    Dual::variable(v, j - start, width)
                } else {
                    Dual::constant(v)
                }
            })
            .collect();
        let y = f(&xd)?;
        check_dim("jacobian output", output_dim, y.len())?;
        for (i, yi) in y.iter().enumerate() {
            if !yi.is_finite() {
                return Err(Error::NonFinite("jacobian evaluation".into()));
            }
            for s in 0..width {
                jac[(i, start + s)] = yi.partial(s);
            }
        }
        if n == 0 {
            break;
        }
        start += width;
    }
    Ok(jac)
}

/// Value and directional derivative `Df(x)·v` of a dual-evaluable closure.
pub fn directional_with<T, F>(x: &[T], v: &[T], f: F) -> Result<(Vec<T>, Vec<T>)>
where
    T: Real,
    F: Fn(&[Dual<T>]) -> Result<Vec<Dual<T>>>,
{
    check_dim("direction", x.len(), v.len())?;
    let xd: Vec<Dual<T>> = x
        .iter()
        .zip(v)
        .map(|(&xi, &vi)| Dual::with_tangent(xi, &[vi]))
        .collect();
    let y = f(&xd)?;
    if y.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("directional derivative".into()));
    }
    Ok((y.iter().map(Dual::real).collect(), y.iter().map(|d| d.partial(0)).collect()))
}

/// Jacobian `∂f_i/∂x_j` at `x`.
pub fn jacobian<T: Real>(f: &dyn SmoothMap<T>, x: &[T]) -> Result<Mat<T>> {
    check_dim("jacobian input", f.input_dim(), x.len())?;
    jacobian_with(x, f.output_dim(), |xd| Ok(f.eval_dual(xd)))
}

/// Lie bracket `[X,Y](q) = DY·X − DX·Y`, so that `[X,Y]f = X(Yf) − Y(Xf)`.
pub fn lie_bracket<T: Real>(x: &dyn SmoothMap<T>, y: &dyn SmoothMap<T>, q: &[T]) -> Result<Vec<T>> {
    let n = q.len();
    for f in [x, y] {
        check_dim("vector field input", n, f.input_dim())?;
        check_dim("vector field output", n, f.output_dim())?;
    }
    let xv = apply(x, q)?;
    let yv = apply(y, q)?;
    let (_, dy_x) = directional_with(q, &xv, |qd| Ok(y.eval_dual(qd)))?;
    let (_, dx_y) = directional_with(q, &yv, |qd| Ok(x.eval_dual(qd)))?;
    Ok(dy_x.iter().zip(&dx_y).map(|(&a, &b)| a - b).collect())
}

/// Exterior derivative of a one-form, `dγ(X,Y) = X(γ(Y)) − Y(γ(X)) − γ([X,Y])`.
///
/// `gamma` returns covector coefficients; `x`, `y` are vector fields on the
/// same chart. Every derivative comes from forward-mode AD.
pub fn d_oneform<T: Real>(
    gamma: &dyn SmoothMap<T>,
    q: &[T],
    x: &dyn SmoothMap<T>,
    y: &dyn SmoothMap<T>,
) -> Result<T> {
    let n = q.len();
    check_dim("one-form input", n, gamma.input_dim())?;
    check_dim("one-form output", n, gamma.output_dim())?;
    let xv = apply(x, q)?;
    let yv = apply(y, q)?;
    let pairing = |field: &dyn SmoothMap<T>, along: &[T]| {
        directional_with(q, along, |qd| Ok(vec![dot(&gamma.eval_dual(qd), &field.eval_dual(qd))]))
    };
    let (_, x_of_gy) = pairing(y, &xv)?;
    let (_, y_of_gx) = pairing(x, &yv)?;
    let bracket = lie_bracket(x, y, q)?;
    let g = apply(gamma, q)?;
    Ok(x_of_gy[0] - y_of_gx[0] - dot(&g, &bracket))
}

/// Result of a bracket-generating audit at one point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct BracketReport {
    pub generating: bool,
    pub achieved_rank: usize,
    /// Deepest bracket level actually evaluated.
    pub depth_reached: usize,
}

#[derive(Clone, Debug)]
enum BracketTree {
    Leaf(usize),
    Node(Box<BracketTree>, Box<BracketTree>),
}

impl BracketTree {
    fn depth(&self) -> usize {
        match self {
            BracketTree::Leaf(_) => 0,
            BracketTree::Node(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

fn eval_tree<T: Real>(
    fields: &[&dyn SmoothMap<T>],
    tree: &BracketTree,
    x: &[Jet<T>],
    next: usize,
) -> Vec<Jet<T>> {
    match tree {
        BracketTree::Leaf(i) => fields[*i].eval_jet(x),
        BracketTree::Node(a, b) => {
            // DB·A − DA·B, each directional derivative taken along a fresh direction
            let dir_deriv = |along: &BracketTree, of: &BracketTree| {
                let v = eval_tree(fields, along, x, next);
                let shifted: Vec<Jet<T>> = x
                    .iter()
                    .zip(&v)
                    .map(|(&xi, vi)| xi + vi.times_direction(next))
                    .collect();
                eval_tree(fields, of, &shifted, next + 1)
                    .iter()
                    .map(|w| w.derivative(next))
                    .collect::<Vec<_>>()
            };
            let db_a = dir_deriv(a, b);
            let da_b = dir_deriv(b, a);
            db_a.iter().zip(&da_b).map(|(&p, &q)| p - q).collect()
        }
    }
}

/// Checks whether `fields` together with their iterated Lie brackets span `ℝⁿ` at `q`.
///
/// Level 0 holds the fields themselves; level `d ≥ 1` holds `[f_i, g]` for
/// `g` in level `d − 1` (pairs `i < j` at level 1). `max_depth` counts
/// bracket levels and is capped at [`MAX_DIRECTIONS`]. Rank counts singular
/// values above `tol`.
pub fn bracket_generating<T: Real>(
    fields: &[&dyn SmoothMap<T>],
    q: &[T],
    max_depth: usize,
    tol: T,
) -> Result<BracketReport> {
    let n = q.len();
    for f in fields {
        check_dim("vector field input", n, f.input_dim())?;
        check_dim("vector field output", n, f.output_dim())?;
    }
    let point: Vec<Jet<T>> = lift(q);
    let eval = |tree: &BracketTree| values(&eval_tree(fields, tree, &point, 0));

    let mut columns: Vec<Vec<T>> = Vec::new();
    let mut level: Vec<BracketTree> = (0..fields.len()).map(BracketTree::Leaf).collect();
    columns.extend(level.iter().map(eval));
    let rank_of = |cols: &[Vec<T>]| {
        if cols.is_empty() {
            0
        } else {
            rank(&Mat::from_columns(cols), tol)
        }
    };
    let mut achieved = rank_of(&columns);
    let mut depth_reached = 0;
    let max_depth = max_depth.min(MAX_DIRECTIONS);

    for depth in 1..=max_depth {
        if achieved >= n {
            break;
        }
        let mut next_level = Vec::new();
        for i in 0..fields.len() {
            for (j, g) in level.iter().enumerate() {
                if depth == 1 && j <= i {
                    continue;
                }
                next_level.push(BracketTree::Node(Box::new(BracketTree::Leaf(i)), Box::new(g.clone())));
            }
        }
        if next_level.is_empty() {
            break;
        }
        debug_assert!(next_level.iter().all(|t| t.depth() == depth));
        for tree in &next_level {
            let v = eval(tree);
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("bracket evaluation".into()));
            }
            columns.push(v);
        }
        achieved = rank_of(&columns);
        depth_reached = depth;
        level = next_level;
    }
    Ok(BracketReport {
        generating: achieved >= n,
        achieved_rank: achieved,
        depth_reached,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// (x·y, x²)
    struct Poly;
    impl GenericMap<f64> for Poly {
        fn input_dim(&self) -> usize {
            2
        }
        fn output_dim(&self) -> usize {
            2
        }
        fn call<S: Scalar<Real = f64>>(&self, x: &[S]) -> Vec<S> {
            vec![x[0] * x[1], x[0] * x[0]]
        }
    }

    struct Identity(usize);
    impl GenericMap<f64> for Identity {
        fn input_dim(&self) -> usize {
            self.0
        }
        fn output_dim(&self) -> usize {
            self.0
        }
        fn call<S: Scalar<Real = f64>>(&self, x: &[S]) -> Vec<S> {
            x.to_vec()
        }
    }

    /// ∂x + y∂z on ℝ³
    struct Alpha;
    impl GenericMap<f64> for Alpha {
        fn input_dim(&self) -> usize {
            3
        }
        fn output_dim(&self) -> usize {
            3
        }
        fn call<S: Scalar<Real = f64>>(&self, x: &[S]) -> Vec<S> {
            vec![S::one(), S::zero(), x[1]]
        }
    }

    /// (2, 3, 2y): the covector used with the constrained particle
    struct GammaLinear;
    impl GenericMap<f64> for GammaLinear {
        fn input_dim(&self) -> usize {
            3
        }
        fn output_dim(&self) -> usize {
            3
        }
        fn call<S: Scalar<Real = f64>>(&self, x: &[S]) -> Vec<S> {
            vec![S::c(2.0), S::c(3.0), S::c(2.0) * x[1]]
        }
    }

    fn unit(n: usize, i: usize) -> ConstantField<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        ConstantField { value: v }
    }

    #[test]
    fn jacobian_of_identity_and_polynomial() {
        let j = jacobian(&Identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(j, Mat::identity(3));
        let j = jacobian(&Poly, &[2.0, 3.0]).unwrap();
        assert_eq!(j, Mat::from_rows(&[vec![3.0, 2.0], vec![4.0, 0.0]]));
    }

    #[test]
    fn jacobian_rejects_wrong_dimension() {
        assert!(matches!(
            jacobian(&Poly, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn jacobian_chunks_beyond_seed_capacity() {
        let n = MAX_SEEDS + 3;
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let j = jacobian(&Identity(n), &x).unwrap();
        assert_eq!(j, Mat::identity(n));
    }

    #[test]
    fn coordinate_fields_commute() {
        let b = lie_bracket(&unit(2, 0), &unit(2, 1), &[0.3, -1.0]).unwrap();
        assert_eq!(b, vec![0.0, 0.0]);
    }

    #[test]
    fn particle_bracket_sign() {
        let b = lie_bracket(&Alpha, &unit(3, 1), &[0.4, 1.7, -2.0]).unwrap();
        assert_eq!(b, vec![0.0, 0.0, -1.0]);
    }

    #[test]
    fn d_oneform_matches_intrinsic_expansion_for_particle_covector() {
        // γ = 2dx + 3dy + 2y dz has dγ = 2 dy∧dz, so dγ(∂x + y∂z, ∂y) = −2y
        for y in [-1.5, 0.0, 1.0, 2.0] {
            let v = d_oneform(&GammaLinear, &[0.1, y, 0.3], &Alpha, &unit(3, 1)).unwrap();
            assert!((v + 2.0 * y).abs() < 1e-14, "y = {y}: {v}");
        }
    }

    #[test]
    fn single_constant_field_is_not_generating() {
        let f = unit(2, 0);
        let r = bracket_generating(&[&f], &[0.0, 0.0], 5, 1e-10).unwrap();
        assert_eq!((r.generating, r.achieved_rank), (false, 1));
    }
}
