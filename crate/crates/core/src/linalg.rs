//! Small dense linear algebra, generic over the engine scalar so that
//! factorizations and solves propagate derivatives.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Mat<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    /// Builds a `rows × cols` matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Mat {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_columns(cols: &[Vec<S>]) -> Self {
        let rows = cols.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), rows, "ragged columns");
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn diagonal(d: &[S]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<S>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..rhs.cols {
                    out[(i, j)] = out[(i, j)] + a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len(), "matvec shape");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(S::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// `selfᵀ · v`.
    pub fn tr_matvec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.rows, v.len(), "tr_matvec shape");
        let mut out = vec![S::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * vi;
            }
        }
        out
    }

    pub fn map<R: Scalar>(&self, f: impl Fn(S) -> R) -> Mat<R> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.shape(), rhs.shape(), "add shape");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.shape(), rhs.shape(), "sub shape");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    /// Horizontal concatenation `[self | rhs]`.
    pub fn hstack(&self, rhs: &Self) -> Self {
        assert_eq!(self.rows, rhs.rows, "hstack rows");
        let mut cols = self.columns();
        cols.extend(rhs.columns());
        if cols.is_empty() {
            return Self::zeros(self.rows, 0);
        }
        Self::from_columns(&cols)
    }

    /// Primal parts.
    pub fn values(&self) -> Mat<S::Real> {
        self.map(|x| x.value())
    }

    /// Block selection `[r0, r0+nr) × [c0, c0+nc)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        let mut out = Self::zeros(nr, nc);
        for i in 0..nr {
            for j in 0..nc {
                out[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        out
    }

    /// Canonical symplectic matrix `[[0, I], [−I, 0]]` of size `2n`.
    pub fn symplectic(n: usize) -> Self {
        let mut j = Self::zeros(2 * n, 2 * n);
        for i in 0..n {
            j[(i, n + i)] = S::one();
            j[(n + i, i)] = -S::one();
        }
        j
    }
}

impl<S: Real> Mat<S> {
    pub fn frobenius(&self) -> S {
        self.data.iter().map(|&x| x * x).sum::<S>().sqrt()
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::ZERO, |m, &x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl<S> Index<(usize, usize)> for Mat<S> {
    type Output = S;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Mat<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<S: fmt::Debug> fmt::Debug for Mat<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

/// LU factorization with partial pivoting on the primal values.
#[derive(Clone, Debug)]
pub struct Lu<S> {
    lu: Mat<S>,
    perm: Vec<usize>,
    sign: i32,
}

impl<S: Scalar> Lu<S> {
    pub fn new(a: &Mat<S>) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::DimensionMismatch {
                context: "LU of non-square matrix",
                expected: n,
                found: a.cols(),
            });
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1;
        let scale = a.as_slice().iter().fold(S::Real::ZERO, |m, x| m.max(x.value().abs()));
        let tiny = scale * S::Real::epsilon() * S::Real::from_f64(n.max(1) as f64);
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].value().abs();
            for i in k + 1..n {
                let v = lu[(i, k)].value().abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) {
                return Err(Error::Singular {
                    condition: f64::INFINITY,
                });
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    lu[(i, j)] = lu[(i, j)] - f * lu[(k, j)];
                }
            }
        }
        Ok(Lu { lu, perm, sign })
    }

    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n, "LU solve rhs");
        let mut x: Vec<S> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] = x[i] - self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] = x[i] - self.lu[(i, j)] * x[j];
            }
            x[i] = x[i] / self.lu[(i, i)];
        }
        x
    }

    /// Solves for every column of `b`.
    pub fn solve_mat(&self, b: &Mat<S>) -> Mat<S> {
        let cols: Vec<Vec<S>> = b.columns().iter().map(|c| self.solve(c)).collect();
        if cols.is_empty() {
            return Mat::zeros(b.rows(), 0);
        }
        Mat::from_columns(&cols)
    }

    pub fn det(&self) -> S {
        let n = self.lu.rows();
        let mut d = if self.sign > 0 { S::one() } else { -S::one() };
        for i in 0..n {
            d = d * self.lu[(i, i)];
        }
        d
    }

    pub fn inverse(&self) -> Mat<S> {
        self.solve_mat(&Mat::identity(self.lu.rows()))
    }
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn solve<S: Scalar>(a: &Mat<S>, b: &[S]) -> Result<Vec<S>> {
    Ok(Lu::new(a)?.solve(b))
}

/// Determinant, zero for numerically singular input.
pub fn det<S: Scalar>(a: &Mat<S>) -> S {
    match Lu::new(a) {
        Ok(lu) => lu.det(),
        Err(_) => S::zero(),
    }
}

/// Cholesky factor `L` with `a = L Lᵀ`.
pub fn cholesky<S: Scalar>(a: &Mat<S>) -> Result<Mat<S>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            context: "Cholesky of non-square matrix",
            expected: n,
            found: a.cols(),
        });
    }
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if !(d.value() > S::Real::ZERO) || !d.value().is_finite() {
            return Err(Error::NotPositiveDefinite(format!(
                "pivot {j} is {}",
                d.value()
            )));
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn cholesky_solve<S: Scalar>(a: &Mat<S>, b: &[S]) -> Result<Vec<S>> {
    let l = cholesky(a)?;
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] = y[i] - l[(i, k)] * y[k];
        }
        y[i] = y[i] / l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] = y[i] - l[(k, i)] * y[k];
        }
        y[i] = y[i] / l[(i, i)];
    }
    Ok(y)
}

/// Thin singular value decomposition `a = U Σ Vᵀ`; singular values sorted descending.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    pub singular_values: Vec<T>,
    /// Right singular vectors as columns, in the order of `singular_values`.
    pub v: Mat<T>,
}

/// One-sided Jacobi SVD. Works for any shape; yields `cols` singular values.
pub fn svd<T: Real>(a: &Mat<T>) -> Svd<T> {
    let (m, n) = a.shape();
    let mut u = a.clone();
    let mut v = Mat::identity(n);
    let eps = T::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (T::ZERO, T::ZERO, T::ZERO);
                for i in 0..m {
                    let (x, y) = (u[(i, p)], u[(i, q)]);
                    alpha = alpha + x * x;
                    beta = beta + y * y;
                    gamma = gamma + x * y;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == T::ZERO {
                    continue;
                }
                rotated = true;
                let two = T::from_f64(2.0);
                let zeta = (beta - alpha) / (two * gamma);
                let sign = if zeta >= T::ZERO { T::ONE } else { -T::ONE };
                let t = sign / (zeta.abs() + (T::ONE + zeta * zeta).sqrt());
                let c = T::ONE / (T::ONE + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (u[(i, p)], u[(i, q)]);
                    u[(i, p)] = c * x - s * y;
                    u[(i, q)] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<T> = (0..n)
        .map(|j| (0..m).map(|i| u[(i, j)] * u[(i, j)]).sum::<T>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap_or(std::cmp::Ordering::Equal));
    let singular_values = order.iter().map(|&j| norms[j]).collect();
    let cols: Vec<Vec<T>> = order.iter().map(|&j| v.column(j)).collect();
    let v = if cols.is_empty() {
        Mat::zeros(0, 0)
    } else {
        Mat::from_columns(&cols)
    };
    Svd { singular_values, v }
}

pub fn singular_values<T: Real>(a: &Mat<T>) -> Vec<T> {
    // the number of nonzero singular values never exceeds min(rows, cols)
    let mut s = if a.rows() < a.cols() {
        svd(&a.transpose()).singular_values
    } else {
        svd(a).singular_values
    };
    s.truncate(a.rows().min(a.cols()));
    s
}

/// Number of singular values above the absolute threshold `tol`.
pub fn rank<T: Real>(a: &Mat<T>, tol: T) -> usize {
    singular_values(a).iter().filter(|&&s| s > tol).count()
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn relative_rank<T: Real>(a: &Mat<T>, rel_tol: T) -> usize {
    let s = singular_values(a);
    let top = s.first().copied().unwrap_or(T::ZERO);
    if top == T::ZERO {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * top).count()
}

/// 2-norm condition number `σ_max / σ_min` of a square matrix.
pub fn condition_number<T: Real>(a: &Mat<T>) -> T {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > T::ZERO => hi / lo,
        (Some(_), Some(_)) => T::from_f64(f64::INFINITY),
        _ => T::ONE,
    }
}

/// Orthonormal basis of the right null space: singular directions with
/// `σ ≤ rel_tol · σ_max`, plus every direction beyond the row count.
pub fn nullspace<T: Real>(a: &Mat<T>, rel_tol: T) -> Mat<T> {
    let n = a.cols();
    let d = svd(a);
    let top = d.singular_values.first().copied().unwrap_or(T::ZERO);
    let cols: Vec<Vec<T>> = (0..n)
        .filter(|&j| j >= a.rows() || d.singular_values[j] <= rel_tol * top)
        .map(|j| d.v.column(j))
        .collect();
    if cols.is_empty() {
        Mat::zeros(n, 0)
    } else {
        Mat::from_columns(&cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::Dual;

    fn sample() -> Mat<f64> {
        Mat::from_rows(&[
            vec![4.0, 1.0, 2.0],
            vec![1.0, 5.0, 0.5],
            vec![2.0, 0.5, 6.0],
        ])
    }

    #[test]
    fn lu_solves_and_inverts() {
        let a = sample();
        let x = solve(&a, &[1.0, 2.0, 3.0]).unwrap();
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-14);
        }
        let inv = Lu::new(&a).unwrap().inverse();
        let id = a.matmul(&inv);
        assert!(id.sub(&Mat::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn lu_pivots_zero_leading_entry() {
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(solve(&a, &[2.0, 3.0]).unwrap(), vec![3.0, 2.0]);
        assert_eq!(det(&a), -1.0);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(solve(&a, &[1.0, 1.0]), Err(Error::Singular { .. })));
    }

    #[test]
    fn cholesky_matches_lu_and_rejects_indefinite() {
        let a = sample();
        let b = [0.5, -1.0, 2.0];
        let x1 = cholesky_solve(&a, &b).unwrap();
        let x2 = solve(&a, &b).unwrap();
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-14);
        }
        let bad = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(cholesky(&bad), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn solve_propagates_derivatives() {
        // x(t) solves [[2, t], [0, 1]] x = (1, 1); x0 = (1 − t)/2, dx0/dt = −1/2
        let t = Dual::variable(0.3, 0, 1);
        let one = Dual::constant(1.0);
        let a = Mat::from_rows(&[vec![Dual::constant(2.0), t], vec![Dual::constant(0.0), one]]);
        let x = solve(&a, &[one, one]).unwrap();
        assert!((x[0].real() - 0.35).abs() < 1e-15);
        assert!((x[0].partial(0) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn svd_of_diagonal_and_rank() {
        let a = Mat::from_rows(&[vec![3.0, 0.0], vec![0.0, -4.0], vec![0.0, 0.0]]);
        let s = singular_values(&a);
        assert!((s[0] - 4.0).abs() < 1e-14 && (s[1] - 3.0).abs() < 1e-14);
        let wide = Mat::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]);
        assert_eq!(rank(&wide, 1e-10), 1);
        assert_eq!(singular_values(&wide).len(), 2);
    }

    #[test]
    fn nullspace_is_orthogonal_complement_of_rows() {
        let a = Mat::from_rows(&[vec![1.0, 0.0, -1.0, 2.0], vec![0.0, 1.0, 1.0, 0.0]]);
        let n = nullspace(&a, 1e-12);
        assert_eq!(n.shape(), (4, 2));
        assert!(a.matmul(&n).max_abs() < 1e-14);
        let gram = n.transpose().matmul(&n);
        assert!(gram.sub(&Mat::identity(2)).max_abs() < 1e-14);
    }

    #[test]
    fn condition_number_of_scaled_identity() {
        let a = Mat::diagonal(&[2.0, 2.0, 2.0]);
        assert!((condition_number(&a) - 1.0).abs() < 1e-15);
        assert!(condition_number(&Mat::diagonal(&[1.0f64, 0.0])).is_infinite());
    }
}
