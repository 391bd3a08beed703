//! Small dense helpers and a Jacobi-preconditioned conjugate gradient.
//!
//! Reductions run sequentially in index order so results are bit-reproducible
//! regardless of the worker count.

use crate::error::{Result, SepError};
use crate::scalar::Scalar;

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        s += *x * *y;
    }
    s
}

#[inline]
pub fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn norm_inf<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

pub fn mean<T: Scalar>(a: &[T]) -> T {
    if a.is_empty() {
        return T::zero();
    }
    a.iter().copied().sum::<T>() / T::from_usize_lossy(a.len())
}

/// A symmetric linear operator acting on vectors of length [`dim`](Self::dim).
pub trait LinearOperator<T: Scalar> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]);
    fn diagonal(&self) -> Vec<T>;
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    /// Target for `‖b − Ax‖₂ / ‖b‖₂`.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Keep iterates orthogonal to constants (singular Laplacian systems).
    pub project_constants: bool,
}

impl CgOptions {
    pub fn new(rel_tol: f64, dim: usize) -> Self {
        CgOptions {
            rel_tol,
            max_iter: default_iteration_cap(dim),
            project_constants: false,
        }
    }
}

/// `max(2N, 20·√N, 200)`. Rescaled generators have condition numbers of
/// order `ε^{-2}`, so caps sublinear in `N` are too tight for them.
pub fn default_iteration_cap(dim: usize) -> usize {
    ((20.0 * (dim as f64).sqrt()).ceil() as usize).max(2 * dim).max(200)
}

#[derive(Debug, Clone)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub history: Vec<f64>,
}

fn remove_mean<T: Scalar>(v: &mut [T]) {
    let m = mean(v);
    for x in v.iter_mut() {
        *x -= m;
    }
}

/// Solves `A x = b` for symmetric positive (semi)definite `A`, starting from
/// the content of `x`.
pub fn conjugate_gradient<T: Scalar, A: LinearOperator<T> + ?Sized>(
    op: &A,
    b: &[T],
    x: &mut [T],
    opts: &CgOptions,
) -> Result<CgReport> {
    let n = op.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);

    let inv_diag: Vec<T> = op
        .diagonal()
        .into_iter()
        .map(|d| if d > T::zero() { T::one() / d } else { T::one() })
        .collect();

    let b_norm = norm2(b);
    let mut history = Vec::new();
    if b_norm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(CgReport {
            iterations: 0,
            relative_residual: 0.0,
            history,
        });
    }

    let mut r = vec![T::zero(); n];
    let mut ap = vec![T::zero(); n];
    op.apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    if opts.project_constants {
        remove_mean(&mut r);
    }
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(a, d)| *a * *d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let tol = T::lit(opts.rel_tol);

    let mut rel = (norm2(&r) / b_norm).as_f64();
    history.push(rel);
    let mut it = 0;
    while rel > opts.rel_tol {
        if it >= opts.max_iter {
            return Err(SepError::NoConvergence {
                iterations: it,
                residual: rel,
                history,
            });
        }
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= T::zero() {
            // Breakdown only happens once the residual is at roundoff level.
            if norm2(&r) / b_norm <= tol.max(T::epsilon() * T::lit(100.0)) {
                break;
            }
            return Err(SepError::NoConvergence {
                iterations: it,
                residual: rel,
                history,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if opts.project_constants {
            remove_mean(&mut r);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
        rel = (norm2(&r) / b_norm).as_f64();
        history.push(rel);
    }

    if opts.project_constants {
        remove_mean(x);
    }
    // Report the true residual rather than the recursively updated one.
    op.apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    let true_rel = (norm2(&r) / b_norm).as_f64();
    Ok(CgReport {
        iterations: it,
        relative_residual: true_rel,
        history,
    })
}

/// Solves a tridiagonal system with the Thomas algorithm. `lower[0]` and
/// `upper[n-1]` are ignored.
pub fn solve_tridiagonal<T: Scalar>(
    lower: &[T],
    diag: &[T],
    upper: &[T],
    rhs: &[T],
) -> Result<Vec<T>> {
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut denom = diag[0];
    if denom == T::zero() {
        return Err(SepError::Numerical("singular tridiagonal system".into()));
    }
    c[0] = if n > 1 { upper[0] / denom } else { T::zero() };
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == T::zero() {
            return Err(SepError::Numerical("singular tridiagonal system".into()));
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { T::zero() };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n.saturating_sub(1)).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    Ok(x)
}

/// Row-major dense square matrix of small size.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallMatrix<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> SmallMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        SmallMatrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_columns(cols: &[Vec<T>]) -> Self {
        let n = cols.len();
        let mut m = Self::zeros(n);
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), n, "basis must be square");
            for i in 0..n {
                m[(i, j)] = c[i];
            }
        }
        m
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn scaled(&self, s: T) -> Self {
        SmallMatrix {
            n: self.n,
            data: self.data.iter().map(|x| *x * s).collect(),
        }
    }

    pub fn quadratic_form(&self, v: &[T]) -> T {
        dot(v, &self.mul_vec(v))
    }

    /// Determinant and inverse by Gauss–Jordan elimination with partial
    /// pivoting. `None` when the matrix is numerically singular.
    pub fn inverse_with_det(&self) -> Option<(Self, T)> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let mut det = T::one();
        let scale = self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        if scale == T::zero() {
            return None;
        }
        for col in 0..n {
            let (piv, pmax) = (col..n)
                .map(|r| (r, a[(r, col)].abs()))
                .fold((col, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= scale * T::epsilon() * T::lit(16.0) {
                return None;
            }
            if piv != col {
                for k in 0..n {
                    a.data.swap(piv * n + k, col * n + k);
                    inv.data.swap(piv * n + k, col * n + k);
                }
                det = -det;
            }
            let p = a[(col, col)];
            det *= p;
            for k in 0..n {
                a[(col, k)] /= p;
                inv[(col, k)] /= p;
            }
            for r in 0..n {
                if r != col {
                    let f = a[(r, col)];
                    if f != T::zero() {
                        for k in 0..n {
                            let (ack, ick) = (a[(col, k)], inv[(col, k)]);
                            a[(r, k)] -= f * ack;
                            inv[(r, k)] -= f * ick;
                        }
                    }
                }
            }
        }
        Some((inv, det))
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    /// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
    /// Eigenvalues are sorted nonincreasing; eigenvectors are the returned
    /// columns.
    pub fn symmetric_eigen(&self) -> (Vec<T>, Vec<Vec<T>>) {
        let n = self.n;
        let mut a = self.clone();
        let mut v = Self::identity(n);
        for _sweep in 0..100 {
            let off: T = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum();
            let total: T = a.data.iter().map(|x| *x * *x).sum();
            if off <= total * T::epsilon() * T::epsilon() || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[(k, p)], a[(k, q)]);
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let vectors = order.iter().map(|&i| v.column(i)).collect();
        (values, vectors)
    }
}

impl<T> std::ops::Index<(usize, usize)> for SmallMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for SmallMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense(SmallMatrix<f64>);

    impl LinearOperator<f64> for Dense {
        fn dim(&self) -> usize {
            self.0.n
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            y.copy_from_slice(&self.0.mul_vec(x));
        }
        fn diagonal(&self) -> Vec<f64> {
            (0..self.0.n).map(|i| self.0[(i, i)]).collect()
        }
    }

    #[test]
    fn cg_solves_small_spd() {
        let m = SmallMatrix::<f64> {
            n: 3,
            data: vec![21.0, -1.0, -5.0, -1.0, 11.0, -4.0, -5.0, -4.0, 26.0],
        };
        let x0 = [1.0, 3.0, 2.0];
        let b = m.mul_vec(&x0);
        let mut x = vec![0.0; 3];
        let rep = conjugate_gradient(&Dense(m), &b, &mut x, &CgOptions::new(1e-14, 3)).unwrap();
        assert!(rep.iterations <= 4);
        for (a, e) in x.iter().zip(x0) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_reports_non_convergence() {
        let m = SmallMatrix {
            n: 2,
            data: vec![1.0, 0.0, 0.0, 1e6],
        };
        let mut opts = CgOptions::new(1e-14, 2);
        opts.max_iter = 0;
        let mut x = vec![0.0; 2];
        let err = conjugate_gradient(&Dense(m), &[1.0, 1.0], &mut x, &opts).unwrap_err();
        assert!(matches!(err, SepError::NoConvergence { .. }));
    }

    #[test]
    fn inverse_and_determinant() {
        let m = SmallMatrix {
            n: 2,
            data: vec![3.0f64.sqrt(), 3.0f64.sqrt() / 2.0, 0.0, 1.5],
        };
        let (inv, det) = m.inverse_with_det().unwrap();
        assert!((det - 1.5 * 3.0f64.sqrt()).abs() < 1e-14);
        let v = inv.mul_vec(&m.mul_vec(&[0.3, -2.0]));
        assert!((v[0] - 0.3).abs() < 1e-14 && (v[1] + 2.0).abs() < 1e-14);
        assert!(SmallMatrix::<f64>::zeros(2).inverse_with_det().is_none());
    }

    #[test]
    fn jacobi_eigen_sorted_and_orthonormal() {
        let m = SmallMatrix::<f64> {
            n: 3,
            data: vec![2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.5],
        };
        let (vals, vecs) = m.symmetric_eigen();
        assert!((vals[0] - 3.0).abs() < 1e-13);
        assert!((vals[1] - 1.0).abs() < 1e-13);
        assert!((vals[2] - 0.5).abs() < 1e-13);
        for i in 0..3 {
            for j in 0..3 {
                let d = dot(&vecs[i], &vecs[j]);
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
            let mv = m.mul_vec(&vecs[i]);
            for k in 0..3 {
                assert!((mv[k] - vals[i] * vecs[i][k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn thomas_matches_direct() {
        let x = solve_tridiagonal::<f64>(&[0.0, -1.0, -1.0], &[2.0, 2.0, 2.0], &[-1.0, -1.0, 0.0], &[1.0, 0.0, 1.0])
            .unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14 && (x[2] - 1.0).abs() < 1e-14);
    }
}
