//! Small dense linear algebra over a generic [`Real`] scalar.
//!
//! Sizes in this crate are modest (K up to a few dozen), so a row-major
//! `Vec<T>` with straightforward loops is all that is needed.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[T]) {
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                let other_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(other_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `out += scale * self * v`
    pub fn matvec_acc(&self, v: &[T], scale: T, out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate().take(self.rows) {
            *o += scale * dot(self.row(i), v);
        }
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * c).collect() }
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: T, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(T::one(), other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-T::one(), other);
        out
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm2<T: Real>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

/// Solves `a * x = b` for a square `a` by LU with partial pivoting.
pub fn solve<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.rows();
    if !a.is_square() || b.rows() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.rows() });
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    let m = b.cols();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| lu[(i, col)].abs().partial_cmp(&lu[(j, col)].abs()).unwrap())
            .unwrap();
        if lu[(pivot, col)] == T::zero() {
            return Err(Error::InvalidArgument("singular matrix in linear solve".into()));
        }
        if pivot != col {
            for j in 0..n {
                lu.data.swap(pivot * n + j, col * n + j);
            }
            for j in 0..m {
                x.data.swap(pivot * m + j, col * m + j);
            }
        }
        let diag = lu[(col, col)];
        for i in col + 1..n {
            let factor = lu[(i, col)] / diag;
            if factor == T::zero() {
                continue;
            }
            for j in col..n {
                let v = lu[(col, j)];
                lu[(i, j)] -= factor * v;
            }
            for j in 0..m {
                let v = x[(col, j)];
                x[(i, j)] -= factor * v;
            }
        }
    }
    for col in (0..n).rev() {
        let diag = lu[(col, col)];
        for j in 0..m {
            let mut s = x[(col, j)];
            for k in col + 1..n {
                s -= lu[(col, k)] * x[(k, j)];
            }
            x[(col, j)] = s / diag;
        }
    }
    Ok(x)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with the degree-13 Padé approximant.
pub fn expm<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.rows();
    let norm = a.norm1().as_f64();
    if !norm.is_finite() {
        return Err(Error::NonFinite { context: "matrix exponential input".into() });
    }
    let squarings = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a.scaled(T::lit(2f64.powi(-squarings)));
    let b = |i: usize| T::lit(PADE13[i]);
    let id = Matrix::identity(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    let mut inner_u = a6.scaled(b(13));
    inner_u.axpy(b(11), &a4);
    inner_u.axpy(b(9), &a2);
    let mut u = a6.matmul(&inner_u);
    u.axpy(b(7), &a6);
    u.axpy(b(5), &a4);
    u.axpy(b(3), &a2);
    u.axpy(b(1), &id);
    let u = a.matmul(&u);

    let mut inner_v = a6.scaled(b(12));
    inner_v.axpy(b(10), &a4);
    inner_v.axpy(b(8), &a2);
    let mut v = a6.matmul(&inner_v);
    v.axpy(b(6), &a6);
    v.axpy(b(4), &a4);
    v.axpy(b(2), &a2);
    v.axpy(b(0), &id);

    let mut r = solve(&v.sub(&u), &v.add(&u))?;
    for _ in 0..squarings {
        r = r.matmul(&r);
    }
    Ok(r)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Real>(m: &Matrix<T>) -> Vec<T> {
    assert!(m.is_square(), "eigenvalues need a square matrix");
    let n = m.rows();
    // symmetrize to absorb rounding in the caller's construction
    let mut a = Matrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)]) * T::lit(0.5));
    let scale = a.frobenius_norm();
    if scale == T::zero() {
        return vec![T::zero(); n];
    }
    let tol = T::epsilon() * scale;
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<T>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Matrix::<f64>::zeros(3, 3);
        assert_eq!(expm(&z).unwrap(), Matrix::identity(3));
    }

    #[test]
    fn expm_diagonal() {
        let mut a = Matrix::<f64>::zeros(2, 2);
        a[(0, 0)] = 1.5;
        a[(1, 1)] = -20.0;
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)] - 1.5f64.exp()).abs() < 1e-13 * 1.5f64.exp());
        assert!((e[(1, 1)] - (-20f64).exp()).abs() < 1e-20);
        assert!(e[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn expm_rotation_generator() {
        let a = Matrix::from_row_major(2, 2, vec![0.0, -3.0, 3.0, 0.0f64]).unwrap();
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)] - 3f64.cos()).abs() < 1e-13);
        assert!((e[(1, 0)] - 3f64.sin()).abs() < 1e-13);
    }

    #[test]
    fn solve_recovers_rhs() {
        let a = Matrix::from_row_major(3, 3, vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0f64]).unwrap();
        let x = Matrix::from_row_major(3, 1, vec![1.0, -2.0, 0.5]).unwrap();
        let b = a.matmul(&x);
        let got = solve(&a, &b).unwrap();
        assert!(got.max_abs_diff(&x) < 1e-14);
    }

    #[test]
    fn jacobi_eigenvalues_of_known_matrix() {
        let m = Matrix::from_row_major(2, 2, vec![2.0, 1.0, 1.0, 2.0f64]).unwrap();
        let e = symmetric_eigenvalues(&m);
        assert!((e[0] - 1.0).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn works_in_single_precision() {
        let a = Matrix::from_row_major(2, 2, vec![0.0f32, 1.0, -1.0, 0.0]).unwrap();
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)] - 1f32.cos()).abs() < 1e-6);
    }
}
