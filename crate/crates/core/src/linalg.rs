//! Small dense matrices and LU factorization with partial pivoting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
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

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.iter().flatten().copied().collect() }
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

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Max absolute column sum.
    pub fn norm_one(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    /// `(A + A') / 2`.
    pub fn symmetrized(&self) -> Self {
        let t = self.transpose();
        let half = T::of(0.5);
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&t.data).map(|(&a, &b)| (a + b) * half).collect(),
        }
    }

    pub fn row_vecs(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.cols.max(1)).map(<[T]>::to_vec).collect()
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// `P A = L U` with unit-diagonal `L` packed below the diagonal of `lu`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::Usage(format!("LU needs a square matrix, got {}x{}", a.rows, a.cols)));
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.data.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tiny = scale * T::epsilon() * T::of_usize(n.max(1));
        for col in 0..n {
            let (piv, pval) = (col..n)
                .map(|r| (r, lu[(r, col)].abs()))
                .fold((col, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pval > tiny) {
                return Err(Error::Singular(format!("zero pivot in column {col}")));
            }
            if piv != col {
                for j in 0..n {
                    lu.data.swap(piv * n + j, col * n + j);
                }
                perm.swap(piv, col);
            }
            let d = lu[(col, col)];
            for r in col + 1..n {
                let f = lu[(r, col)] / d;
                lu[(r, col)] = f;
                for j in col + 1..n {
                    let v = lu[(col, j)];
                    lu[(r, j)] -= f * v;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let v = self.lu[(i, j)] * x[j];
                x[i] -= v;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let v = self.lu[(i, j)] * x[j];
                x[i] -= v;
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, b: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(b.rows, b.cols);
        for j in 0..b.cols {
            let col: Vec<T> = (0..b.rows).map(|i| b[(i, j)]).collect();
            for (i, v) in self.solve_vec(&col).into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn inverse(&self) -> Matrix<T> {
        self.solve(&Matrix::identity(self.lu.rows))
    }
}

/// 1-norm condition number `|A|_1 |A^-1|_1`; infinite when singular.
pub fn condition_number<T: Real>(a: &Matrix<T>) -> T {
    match Lu::factor(a) {
        Ok(lu) => a.norm_one() * lu.inverse().norm_one(),
        Err(_) => T::infinity(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_with_pivoting() {
        let a = Matrix::<f64>::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]);
        let lu = Lu::factor(&a).unwrap();
        let x = lu.solve_vec(&[3.0, 2.0, 4.0]);
        for (v, e) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((v - e).abs() < 1e-14);
        }
        let inv = lu.inverse();
        let id = a.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_detected() {
        let a = Matrix::<f64>::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(Lu::factor(&a), Err(Error::Singular(_))));
        assert!(condition_number(&a).is_infinite());
        assert!(matches!(Lu::factor(&Matrix::<f64>::zeros(2, 2)), Err(Error::Singular(_))));
    }

    #[test]
    fn condition_of_diagonal() {
        let a = Matrix::<f64>::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.5]]);
        assert!((condition_number(&a) - 4.0).abs() < 1e-14);
    }
}
