//! Small dense row-major matrices over any [`Scalar`].
//!
//! The state spaces here are at most a few hundred points, so a plain
//! `Vec<T>` with Gaussian elimination is both exact enough for `f64` and
//! exact outright for rationals.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from rows; all rows must share one length.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Self {
            rows: n,
            cols: m,
            data: rows.into_iter().flatten().collect(),
        })
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

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows)
            .map(|i| self.row(i).iter().copied().sum())
            .collect()
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = rhs.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d = *d + a * b;
                }
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        assert!(self.is_square());
        let mut result = Self::identity(self.rows);
        for _ in 0..k {
            result = result.matmul(self);
        }
        result
    }

    /// Row vector times matrix: `x P`.
    pub fn left_mul(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.row(i)) {
                *o = *o + xi * p;
            }
        }
        out
    }

    /// Matrix times column vector: `P v`.
    pub fn right_mul(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&p, &x)| p * x).sum())
            .collect()
    }

    pub fn scale(&self, c: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * c).collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| a - b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
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

    /// Principal submatrix on the given index set (in the given order).
    pub fn restrict(&self, idx: &[usize]) -> Self {
        let mut m = Self::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(a, b)] = self[(i, j)];
            }
        }
        m
    }

    pub fn block_diag(blocks: &[Self]) -> Self {
        let n: usize = blocks.iter().map(|b| b.rows).sum();
        let m: usize = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(n, m);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    out[(r0 + i, c0 + j)] = b[(i, j)];
                }
            }
            r0 += b.rows;
            c0 += b.cols;
        }
        out
    }

    pub fn max_abs_diff(&self, rhs: &Self) -> T {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        crate::scalar::max_abs_diff(&self.data, &rhs.data)
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if !self.is_square() || b.len() != self.rows {
            return Err(Error::Dimension(format!(
                "solve: {}x{} system with rhs of length {}",
                self.rows,
                self.cols,
                b.len()
            )));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut x = b.to_vec();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| {
                    a[(i, col)]
                        .abs_val()
                        .partial_cmp(&a[(j, col)].abs_val())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .ok_or(Error::Singular)?;
            if a[(pivot, col)] == T::zero() {
                return Err(Error::Singular);
            }
            if pivot != col {
                for j in 0..n {
                    a.data.swap(pivot * n + j, col * n + j);
                }
                x.swap(pivot, col);
            }
            let p = a[(col, col)];
            for i in col + 1..n {
                let f = a[(i, col)] / p;
                if f == T::zero() {
                    continue;
                }
                for j in col..n {
                    let v = a[(col, j)];
                    a[(i, j)] = a[(i, j)] - f * v;
                }
                x[i] = x[i] - f * x[col];
            }
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc = acc - a[(i, j)] * x[j];
            }
            x[i] = acc / a[(i, i)];
        }
        Ok(x)
    }

    /// Stationary PMF of a row-stochastic matrix assumed irreducible:
    /// solves `ζ (P - I) = 0` with one equation replaced by `Σ ζ = 1`.
    pub fn stationary(&self) -> Result<Vec<T>> {
        assert!(self.is_square());
        let n = self.rows;
        let mut sys = self.sub(&Self::identity(n)).transpose();
        let last = n - 1;
        for j in 0..n {
            sys[(last, j)] = T::one();
        }
        let mut rhs = vec![T::zero(); n];
        rhs[last] = T::one();
        sys.solve(&rhs)
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: Self) -> Matrix<T> {
        self.matmul(rhs)
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for i in 0..self.rows {
            list.entry(&&self.data[i * self.cols..(i + 1) * self.cols]);
        }
        list.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n, d)
    }

    #[test]
    fn solve_small_system() {
        let a = Matrix::from_rows(vec![vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x: Vec<f64> = a.solve(&[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn singular_detected() {
        let a = Matrix::from_rows(vec![vec![q(1, 1), q(2, 1)], vec![q(2, 1), q(4, 1)]]).unwrap();
        assert!(matches!(a.solve(&[q(1, 1), q(1, 1)]), Err(Error::Singular)));
    }

    #[test]
    fn stationary_two_state_exact() {
        // Chain with flow balance 3/4 π0 = 1/2 π1.
        let p = Matrix::from_rows(vec![vec![q(1, 4), q(3, 4)], vec![q(1, 2), q(1, 2)]]).unwrap();
        assert_eq!(p.stationary().unwrap(), vec![q(2, 5), q(3, 5)]);
    }

    #[test]
    fn block_diag_and_restrict() {
        let a = Matrix::from_rows(vec![vec![1.0]]).unwrap();
        let b = Matrix::from_rows(vec![vec![2.0, 3.0], vec![4.0, 5.0]]).unwrap();
        let d = Matrix::block_diag(&[a, b.clone()]);
        assert_eq!(d.rows(), 3);
        assert_eq!(d[(0, 1)], 0.0);
        assert_eq!(d.restrict(&[1, 2]), b);
    }
}
