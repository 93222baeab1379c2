//! Small dense matrices over a [`Scalar`].
//!
//! Desk-scale sizes only (spinor representations, curvature blocks,
//! finite-dimensional superconnection models). Gaussian elimination provides
//! determinants and inverses exactly in exact mode; the float-only extras
//! (matrix exponential, norms) live on `Mat<C64>`.

use crate::error::{Error, Result};
use crate::scalar::{Scalar, C64};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, PartialEq)]
pub struct Mat<S> {
    pub rows: usize,
    pub cols: usize,
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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[&[S]]) -> Self {
        let r = rows.len();
        let c = if r > 0 { rows[0].len() } else { 0 };
        Self::from_fn(r, c, |i, j| rows[i][j].clone())
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conjugate())
    }

    pub fn scale(&self, s: &S) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)].clone() * s.clone())
    }

    pub fn trace(&self) -> S {
        let mut acc = S::zero();
        for i in 0..self.rows.min(self.cols) {
            acc = acc + self[(i, i)].clone();
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn map(&self, f: impl Fn(&S) -> S) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| f(&self[(i, j)]))
    }

    pub fn pow(&self, e: u32) -> Self {
        assert!(self.is_square());
        let mut acc = Self::identity(self.rows);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Determinant by fraction-free-ish Gaussian elimination with pivoting.
    pub fn det(&self) -> S {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut det = S::one();
        for col in 0..n {
            let pivot = (col..n).find(|&r| !a[(r, col)].is_zero());
            let Some(p) = pivot else { return S::zero() };
            if p != col {
                for j in 0..n {
                    let tmp = a[(col, j)].clone();
                    a[(col, j)] = a[(p, j)].clone();
                    a[(p, j)] = tmp;
                }
                det = -det;
            }
            let pv = a[(col, col)].clone();
            det = det * pv.clone();
            let pv_inv = pv.try_inv().expect("nonzero pivot");
            for r in col + 1..n {
                let factor = a[(r, col)].clone() * pv_inv.clone();
                for j in col..n {
                    let sub = factor.clone() * a[(col, j)].clone();
                    a[(r, j)] = a[(r, j)].clone() - sub;
                }
            }
        }
        det
    }

    /// Inverse by Gauss-Jordan; `None` if singular.
    pub fn inverse(&self) -> Option<Self> {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let p = (col..n).find(|&r| !a[(r, col)].is_zero())?;
            if p != col {
                for j in 0..n {
                    a.data.swap(col * n + j, p * n + j);
                    inv.data.swap(col * n + j, p * n + j);
                }
            }
            let pv_inv = a[(col, col)].try_inv()?;
            for j in 0..n {
                a[(col, j)] = a[(col, j)].clone() * pv_inv.clone();
                inv[(col, j)] = inv[(col, j)].clone() * pv_inv.clone();
            }
            for r in 0..n {
                if r == col || a[(r, col)].is_zero() {
                    continue;
                }
                let f = a[(r, col)].clone();
                for j in 0..n {
                    let s = f.clone() * a[(col, j)].clone();
                    a[(r, j)] = a[(r, j)].clone() - s;
                    let s = f.clone() * inv[(col, j)].clone();
                    inv[(r, j)] = inv[(r, j)].clone() - s;
                }
            }
        }
        Some(inv)
    }

    /// Kronecker product.
    pub fn kron(&self, other: &Self) -> Self {
        Self::from_fn(
            self.rows * other.rows,
            self.cols * other.cols,
            |i, j| {
                self[(i / other.rows, j / other.cols)].clone()
                    * other[(i % other.rows, j % other.cols)].clone()
            },
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .map(|x| x.to_c64().norm())
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
}

impl Mat<C64> {
    /// Matrix exponential by scaling-and-squaring with a Taylor core.
    pub fn expm(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::InvalidInput("expm needs a square matrix".into()));
        }
        let n = self.rows;
        let norm = self.max_abs() * n as f64;
        let mut squarings = 0u32;
        let mut scale = 1.0;
        while norm * scale > 0.5 {
            scale *= 0.5;
            squarings += 1;
            if squarings > 64 {
                return Err(Error::Numeric("expm scaling overflow".into()));
            }
        }
        let a = self.scale(&C64::new(scale, 0.0));
        let mut term = Mat::<C64>::identity(n);
        let mut sum = Mat::<C64>::identity(n);
        for k in 1..=24 {
            term = &term * &a;
            term = term.scale(&C64::new(1.0 / k as f64, 0.0));
            sum = &sum + &term;
            if term.max_abs() < 1e-18 {
                break;
            }
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        Ok(sum)
    }
}

impl<S> std::ops::Index<(usize, usize)> for Mat<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for Mat<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

impl<S: Scalar> Add for &Mat<S> {
    type Output = Mat<S>;
    fn add(self, rhs: Self) -> Mat<S> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| {
            self[(i, j)].clone() + rhs[(i, j)].clone()
        })
    }
}

impl<S: Scalar> Sub for &Mat<S> {
    type Output = Mat<S>;
    fn sub(self, rhs: Self) -> Mat<S> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| {
            self[(i, j)].clone() - rhs[(i, j)].clone()
        })
    }
}

impl<S: Scalar> Neg for &Mat<S> {
    type Output = Mat<S>;
    fn neg(self) -> Mat<S> {
        self.map(|x| -x.clone())
    }
}

impl<S: Scalar> Mul for &Mat<S> {
    type Output = Mat<S>;
    fn mul(self, rhs: Self) -> Mat<S> {
        assert_eq!(self.cols, rhs.rows);
        let mut out: Mat<S> = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let add = a.clone() * rhs[(k, j)].clone();
                    out[(i, j)] = out[(i, j)].clone() + add;
                }
            }
        }
        out
    }
}

impl<S: Scalar> fmt::Debug for Mat<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{}  ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Symmetric tridiagonal eigenvalue counter via Sturm sequences, used to
/// bisect out the lowest eigenvalues of small discretized operators.
pub fn tridiag_eigen_lowest(diag: &[f64], off: &[f64], count: usize, tol: f64) -> Vec<f64> {
    let n = diag.len();
    assert_eq!(off.len() + 1, n);
    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = (if i > 0 { off[i - 1].abs() } else { 0.0 })
            + (if i < n - 1 { off[i].abs() } else { 0.0 });
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let count_below = |x: f64| -> usize {
        // number of eigenvalues < x via the LDL^T sign recurrence
        let mut cnt = 0usize;
        let mut d = diag[0] - x;
        if d < 0.0 {
            cnt += 1;
        }
        for i in 1..n {
            let prev = if d == 0.0 { 1e-300 } else { d };
            d = (diag[i] - x) - off[i - 1] * off[i - 1] / prev;
            if d < 0.0 {
                cnt += 1;
            }
        }
        cnt
    };
    let mut out = Vec::with_capacity(count);
    for k in 0..count.min(n) {
        let (mut a, mut b) = (lo, hi);
        while b - a > tol * (1.0 + a.abs().max(b.abs())) {
            let mid = 0.5 * (a + b);
            if count_below(mid) > k {
                b = mid;
            } else {
                a = mid;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;
    use num_traits::One;

    #[test]
    fn exact_inverse_and_det() {
        let m = Mat::<Exact>::from_fn(3, 3, |i, j| {
            Exact::from_int((i * 3 + j) as i64 + if i == j { 5 } else { 0 })
        });
        let inv = m.inverse().unwrap();
        assert_eq!(&m * &inv, Mat::identity(3));
        let d = m.det();
        let dinv = inv.det();
        assert_eq!(d * dinv, Exact::one());
    }

    #[test]
    fn expm_diagonal() {
        let m = Mat::<C64>::from_fn(2, 2, |i, j| {
            if i == j {
                C64::new((i as f64 + 1.0) * 0.7, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let e = m.expm().unwrap();
        assert!((e[(0, 0)].re - (0.7f64).exp()).abs() < 1e-12);
        assert!((e[(1, 1)].re - (1.4f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn expm_rotation_generator() {
        // exp of [[0, -a], [a, 0]] is the rotation matrix by a
        let a = 1.2;
        let m = Mat::<C64>::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => C64::new(-a, 0.0),
            (1, 0) => C64::new(a, 0.0),
            _ => C64::new(0.0, 0.0),
        });
        let e = m.expm().unwrap();
        assert!((e[(0, 0)].re - a.cos()).abs() < 1e-12);
        assert!((e[(1, 0)].re - a.sin()).abs() < 1e-12);
    }

    #[test]
    fn tridiag_lowest_of_laplacian() {
        // -u'' on (0,pi) Dirichlet, h = pi/(n+1): eigenvalues ~ k^2
        let n = 2000;
        let h = std::f64::consts::PI / (n as f64 + 1.0);
        let diag = vec![2.0 / (h * h); n];
        let off = vec![-1.0 / (h * h); n - 1];
        let ev = tridiag_eigen_lowest(&diag, &off, 3, 1e-12);
        for (k, e) in ev.iter().enumerate() {
            let exact = ((k + 1) * (k + 1)) as f64;
            assert!((e - exact).abs() / exact < 1e-3, "k={k} e={e}");
        }
    }
}
