//! Dense row-major real matrices/vectors used by the differentiation tape.
//!
//! Shapes stay tiny (mini-batch by layer width at most), so everything is a
//! plain `Vec<f64>` with straightforward loops.

use crate::error::{Error, Result};

/// Pivot threshold below which a Cholesky factorization is rejected.
pub const PIVOT_EPS: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data length mismatch");
        Tensor { rows, cols, data }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    /// Column vector (n x 1).
    pub fn column(data: Vec<f64>) -> Self {
        let rows = data.len();
        Tensor {
            rows,
            cols: 1,
            data,
        }
    }

    /// Row vector (1 x n).
    pub fn row(data: Vec<f64>) -> Self {
        let cols = data.len();
        Tensor {
            rows: 1,
            cols,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    pub fn as_scalar(&self) -> f64 {
        assert!(self.is_scalar(), "expected 1x1 tensor, got {:?}", self.shape());
        self.data[0]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row_slice(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in zip_map");
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add_in_place(&mut self, other: &Tensor) {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in add");
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
    }

    pub fn scale_in_place(&mut self, c: f64) {
        for a in self.data.iter_mut() {
            *a *= c;
        }
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self (m x k) * other (k x n)`.
    pub fn matmul(&self, other: &Tensor) -> Tensor {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {:?} x {:?}",
            self.shape(),
            other.shape()
        );
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = &self.data[i * k..(i + 1) * k];
            let orow = &mut out[i * n..(i + 1) * n];
            for (p, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[p * n..(p + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow.iter()) {
                    *o += a * b;
                }
            }
        }
        Tensor {
            rows: m,
            cols: n,
            data: out,
        }
    }

    /// Column sums as a 1 x n row.
    pub fn col_sums(&self) -> Tensor {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, &v) in out.iter_mut().zip(self.row_slice(i).iter()) {
                *o += v;
            }
        }
        Tensor::row(out)
    }

    /// Column means as a 1 x n row.
    pub fn mean_rows(&self) -> Tensor {
        let mut out = self.col_sums();
        out.scale_in_place(1.0 / self.rows as f64);
        out
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Frobenius inner product `sum_ij self_ij * other_ij`.
    pub fn frob_inner(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in frob_inner");
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| a * b)
            .sum()
    }

    pub fn norm2(&self) -> f64 {
        self.data.iter().map(|&x| x * x).sum::<f64>().sqrt()
    }

    pub fn iter_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Clone, Debug)]
pub struct SpdFactor {
    n: usize,
    /// Row-major lower triangle (full n x n storage, upper part zero).
    l: Vec<f64>,
}

impl SpdFactor {
    /// Factor `a = L L^T`. Fails with [`Error::NotPositiveDefinite`] when a
    /// pivot drops to `PIVOT_EPS` or below.
    pub fn new(a: &Tensor) -> Result<Self> {
        assert_eq!(a.rows(), a.cols(), "SpdFactor needs a square matrix");
        let n = a.rows();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut diag = a.get(j, j);
            for k in 0..j {
                diag -= l[j * n + k] * l[j * n + k];
            }
            if diag <= PIVOT_EPS {
                return Err(Error::NotPositiveDefinite {
                    pivot: diag,
                    index: j,
                });
            }
            let ljj = diag.sqrt();
            l[j * n + j] = ljj;
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / ljj;
            }
        }
        Ok(SpdFactor { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `A x = b` for one right-hand side held as a slice.
    pub fn solve_slice(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "rhs length mismatch");
        let n = self.n;
        let mut y = b.to_vec();
        // Forward: L y = b
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        // Backward: L^T x = y
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }

    /// Solve `A X = B` column by column, reusing the factorization.
    pub fn solve(&self, b: &Tensor) -> Tensor {
        assert_eq!(b.rows(), self.n, "rhs row count mismatch");
        let m = b.cols();
        let mut out = Tensor::zeros(self.n, m);
        let mut col = vec![0.0; self.n];
        for j in 0..m {
            for i in 0..self.n {
                col[i] = b.get(i, j);
            }
            let x = self.solve_slice(&col);
            for i in 0..self.n {
                out.set(i, j, x[i]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let a = Tensor::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let i = Tensor::identity(2);
        assert_eq!(a.matmul(&i), a);
        assert_eq!(i.matmul(&a), a);
    }

    #[test]
    fn matmul_known_product() {
        let a = Tensor::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Tensor::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = a.matmul(&b);
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn spd_solve_recovers_rhs() {
        // A = B B^T + I is SPD for any B.
        let b = Tensor::from_vec(3, 3, vec![0.3, -1.2, 0.7, 2.0, 0.1, -0.4, 0.9, 0.5, 1.1]);
        let mut a = b.matmul(&b.transpose());
        for i in 0..3 {
            a.set(i, i, a.get(i, i) + 1.0);
        }
        let rhs = Tensor::column(vec![1.0, -2.0, 0.5]);
        let f = SpdFactor::new(&a).unwrap();
        let x = f.solve(&rhs);
        let resid = a.matmul(&x);
        for i in 0..3 {
            assert!((resid.get(i, 0) - rhs.get(i, 0)).abs() < 1e-12);
        }
    }

    #[test]
    fn spd_rejects_indefinite() {
        let a = Tensor::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]); // eigenvalues 3, -1
        assert!(matches!(
            SpdFactor::new(&a),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }
}
