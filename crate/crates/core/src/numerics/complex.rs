//! Complex vectors and Hermitian matrices at the small fixed sizes the
//! beamformer works with, plus a Cholesky-based positive-definite solver.
//!
//! Complex entries are `num_complex::Complex64`, i.e. (real, imaginary) f64
//! pairs. Matrices are square and dense; nothing here grows past a handful of
//! antennas, so plain loops beat any clever blocking.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::tensor::{Tensor, PIVOT_EPS};

pub type C64 = Complex64;

/// Complex column vector of fixed length.
#[derive(Clone, Debug, PartialEq)]
pub struct CVec(Vec<C64>);

impl CVec {
    /// Entries must be finite; violations are programmer errors.
    pub fn new(entries: Vec<C64>) -> Self {
        assert!(
            entries.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
            "non-finite entry in CVec"
        );
        CVec(entries)
    }

    pub fn zeros(n: usize) -> Self {
        CVec(vec![C64::new(0.0, 0.0); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.0.iter()
    }

    #[inline]
    pub fn get(&self, i: usize) -> C64 {
        self.0[i]
    }

    /// Inner product `self^H other`.
    pub fn dot_h(&self, other: &CVec) -> C64 {
        assert_eq!(self.len(), other.len(), "dot_h length mismatch");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, c: C64) -> CVec {
        CVec(self.0.iter().map(|z| z * c).collect())
    }

    pub fn scale_re(&self, c: f64) -> CVec {
        CVec(self.0.iter().map(|z| z * c).collect())
    }

    pub fn add(&self, other: &CVec) -> CVec {
        assert_eq!(self.len(), other.len(), "add length mismatch");
        CVec(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &CVec) -> CVec {
        assert_eq!(self.len(), other.len(), "sub length mismatch");
        CVec(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// Real representation `[Re; Im]` of length `2n`.
    pub fn realify(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = Vec::with_capacity(2 * n);
        out.extend(self.0.iter().map(|z| z.re));
        out.extend(self.0.iter().map(|z| z.im));
        out
    }

    /// Inverse of [`CVec::realify`].
    pub fn from_real(parts: &[f64]) -> CVec {
        assert!(parts.len().is_multiple_of(2), "realified vector has odd length");
        let n = parts.len() / 2;
        CVec::new(
            (0..n)
                .map(|i| C64::new(parts[i], parts[n + i]))
                .collect(),
        )
    }
}

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    n: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<C64>>) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "CMat rows must be square");
            data.extend(r);
        }
        assert!(
            data.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
            "non-finite entry in CMat"
        );
        CMat { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.n + j] = v;
    }

    /// `self += w * v v^H` (rank-one Hermitian update).
    pub fn add_outer(&mut self, v: &CVec, w: f64) {
        assert_eq!(v.len(), self.n, "outer product dimension mismatch");
        for i in 0..self.n {
            for j in 0..self.n {
                self.data[i * self.n + j] += w * v.get(i) * v.get(j).conj();
            }
        }
    }

    pub fn matvec(&self, x: &CVec) -> CVec {
        assert_eq!(x.len(), self.n, "matvec dimension mismatch");
        CVec::new(
            (0..self.n)
                .map(|i| {
                    (0..self.n)
                        .map(|j| self.get(i, j) * x.get(j))
                        .sum::<C64>()
                })
                .collect(),
        )
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        for i in 0..self.n {
            for j in 0..self.n {
                let d = self.get(i, j) - self.get(j, i).conj();
                if d.re.abs() > tol || d.im.abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Realification of a Hermitian matrix: the symmetric 2n x 2n block
    /// matrix `[[Re A, -Im A], [Im A, Re A]]`, which is SPD exactly when
    /// the complex matrix is Hermitian positive-definite.
    pub fn realify_hermitian(&self) -> Tensor {
        let n = self.n;
        let mut t = Tensor::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let z = self.get(i, j);
                t.set(i, j, z.re);
                t.set(i, n + j, -z.im);
                t.set(n + i, j, z.im);
                t.set(n + i, n + j, z.re);
            }
        }
        t
    }

    /// `A = L L^H` with a real positive diagonal.
    pub fn cholesky(&self) -> Result<CholeskyC> {
        let n = self.n;
        let mut l = vec![C64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let mut diag = self.get(j, j).re;
            for k in 0..j {
                diag -= l[j * n + k].norm_sqr();
            }
            if diag <= PIVOT_EPS {
                return Err(Error::NotPositiveDefinite {
                    pivot: diag,
                    index: j,
                });
            }
            let ljj = diag.sqrt();
            l[j * n + j] = C64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / ljj;
            }
        }
        Ok(CholeskyC { n, l })
    }
}

/// Cached complex Cholesky factor; one factorization serves many solves.
#[derive(Clone, Debug)]
pub struct CholeskyC {
    n: usize,
    l: Vec<C64>,
}

impl CholeskyC {
    /// Solve `A x = b`.
    pub fn solve(&self, b: &CVec) -> CVec {
        assert_eq!(b.len(), self.n, "rhs length mismatch");
        let n = self.n;
        let mut y: Vec<C64> = b.as_slice().to_vec();
        // L y = b
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i].re;
        }
        // L^H x = y
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i].conj() * y[k];
            }
            y[i] = s / self.l[i * n + i].re;
        }
        CVec::new(y)
    }
}

/// Solve `A x = b` for Hermitian positive-definite `A` via Cholesky.
///
/// Callers that need several right-hand sides against the same matrix should
/// factor once with [`CMat::cholesky`] and reuse the factor.
pub fn hermitian_solve(a: &CMat, b: &CVec) -> Result<CVec> {
    Ok(a.cholesky()?.solve(b))
}
