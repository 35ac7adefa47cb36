//! Shared test oracles, independent of the library's differentiation and
//! solve paths.

#![allow(dead_code)]

use deepbeam::numerics::C64;

/// Central finite differences of `f` at `x`.
pub fn finite_difference(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let plus = f(&probe);
        probe[i] = orig - step;
        let minus = f(&probe);
        probe[i] = orig;
        grad.push((plus - minus) / (2.0 * step));
    }
    grad
}

/// Assert `got` matches `want` within relative tolerance `rel` and absolute
/// floor `abs`.
pub fn assert_close(got: &[f64], want: &[f64], rel: f64, abs: f64, what: &str) {
    assert_eq!(got.len(), want.len(), "{what}: length mismatch");
    for (i, (&g, &w)) in got.iter().zip(want.iter()).enumerate() {
        let tol = abs.max(rel * w.abs());
        assert!(
            (g - w).abs() <= tol,
            "{what}[{i}]: got {g}, want {w} (tol {tol})"
        );
    }
}

/// Gaussian elimination with partial pivoting on a dense complex system;
/// written independently of the Cholesky path it cross-checks.
pub fn gaussian_solve(a: &[Vec<C64>], b: &[C64]) -> Vec<C64> {
    let n = b.len();
    let mut aug: Vec<Vec<C64>> = a
        .iter()
        .zip(b.iter())
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                aug[i][col]
                    .norm()
                    .partial_cmp(&aug[j][col].norm())
                    .unwrap()
            })
            .unwrap();
        aug.swap(col, pivot);
        let p = aug[col][col];
        assert!(p.norm() > 1e-300, "singular system in oracle");
        for row in (col + 1)..n {
            let factor = aug[row][col] / p;
            for k in col..=n {
                let v = aug[col][k];
                aug[row][k] -= factor * v;
            }
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut s = aug[row][n];
        for k in (row + 1)..n {
            s -= aug[row][k] * x[k];
        }
        x[row] = s / aug[row][row];
    }
    x
}
