//! Small dense linear-algebra kernels shared by the solver.
//!
//! Symmetric matrices are vectorized with `svec`: lower triangle, column by
//! column, off-diagonal entries scaled by `sqrt(2)` so that
//! `svec(U) . svec(V) == trace(U V)`.

use nalgebra::DMatrix;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Length of `svec` for a `d x d` symmetric matrix.
pub fn svec_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Position of entry `(i, j)` (either order) inside `svec`.
pub fn svec_index(d: usize, i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    // column offset: sum_{t<c} (d - t)
    c * d - c * c.saturating_sub(1) / 2 + (r - c)
}

/// Inverse of [`svec_index`]: the `(row, col)` with `row >= col` stored at `k`.
pub fn svec_entry(d: usize, k: usize) -> (usize, usize) {
    let mut col = 0;
    let mut start = 0;
    while start + (d - col) <= k {
        start += d - col;
        col += 1;
    }
    (col + (k - start), col)
}

/// Symmetric matrix from its `svec`.
pub fn smat(d: usize, v: &[f64]) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), svec_len(d));
    let mut m = DMatrix::zeros(d, d);
    let mut k = 0;
    for j in 0..d {
        m[(j, j)] = v[k];
        k += 1;
        for i in (j + 1)..d {
            let x = v[k] / SQRT2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

/// `svec` of a symmetric matrix (the strict upper triangle is ignored).
pub fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let d = m.nrows();
    let mut k = 0;
    for j in 0..d {
        out[k] = m[(j, j)];
        k += 1;
        for i in (j + 1)..d {
            out[k] = 0.5 * (m[(i, j)] + m[(j, i)]) * SQRT2;
            k += 1;
        }
    }
}

pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = vec![0.0; svec_len(m.nrows())];
    svec_into(m, &mut out);
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Dense lower Cholesky factor stored row-major.
///
/// Pivots that collapse below `PIVOT_DROP * a_jj` (or are non-positive) are
/// replaced by a huge value, which zeroes the corresponding solution
/// component instead of failing. This keeps rank-deficient Schur complements
/// solvable.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
    dropped: usize,
}

const PIVOT_DROP: f64 = 1e-14;
const HUGE_PIVOT: f64 = 1e64;

impl DenseCholesky {
    /// Factor the symmetric matrix `a` (row-major, `n x n`, lower half read).
    pub fn factor(mut a: Vec<f64>, n: usize) -> Self {
        debug_assert_eq!(a.len(), n * n);
        let mut dropped = 0;
        for j in 0..n {
            let ajj = a[j * n + j];
            let mut p = ajj;
            for k in 0..j {
                let v = a[j * n + k];
                p -= v * v;
            }
            let ljj = if !(p > PIVOT_DROP * ajj.abs()) || p <= 1e-300 {
                dropped += 1;
                HUGE_PIVOT
            } else {
                p.sqrt()
            };
            a[j * n + j] = ljj;
            for i in (j + 1)..n {
                let mut v = a[i * n + j];
                let (ri, rj) = (i * n, j * n);
                for k in 0..j {
                    v -= a[ri + k] * a[rj + k];
                }
                a[i * n + j] = v / ljj;
            }
        }
        // clear the strict upper triangle so `l` is a clean factor
        for i in 0..n {
            for j in (i + 1)..n {
                a[i * n + j] = 0.0;
            }
        }
        DenseCholesky { n, l: a, dropped }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of pivots replaced because the matrix was (numerically) singular.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Solve `L w = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut v = b[i];
            let row = &self.l[i * n..i * n + i];
            for (k, lik) in row.iter().enumerate() {
                v -= lik * b[k];
            }
            b[i] = v / self.l[i * n + i];
        }
    }

    /// Solve `L^T x = w` in place.
    pub fn backward(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let v = b[i] / self.l[i * n + i];
            b[i] = v;
            for k in 0..i {
                b[k] -= self.l[i * n + k] * v;
            }
        }
    }

    pub fn solve(&self, b: &mut [f64]) {
        self.forward(b);
        self.backward(b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_index_roundtrip() {
        for d in 1..6 {
            let mut seen = vec![false; svec_len(d)];
            for j in 0..d {
                for i in j..d {
                    let k = svec_index(d, i, j);
                    assert_eq!(svec_index(d, j, i), k);
                    assert_eq!(svec_entry(d, k), (i, j));
                    assert!(!seen[k]);
                    seen[k] = true;
                }
            }
        }
    }

    #[test]
    fn svec_preserves_trace_inner_product() {
        let u = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let v = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.5, -1.0, 1.0, 0.0, 0.5, 0.0, 3.0]);
        let tr = (&u * &v).trace();
        assert!((dot(&svec(&u), &svec(&v)) - tr).abs() < 1e-12);
        assert!((smat(3, &svec(&u)) - &u).norm() < 1e-12);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = vec![4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0];
        let f = DenseCholesky::factor(a.clone(), 3);
        assert_eq!(f.dropped(), 0);
        let mut x = vec![1.0, -2.0, 0.5];
        f.solve(&mut x);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - [1.0, -2.0, 0.5][i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_drops_dependent_direction() {
        // rank one: [1 1; 1 1]
        let f = DenseCholesky::factor(vec![1.0, 1.0, 1.0, 1.0], 2);
        assert_eq!(f.dropped(), 1);
        let mut x = vec![2.0, 2.0];
        f.solve(&mut x);
        assert!(x.iter().all(|v| v.is_finite()));
        assert!((x[0] + x[1] - 2.0).abs() < 1e-12);
    }
}
