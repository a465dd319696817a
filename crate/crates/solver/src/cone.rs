//! Nesterov-Todd scaling and Jordan-algebra operations for the symmetric
//! cones handled by the interior-point method.
//!
//! For a pair `(x, s)` in the interior of a cone the scaling `W` satisfies
//! `W^{-T} x = W s = lambda`. Directions are carried in the scaled space,
//! where both iterates coincide with `lambda`.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{smat, svec_into, svec_len};

/// A block of the (free-variable-expanded) variable vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Block {
    NonNeg { start: usize, len: usize },
    Soc { start: usize, dim: usize },
    Psd { start: usize, dim: usize },
}

impl Block {
    pub fn start(&self) -> usize {
        match *self {
            Block::NonNeg { start, .. } | Block::Soc { start, .. } | Block::Psd { start, .. } => start,
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            Block::NonNeg { len, .. } => len,
            Block::Soc { dim, .. } => dim,
            Block::Psd { dim, .. } => svec_len(dim),
        }
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start()..self.start() + self.len()
    }

    /// Barrier degree contributed to `nu`.
    pub fn degree(&self) -> usize {
        match *self {
            Block::NonNeg { len, .. } => len,
            Block::Soc { .. } => 1,
            Block::Psd { dim, .. } => dim,
        }
    }

    pub fn identity_into(&self, out: &mut [f64]) {
        match *self {
            Block::NonNeg { .. } => out.iter_mut().for_each(|v| *v = 1.0),
            Block::Soc { .. } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[0] = 1.0;
            }
            Block::Psd { dim, .. } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..dim {
                    out[crate::linalg::svec_index(dim, i, i)] = 1.0;
                }
            }
        }
    }

    /// Jordan product `u o v`.
    pub fn jordan(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        match *self {
            Block::NonNeg { .. } => {
                for i in 0..u.len() {
                    out[i] = u[i] * v[i];
                }
            }
            Block::Soc { .. } => {
                out[0] = crate::linalg::dot(u, v);
                for i in 1..u.len() {
                    out[i] = u[0] * v[i] + v[0] * u[i];
                }
            }
            Block::Psd { dim, .. } => {
                let (um, vm) = (smat(dim, u), smat(dim, v));
                let p = &um * &vm;
                let sym = (&p + p.transpose()) * 0.5;
                svec_into(&sym, out);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Scaling {
    NonNeg {
        w: Vec<f64>,
        lambda: Vec<f64>,
    },
    Soc {
        w: DMatrix<f64>,
        #[cfg_attr(not(test), allow(dead_code))]
        winv: DMatrix<f64>,
        lambda: Vec<f64>,
    },
    Psd {
        dim: usize,
        r: DMatrix<f64>,
        #[cfg_attr(not(test), allow(dead_code))]
        rinv: DMatrix<f64>,
        /// `R R^T`, the symmetric NT scaling matrix with `G S G = X`.
        g: DMatrix<f64>,
        /// eigenvalues of the scaled point (a diagonal matrix)
        lambda: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct NotInterior;

fn soc_jdot(u: &[f64], v: &[f64]) -> f64 {
    u[0] * v[0] - u[1..].iter().zip(&v[1..]).map(|(a, b)| a * b).sum::<f64>()
}

impl Scaling {
    pub fn new(block: &Block, x: &[f64], s: &[f64]) -> Result<Scaling, NotInterior> {
        match *block {
            Block::NonNeg { .. } => {
                if x.iter().chain(s).any(|v| !(*v > 0.0)) {
                    return Err(NotInterior);
                }
                let w = x.iter().zip(s).map(|(a, b)| (a / b).sqrt()).collect();
                let lambda = x.iter().zip(s).map(|(a, b)| (a * b).sqrt()).collect();
                Ok(Scaling::NonNeg { w, lambda })
            }
            Block::Soc { dim, .. } => {
                let xjx = soc_jdot(x, x);
                let sjs = soc_jdot(s, s);
                if !(xjx > 0.0 && sjs > 0.0 && x[0] > 0.0 && s[0] > 0.0) {
                    return Err(NotInterior);
                }
                let (xn, sn) = (xjx.sqrt(), sjs.sqrt());
                let xb: Vec<f64> = x.iter().map(|v| v / xn).collect();
                let sb: Vec<f64> = s.iter().map(|v| v / sn).collect();
                let gamma = ((1.0 + crate::linalg::dot(&xb, &sb)) / 2.0).sqrt();
                // wbar = (xbar + J sbar) / (2 gamma)
                let mut wb = vec![0.0; dim];
                wb[0] = (xb[0] + sb[0]) / (2.0 * gamma);
                for i in 1..dim {
                    wb[i] = (xb[i] - sb[i]) / (2.0 * gamma);
                }
                let denom = (2.0 * (wb[0] + 1.0)).sqrt();
                let mut v = DVector::from_vec(wb);
                v[0] += 1.0;
                v /= denom;
                let beta = (xjx / sjs).powf(0.25);
                let mut j = DMatrix::identity(dim, dim) * -1.0;
                j[(0, 0)] = 1.0;
                let vvt = &v * v.transpose();
                let w = (&vvt * 2.0 - &j) * beta;
                let jv = &j * &v;
                let winv = (&jv * jv.transpose() * 2.0 - &j) / beta;
                let lambda = (&w * DVector::from_column_slice(s)).as_slice().to_vec();
                Ok(Scaling::Soc { w, winv, lambda })
            }
            Block::Psd { dim, .. } => {
                let xm = smat(dim, x);
                let sm = smat(dim, s);
                let lx = xm.cholesky().ok_or(NotInterior)?.l();
                let ls = sm.cholesky().ok_or(NotInterior)?.l();
                let prod = ls.transpose() * &lx;
                let svd = prod.svd(false, true);
                let v_t = svd.v_t.ok_or(NotInterior)?;
                let sig = svd.singular_values;
                if sig.iter().any(|v| !(*v > 0.0)) {
                    return Err(NotInterior);
                }
                let mut r = &lx * v_t.transpose();
                for (j, sj) in sig.iter().enumerate() {
                    let f = 1.0 / sj.sqrt();
                    r.column_mut(j).scale_mut(f);
                }
                let lx_inv = lx
                    .solve_lower_triangular(&DMatrix::identity(dim, dim))
                    .ok_or(NotInterior)?;
                let mut rinv = &v_t * lx_inv;
                for (i, si) in sig.iter().enumerate() {
                    let f = si.sqrt();
                    rinv.row_mut(i).scale_mut(f);
                }
                let g = &r * r.transpose();
                Ok(Scaling::Psd { dim, r, rinv, g, lambda: sig.iter().copied().collect() })
            }
        }
    }

    /// The scaled point `lambda` as a vector in block coordinates.
    pub fn lambda_into(&self, out: &mut [f64]) {
        match self {
            Scaling::NonNeg { lambda, .. } | Scaling::Soc { lambda, .. } => out.copy_from_slice(lambda),
            Scaling::Psd { dim, lambda, .. } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                for (i, l) in lambda.iter().enumerate() {
                    out[crate::linalg::svec_index(*dim, i, i)] = *l;
                }
            }
        }
    }

    /// `W^{-T} dx`
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn scale_primal(&self, dx: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { w, .. } => {
                for i in 0..dx.len() {
                    out[i] = dx[i] / w[i];
                }
            }
            Scaling::Soc { winv, .. } => mat_vec(winv, dx, out),
            Scaling::Psd { dim, rinv, .. } => {
                let m = rinv * smat(*dim, dx) * rinv.transpose();
                svec_into(&m, out);
            }
        }
    }

    /// `W ds`
    pub fn scale_dual(&self, ds: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { w, .. } => {
                for i in 0..ds.len() {
                    out[i] = ds[i] * w[i];
                }
            }
            Scaling::Soc { w, .. } => mat_vec(w, ds, out),
            Scaling::Psd { dim, r, .. } => {
                let m = r.transpose() * smat(*dim, ds) * r;
                svec_into(&m, out);
            }
        }
    }

    /// `W^T u`: maps a scaled vector back to primal coordinates.
    pub fn unscale_primal(&self, u: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { w, .. } => {
                for i in 0..u.len() {
                    out[i] = u[i] * w[i];
                }
            }
            Scaling::Soc { w, .. } => mat_vec(w, u, out),
            Scaling::Psd { dim, r, .. } => {
                let m = r * smat(*dim, u) * r.transpose();
                svec_into(&m, out);
            }
        }
    }

    /// `lambda \ d`, the solution `u` of `lambda o u = d`.
    pub fn lambda_solve(&self, d: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { lambda, .. } => {
                for i in 0..d.len() {
                    out[i] = d[i] / lambda[i];
                }
            }
            Scaling::Soc { lambda, .. } => {
                let l0 = lambda[0];
                let l1d1: f64 = lambda[1..].iter().zip(&d[1..]).map(|(a, b)| a * b).sum();
                let det = soc_jdot(lambda, lambda);
                let u0 = (l0 * d[0] - l1d1) / det;
                out[0] = u0;
                for i in 1..d.len() {
                    out[i] = (d[i] - u0 * lambda[i]) / l0;
                }
            }
            Scaling::Psd { dim, lambda, .. } => {
                let mut k = 0;
                for j in 0..*dim {
                    for i in j..*dim {
                        out[k] = 2.0 * d[k] / (lambda[i] + lambda[j]);
                        k += 1;
                    }
                }
            }
        }
    }

    /// Largest `alpha` (possibly infinite) with `lambda + alpha d` in the cone.
    pub fn max_step(&self, d: &[f64]) -> f64 {
        match self {
            Scaling::NonNeg { lambda, .. } => {
                let mut a = f64::INFINITY;
                for i in 0..d.len() {
                    if d[i] < 0.0 {
                        a = a.min(-lambda[i] / d[i]);
                    }
                }
                a
            }
            Scaling::Soc { lambda, .. } => soc_max_step(lambda, d),
            Scaling::Psd { dim, lambda, .. } => {
                let mut m = smat(*dim, d);
                for i in 0..*dim {
                    for j in 0..*dim {
                        m[(i, j)] /= (lambda[i] * lambda[j]).sqrt();
                    }
                }
                let min = m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
                if min >= 0.0 {
                    f64::INFINITY
                } else {
                    -1.0 / min
                }
            }
        }
    }

    /// Symmetric kernel of `W^T W` for Schur complement assembly.
    pub fn psd_g(&self) -> Option<&DMatrix<f64>> {
        match self {
            Scaling::Psd { g, .. } => Some(g),
            _ => None,
        }
    }

    pub fn soc_w(&self) -> Option<&DMatrix<f64>> {
        match self {
            Scaling::Soc { w, .. } => Some(w),
            _ => None,
        }
    }

    pub fn nonneg_w(&self) -> Option<&[f64]> {
        match self {
            Scaling::NonNeg { w, .. } => Some(w),
            _ => None,
        }
    }
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += m[(i, j)] * v[j];
        }
        out[i] = acc;
    }
}

/// Step to the boundary of the second-order cone from an interior point `u`.
fn soc_max_step(u: &[f64], d: &[f64]) -> f64 {
    // f(a) = a_q a^2 + 2 b_q a + c_q  where f(a) = (u + a d)' J (u + a d)
    let aq = soc_jdot(d, d);
    let bq = soc_jdot(u, d);
    let cq = soc_jdot(u, u);
    let mut best = f64::INFINITY;
    let mut consider = |r: f64| {
        if r > 0.0 && r < best {
            best = r;
        }
    };
    let scale = aq.abs().max(bq.abs()).max(cq.abs());
    if aq.abs() <= 1e-15 * scale {
        if bq < 0.0 {
            consider(-cq / (2.0 * bq));
        }
    } else {
        let disc = bq * bq - aq * cq;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -(bq + bq.signum() * sq);
            if q != 0.0 {
                consider(q / aq);
                consider(cq / q);
            } else {
                consider((-bq + sq) / aq);
                consider((-bq - sq) / aq);
            }
        }
    }
    // also keep the first coordinate nonnegative
    if d[0] < 0.0 {
        consider(-u[0] / d[0]);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svec;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
    }

    fn check_nt(block: Block, x: &[f64], s: &[f64]) {
        let sc = Scaling::new(&block, x, s).unwrap();
        let n = x.len();
        let (mut px, mut ds, mut lam) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        sc.scale_primal(x, &mut px);
        sc.scale_dual(s, &mut ds);
        sc.lambda_into(&mut lam);
        assert!(close(&px, &lam, 1e-10), "W^-T x = {px:?}, lambda = {lam:?}");
        assert!(close(&ds, &lam, 1e-10), "W s = {ds:?}, lambda = {lam:?}");
        // W^T (W^-T x) == x
        let mut back = vec![0.0; n];
        sc.unscale_primal(&px, &mut back);
        assert!(close(&back, x, 1e-10));
        // lambda o (lambda \ d) == d
        let d: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut u = vec![0.0; n];
        sc.lambda_solve(&d, &mut u);
        let mut back = vec![0.0; n];
        block.jordan(&lam, &u, &mut back);
        assert!(close(&back, &d, 1e-9));
    }

    #[test]
    fn nt_scaling_nonneg() {
        check_nt(Block::NonNeg { start: 0, len: 3 }, &[1.0, 2.0, 0.5], &[3.0, 0.1, 1.0]);
    }

    #[test]
    fn nt_scaling_soc() {
        check_nt(Block::Soc { start: 0, dim: 3 }, &[2.0, 0.5, -1.0], &[1.5, -0.3, 0.2]);
        check_nt(Block::Soc { start: 0, dim: 4 }, &[5.0, 1.0, 2.0, -3.0], &[1.0, 0.1, 0.2, 0.3]);
    }

    #[test]
    fn nt_scaling_psd() {
        let x = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5]);
        let s = DMatrix::from_row_slice(3, 3, &[1.0, -0.4, 0.0, -0.4, 3.0, 0.5, 0.0, 0.5, 0.7]);
        check_nt(Block::Psd { start: 0, dim: 3 }, &svec(&x), &svec(&s));
    }

    #[test]
    fn soc_step_hits_boundary() {
        let u = [1.0, 0.0, 0.0];
        let d = [0.0, 1.0, 0.0];
        assert!((soc_max_step(&u, &d) - 1.0).abs() < 1e-12);
        let d = [1.0, 0.5, 0.0];
        assert!(soc_max_step(&u, &d).is_infinite());
        let d = [-1.0, 0.0, 0.0];
        assert!((soc_max_step(&u, &d) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psd_step_hits_boundary() {
        let block = Block::Psd { start: 0, dim: 2 };
        let x = svec(&DMatrix::identity(2, 2));
        let sc = Scaling::new(&block, &x, &x).unwrap();
        let d = svec(&DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 1.0]));
        assert!((sc.max_step(&d) - 0.5).abs() < 1e-12);
    }
}
