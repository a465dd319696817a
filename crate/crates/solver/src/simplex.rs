//! Dense two-phase primal simplex for small LPs with free and
//! nonnegative variables.
//!
//! Used where vertex-exact answers matter (transport plans, per-sample
//! deterministic programs). Dantzig pricing, switching to Bland's rule after
//! a run of degenerate pivots. The final basis is refactored with LU so the
//! reported `x` and `y` do not carry tableau drift.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{dot, norm2};
use crate::presolve::dense_independent_rows;
use crate::problem::{ConicSolution, SparseMatrix, Status};
use crate::SolverError;

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarBound {
    Free,
    NonNeg,
}

struct Tableau {
    rows: usize,
    width: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn pivot(&mut self, r: usize, col: usize, obj: &mut [f64]) {
        let w = self.width;
        let p = self.t[r * w + col];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= p;
        }
        let prow: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * w + col];
            if f != 0.0 {
                for (v, pv) in self.t[i * w..(i + 1) * w].iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                self.t[i * w + col] = 0.0;
            }
        }
        let f = obj[col];
        if f != 0.0 {
            for (v, pv) in obj.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
            obj[col] = 0.0;
        }
        self.basis[r] = col;
    }

    /// Runs simplex iterations on reduced-cost row `obj` (last entry is the
    /// negated objective). Columns `>= allowed` never enter.
    fn optimize(&mut self, obj: &mut [f64], allowed: usize, max_pivots: usize) -> Result<(), Status> {
        let rhs = self.width - 1;
        let mut degenerate_run = 0;
        for _ in 0..max_pivots {
            let bland = degenerate_run > 50;
            let mut enter = None;
            let mut best = -COST_TOL;
            for j in 0..allowed {
                if obj[j] < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = obj[j];
                }
            }
            let Some(col) = enter else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, col);
                if a > PIVOT_TOL {
                    let ratio = self.at(i, rhs) / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else { return Err(Status::Unbounded) };
            degenerate_run = if ratio.abs() <= 1e-12 { degenerate_run + 1 } else { 0 };
            self.pivot(r, col, obj);
        }
        Err(Status::MaxIter)
    }
}

/// Solve `min c'x  s.t.  A x = b` with per-variable bounds.
///
/// The result uses the same conventions as [`crate::solve`]: `s = c - A'y`,
/// and `s` is zero on free variables at optimality.
pub fn solve_lp(c: &[f64], a: &SparseMatrix, b: &[f64], bounds: &[VarBound]) -> Result<ConicSolution, SolverError> {
    let n = c.len();
    let m0 = b.len();
    if a.nrows != m0 || a.ncols != n || bounds.len() != n {
        return Err(SolverError::Dimension(format!(
            "A is {}x{}, c has {n}, b has {m0}, bounds has {}",
            a.nrows,
            a.ncols,
            bounds.len()
        )));
    }
    if c.iter().chain(b).any(|v| !v.is_finite()) || a.entries.iter().any(|e| !e.2.is_finite()) {
        return Err(SolverError::NonFinite("LP data"));
    }
    let mut dense = vec![vec![0.0; n]; m0];
    for &(i, j, v) in &a.entries {
        if i >= m0 || j >= n {
            return Err(SolverError::Dimension(format!("A entry ({i}, {j}) out of range")));
        }
        dense[i][j] += v;
    }
    let keep = dense_independent_rows(&dense, 1e-9);
    let rows: Vec<usize> = (0..m0).filter(|&i| keep[i]).collect();
    let dropped_rows: Vec<usize> = (0..m0).filter(|&i| !keep[i]).collect();
    let m = rows.len();

    // expanded columns: x = x+ - x- for free variables
    let mut cols: Vec<(usize, f64)> = Vec::with_capacity(n);
    for (j, bd) in bounds.iter().enumerate() {
        cols.push((j, 1.0));
        if *bd == VarBound::Free {
            cols.push((j, -1.0));
        }
    }
    let ne = cols.len();
    let width = ne + m + 1;
    let mut t = vec![0.0; m * width];
    let mut sign = vec![1.0; m];
    for (r, &i) in rows.iter().enumerate() {
        sign[r] = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for (k, &(j, sg)) in cols.iter().enumerate() {
            t[r * width + k] = sign[r] * sg * dense[i][j];
        }
        t[r * width + ne + r] = 1.0;
        t[r * width + width - 1] = sign[r] * b[i];
    }
    let mut tab = Tableau { rows: m, width, t, basis: (ne..ne + m).collect() };
    let max_pivots = 50 * (m + ne).max(10);

    // phase 1
    let mut obj = vec![0.0; width];
    for r in 0..m {
        for k in 0..ne {
            obj[k] -= tab.at(r, k);
        }
        obj[width - 1] -= tab.at(r, width - 1);
    }
    let mut status = Status::Optimal;
    if let Err(st) = tab.optimize(&mut obj, ne, max_pivots) {
        status = if st == Status::Unbounded { Status::Numerical } else { st };
    }
    let infeas = -obj[width - 1];
    let b_scale = 1.0 + rows.iter().map(|&i| b[i].abs()).fold(0.0, f64::max);
    if status == Status::Optimal && infeas > 1e-9 * b_scale {
        status = Status::Infeasible;
    }
    if status == Status::Optimal {
        // drive remaining artificials out of the basis where possible
        for r in 0..m {
            if tab.basis[r] >= ne {
                if let Some(k) = (0..ne).find(|&k| tab.at(r, k).abs() > 1e-9) {
                    let mut dummy = vec![0.0; width];
                    tab.pivot(r, k, &mut dummy);
                }
            }
        }
        // phase 2
        let ce: Vec<f64> = cols.iter().map(|&(j, sg)| sg * c[j]).collect();
        let mut obj = vec![0.0; width];
        obj[..ne].copy_from_slice(&ce);
        for r in 0..m {
            let bc = if tab.basis[r] < ne { ce[tab.basis[r]] } else { 0.0 };
            if bc != 0.0 {
                for k in 0..width {
                    obj[k] -= bc * tab.at(r, k);
                }
            }
        }
        if let Err(st) = tab.optimize(&mut obj, ne, max_pivots) {
            status = st;
        }
    }

    // refactor the final basis
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; m0];
    if m > 0 {
        let ce: Vec<f64> = cols.iter().map(|&(j, sg)| sg * c[j]).collect();
        let column = |k: usize| -> Vec<f64> {
            if k < ne {
                let (j, sg) = cols[k];
                rows.iter().zip(&sign).map(|(&i, s)| s * sg * dense[i][j]).collect()
            } else {
                let mut e = vec![0.0; m];
                e[k - ne] = 1.0;
                e
            }
        };
        let mut bm = DMatrix::zeros(m, m);
        for (r, &k) in tab.basis.iter().enumerate() {
            for (i, v) in column(k).into_iter().enumerate() {
                bm[(i, r)] = v;
            }
        }
        let rhs = DVector::from_iterator(m, rows.iter().zip(&sign).map(|(&i, s)| s * b[i]));
        let cb = DVector::from_iterator(m, tab.basis.iter().map(|&k| if k < ne { ce[k] } else { 0.0 }));
        let lu = bm.clone().lu();
        let xb = lu.solve(&rhs);
        let yb = bm.transpose().lu().solve(&cb);
        match (xb, yb) {
            (Some(xb), Some(yb)) => {
                for (r, &k) in tab.basis.iter().enumerate() {
                    if k < ne {
                        let (j, sg) = cols[k];
                        x[j] += sg * xb[r];
                    }
                }
                for (r, &i) in rows.iter().enumerate() {
                    y[i] = sign[r] * yb[r];
                }
            }
            _ => {
                if status == Status::Optimal {
                    status = Status::Numerical;
                }
            }
        }
    }
    let aty = a.tr_mul_vec(&y);
    let s: Vec<f64> = (0..n).map(|j| c[j] - aty[j]).collect();
    let ax = a.mul_vec(&x);
    let rp: Vec<f64> = b.iter().zip(&ax).map(|(u, v)| u - v).collect();
    let rd: Vec<f64> = (0..n)
        .map(|j| match bounds[j] {
            VarBound::Free => s[j],
            VarBound::NonNeg => s[j].min(0.0),
        })
        .collect();
    let primal_objective = dot(c, &x);
    let dual_objective = dot(b, &y);
    let primal_residual = norm2(&rp);
    if status == Status::Optimal && !dropped_rows.is_empty() && primal_residual > 1e-7 * (1.0 + norm2(b) + norm2(c))
    {
        status = Status::Infeasible;
    }
    Ok(ConicSolution {
        status,
        relative_gap: (primal_objective - dual_objective).abs()
            / (1.0 + primal_objective.abs() + dual_objective.abs()),
        x,
        y,
        s,
        primal_objective,
        dual_objective,
        primal_residual,
        dual_residual: norm2(&rd),
        iterations: 0,
        dropped_rows,
        history: Vec::new(),
    })
}
