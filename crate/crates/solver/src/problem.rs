use serde::{Deserialize, Serialize};

use crate::linalg::svec_len;
use crate::SolverError;

/// One block of the variable vector.
///
/// PSD blocks hold `svec` of a symmetric matrix (see [`crate::linalg`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "dim", rename_all = "snake_case")]
pub enum Cone {
    Free(usize),
    NonNeg(usize),
    Soc(usize),
    Psd(usize),
}

impl Cone {
    /// Number of scalar coordinates occupied in the variable vector.
    pub fn len(&self) -> usize {
        match *self {
            Cone::Free(n) | Cone::NonNeg(n) | Cone::Soc(n) => n,
            Cone::Psd(d) => svec_len(d),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sparse matrix in coordinate form. Duplicate entries are summed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        SparseMatrix { nrows, ncols, entries: Vec::new() }
    }

    pub fn from_dense(rows: &[Vec<f64>], ncols: usize) -> Self {
        let mut m = SparseMatrix::new(rows.len(), ncols);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    m.entries.push((i, j, v));
                }
            }
        }
        m
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        for &(i, j, v) in &self.entries {
            out[i] += v * x[j];
        }
        out
    }

    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for &(i, j, v) in &self.entries {
            out[j] += v * y[i];
        }
        out
    }
}

/// Standard-form cone program
///
/// ```text
/// primal:  minimize c'x  subject to  A x = b,  x in K
/// dual:    maximize b'y  subject to  A'y + s = c,  s in K*
/// ```
///
/// `K` is the product of `cones` in order. Nonnegative, second-order and PSD
/// cones are self-dual; the dual of a free block is `{0}`. Serializes to a
/// plain JSON document suitable for cross-checking with external solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem {
    pub c: Vec<f64>,
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

impl ConicProblem {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n: usize = self.cones.iter().map(Cone::len).sum();
        if n != self.c.len() {
            return Err(SolverError::Dimension(format!(
                "cone sizes sum to {n} but c has {} entries",
                self.c.len()
            )));
        }
        if self.a.ncols != n || self.a.nrows != self.b.len() {
            return Err(SolverError::Dimension(format!(
                "A is {}x{}, expected {}x{}",
                self.a.nrows,
                self.a.ncols,
                self.b.len(),
                n
            )));
        }
        for &(i, j, v) in &self.a.entries {
            if i >= self.a.nrows || j >= self.a.ncols {
                return Err(SolverError::Dimension(format!("A entry ({i}, {j}) out of range")));
            }
            if !v.is_finite() {
                return Err(SolverError::NonFinite("A"));
            }
        }
        if self.c.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite("c"));
        }
        if self.b.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite("b"));
        }
        for cone in &self.cones {
            if let Cone::Soc(0) = cone {
                return Err(SolverError::Dimension("second-order cone of dimension 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
    Numerical,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::MaxIter => "max_iter",
            Status::Numerical => "numerical",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Snapshot of one interior-point iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `<x, s>`
    pub complementarity: f64,
    /// `<x, c - A'y - s>`
    pub dual_residual_term: f64,
    /// `<y, b - A x>`
    pub primal_residual_term: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// On `MaxIter` or `Numerical` the point returned is the dual-feasible iterate
/// with the largest dual objective, when one was seen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: Status,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `||b - A x||_2`
    pub primal_residual: f64,
    /// `||c - A'y - s||_2`
    pub dual_residual: f64,
    /// `|c'x - b'y| / (1 + |c'x| + |b'y|)`
    pub relative_gap: f64,
    pub iterations: usize,
    /// Equality rows dropped as linearly dependent.
    pub dropped_rows: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<IterateRecord>,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Fraction of the step to the cone boundary.
    pub step_fraction: f64,
    /// Relative pivot tolerance for dropping dependent equality rows.
    pub presolve_tol: f64,
    pub record_history: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feas_tol: 1e-7,
            gap_tol: 1e-7,
            max_iter: 200,
            step_fraction: 0.99,
            presolve_tol: 1e-9,
            record_history: false,
        }
    }
}
