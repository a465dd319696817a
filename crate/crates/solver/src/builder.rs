//! Modeling helper for problems written in dual (inequality) form:
//!
//! ```text
//! minimize  sum_k cost_k y_k
//! subject to  F_0 + sum_k y_k F_k  in  K
//! ```
//!
//! where each block of `K` is nonnegative, second-order or PSD. This maps to
//! the dual side of [`ConicProblem`] with `c = F_0`, `A' = -[F_1 ... F_m]`,
//! `b = -cost`.

use nalgebra::DMatrix;

use crate::linalg::{smat, svec_index, svec_len, SQRT2};
use crate::problem::{Cone, ConicProblem, ConicSolution, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockId(usize);

#[derive(Debug, Clone, Default)]
pub struct DualBuilder {
    costs: Vec<f64>,
    /// nonnegative scalar rows, collected into one block at build time
    nonneg: Vec<Vec<(Option<Var>, f64)>>,
    blocks: Vec<Cone>,
    /// per block: (coordinate, variable, coefficient)
    terms: Vec<Vec<(usize, Option<Var>, f64)>>,
}

impl DualBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.costs.len()
    }

    pub fn add_var(&mut self, cost: f64) -> Var {
        self.costs.push(cost);
        Var(self.costs.len() - 1)
    }

    pub fn add_nonneg_var(&mut self, cost: f64) -> Var {
        let v = self.add_var(cost);
        self.nonneg.push(vec![(Some(v), 1.0)]);
        v
    }

    /// Adds the scalar constraint `sum terms >= 0`; `None` is the constant.
    pub fn add_nonneg_row(&mut self, terms: Vec<(Option<Var>, f64)>) {
        self.nonneg.push(terms);
    }

    pub fn add_soc_block(&mut self, dim: usize) -> BlockId {
        self.blocks.push(Cone::Soc(dim));
        self.terms.push(Vec::new());
        BlockId(self.blocks.len() - 1)
    }

    pub fn add_psd_block(&mut self, dim: usize) -> BlockId {
        self.blocks.push(Cone::Psd(dim));
        self.terms.push(Vec::new());
        BlockId(self.blocks.len() - 1)
    }

    pub fn add_soc_entry(&mut self, block: BlockId, i: usize, var: Option<Var>, coef: f64) {
        debug_assert!(matches!(self.blocks[block.0], Cone::Soc(d) if i < d));
        if coef != 0.0 {
            self.terms[block.0].push((i, var, coef));
        }
    }

    /// Adds `coef * var` to entries `(i, j)` and `(j, i)` of a PSD block
    /// (once when `i == j`).
    pub fn add_psd_entry(&mut self, block: BlockId, i: usize, j: usize, var: Option<Var>, coef: f64) {
        let Cone::Psd(d) = self.blocks[block.0] else { panic!("block {} is not PSD", block.0) };
        if coef == 0.0 {
            return;
        }
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let scale = if r == c { 1.0 } else { SQRT2 };
        self.terms[block.0].push((svec_index(d, r, c), var, coef * scale));
    }

    fn offsets(&self) -> (usize, Vec<usize>) {
        let mut off = Vec::with_capacity(self.blocks.len());
        let mut next = self.nonneg.len();
        for b in &self.blocks {
            off.push(next);
            next += b.len();
        }
        (next, off)
    }

    pub fn build(&self) -> ConicProblem {
        let (n, off) = self.offsets();
        let m = self.costs.len();
        let mut c = vec![0.0; n];
        let mut a = SparseMatrix::new(m, n);
        let mut put = |coord: usize, var: Option<Var>, coef: f64| match var {
            None => c[coord] += coef,
            Some(Var(k)) => a.push(k, coord, -coef),
        };
        for (r, row) in self.nonneg.iter().enumerate() {
            for &(v, coef) in row {
                put(r, v, coef);
            }
        }
        for (bi, terms) in self.terms.iter().enumerate() {
            for &(coord, v, coef) in terms {
                put(off[bi] + coord, v, coef);
            }
        }
        let mut cones = Vec::with_capacity(self.blocks.len() + 1);
        if !self.nonneg.is_empty() {
            cones.push(Cone::NonNeg(self.nonneg.len()));
        }
        cones.extend(self.blocks.iter().copied());
        ConicProblem { c, a, b: self.costs.iter().map(|v| -v).collect(), cones }
    }

    pub fn value(&self, sol: &ConicSolution, v: Var) -> f64 {
        sol.y[v.0]
    }

    /// Objective of the builder's minimization at the dual iterate.
    pub fn objective(&self, sol: &ConicSolution) -> f64 {
        -sol.dual_objective
    }

    /// Slack matrix `F_0 + sum y_k F_k` of a PSD block at the solution.
    pub fn psd_slack(&self, sol: &ConicSolution, block: BlockId) -> DMatrix<f64> {
        let Cone::Psd(d) = self.blocks[block.0] else { panic!("block {} is not PSD", block.0) };
        let (_, off) = self.offsets();
        smat(d, &sol.s[off[block.0]..off[block.0] + svec_len(d)])
    }

    /// Evaluates the PSD block expression at arbitrary `y`.
    pub fn psd_expr(&self, y: &[f64], block: BlockId) -> DMatrix<f64> {
        let Cone::Psd(d) = self.blocks[block.0] else { panic!("block {} is not PSD", block.0) };
        let mut v = vec![0.0; svec_len(d)];
        for &(coord, var, coef) in &self.terms[block.0] {
            v[coord] += coef * var.map_or(1.0, |Var(k)| y[k]);
        }
        smat(d, &v)
    }
}
