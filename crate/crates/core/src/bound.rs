//! Semidefinite upper bound on the worst-case expected optimal value over
//! a 2-Wasserstein ball around the empirical distribution.
//!
//! ```text
//! min  lambda eps^2 + (1/N) sum_i (alpha_i + r rho_i)
//! s.t. alpha_i g1 g1' - H^i(lambda) + E' Diag(u_i) E + sum_j v_ij Q_j + rho_i I  in  IA
//!      lambda >= 0, rho_i >= 0
//! ```
//!
//! `rho_i` and the identity term are present only when a trace bound `r` is
//! supplied.
//!
//! Every lifted point satisfies `Ez = 0`, so the moment matrices live on the
//! face `{V W V'}` with `V` spanning `null(E)` and have no interior in the
//! full PSD cone. The problem is therefore solved with the PSD block
//! restricted to that face and `u` eliminated; afterwards `u_i = t_i 1` is
//! recovered in closed form so that the full constraint matrix, including
//! `E' Diag(u_i) E`, lies in the inner approximation.

use std::time::Instant;

use log::{debug, warn};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wasscopos_solver::{solve, ConicProblem, DualBuilder, SolverOptions, Status, Var};

use crate::cones::{copositivity_spot_check, emit_membership_on_face, IADecomposition, SymExpr};
use crate::error::{Error, Result};
use crate::model::{homogenize, solve_deterministic, Dataset, MixedBinaryProgram};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundOptions {
    pub solver: SolverOptions,
    /// samples per constraint matrix in the copositivity check; 0 disables it
    pub spot_check_trials: usize,
    pub spot_check_tol: f64,
    pub spot_check_seed: u64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions { solver: SolverOptions::default(), spot_check_trials: 10_000, spot_check_tol: 1e-6, spot_check_seed: 0 }
    }
}

/// Orthonormal bases of `null(E)` and `range(E')`, with `E'E = R diag(d) R'`.
#[derive(Debug, Clone)]
struct Face {
    null: DMatrix<f64>,
    range: DMatrix<f64>,
    range_eigs: Vec<f64>,
    ete: DMatrix<f64>,
}

fn face_of(e: &DMatrix<f64>) -> Option<Face> {
    if e.nrows() == 0 {
        return None;
    }
    let ete = e.transpose() * e;
    let eig = SymmetricEigen::new(ete.clone());
    let tol = 1e-10 * eig.eigenvalues.amax().max(1.0);
    let (null_idx, range_idx): (Vec<usize>, Vec<usize>) = (0..ete.nrows()).partition(|&i| eig.eigenvalues[i] <= tol);
    if range_idx.is_empty() {
        return None;
    }
    Some(Face {
        null: eig.eigenvectors.select_columns(null_idx.iter()),
        range: eig.eigenvectors.select_columns(range_idx.iter()),
        range_eigs: range_idx.iter().map(|&i| eig.eigenvalues[i]).collect(),
        ete,
    })
}

/// Smallest `t >= 0` with `X + t E'E` PSD, given `V'XV` PD: by the Schur
/// complement in the basis `(V, R)` this is the largest eigenvalue of
/// `D^{-1/2} (B'A^{-1}B - C) D^{-1/2}` with `A = V'XV`, `B = V'XR`,
/// `C = R'XR`, `D = diag(d)`.
fn min_multiplier(face: &Face, x: &DMatrix<f64>) -> f64 {
    let (v, r) = (&face.null, &face.range);
    let a = v.transpose() * x * v;
    let bm = v.transpose() * x * r;
    let c = r.transpose() * x * r;
    let eig = SymmetricEigen::new(a);
    let floor = 1e-14 * eig.eigenvalues.amax().max(1e-300);
    let inv_vals = eig.eigenvalues.map(|l| 1.0 / l.max(floor));
    let a_inv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
    let mut s = bm.transpose() * a_inv * bm - c;
    for i in 0..s.nrows() {
        for j in 0..s.ncols() {
            s[(i, j)] /= (face.range_eigs[i] * face.range_eigs[j]).sqrt();
        }
    }
    if s.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(s).eigenvalues.max().max(0.0)
}

/// The assembled bound problem with handles to its variables.
pub struct BoundModel {
    pub builder: DualBuilder,
    pub lambda: Var,
    pub alpha: Vec<Var>,
    pub rho: Vec<Var>,
    pub v: Vec<Vec<Var>>,
    pub certificates: Vec<IADecomposition>,
    /// per-sample target without the `E' Diag(u) E` term
    targets: Vec<SymExpr>,
    face: Option<Face>,
    support: crate::model::SupportCone,
}

impl BoundModel {
    pub fn problem(&self) -> ConicProblem {
        self.builder.build()
    }

    /// Recovers `u_i = t_i 1` for every sample at a solution.
    pub fn recover_u(&self, y: &[f64]) -> Vec<f64> {
        let Some(face) = &self.face else { return vec![0.0; self.targets.len()] };
        (0..self.targets.len())
            .map(|i| {
                let x = self.targets[i].eval(y) - self.certificates[i].s_matrix(y);
                let t = min_multiplier(face, &x);
                1.01 * t + 1e-9
            })
            .collect()
    }

    /// Full constraint matrix of sample `i` with all `u` entries equal to `t`.
    pub fn constraint_matrix(&self, i: usize, y: &[f64], t: f64) -> DMatrix<f64> {
        let g = self.targets[i].eval(y);
        match &self.face {
            Some(face) => g + &face.ete * t,
            None => g,
        }
    }
}

pub fn build(prog: &MixedBinaryProgram, data: &Dataset, epsilon: f64, r: Option<f64>) -> Result<BoundModel> {
    if data.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Config(format!("epsilon must be a nonnegative number, got {epsilon}")));
    }
    if let Some(r) = r {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Config(format!("trace bound r must be positive, got {r}")));
        }
    }
    if !prog.binary_bounds_ok() {
        return Err(Error::Config("binary variables need x_j <= 1; enforce or declare the bounds first".into()));
    }
    let h = homogenize(prog, data)?;
    let nsamp = data.len();
    let inv_n = 1.0 / nsamp as f64;
    let d = prog.k() + prog.n();
    let m = prog.m();
    let mut b = DualBuilder::new();
    let lambda = b.add_nonneg_var(epsilon * epsilon);
    let face = if m > 0 { face_of(&h.e) } else { None };
    let mut alpha = Vec::with_capacity(nsamp);
    let mut rho = Vec::new();
    let mut v = Vec::with_capacity(nsamp);
    let mut certificates = Vec::with_capacity(nsamp);
    let mut targets = Vec::with_capacity(nsamp);
    for i in 0..nsamp {
        let a_i = b.add_var(inv_n);
        let mut t = SymExpr::new(d);
        t.add(0, 0, Some(a_i), 1.0);
        t.add_matrix(&h.h_const, None, -1.0);
        t.add_matrix(&h.k_i[i], Some(lambda), -1.0);
        let v_i: Vec<Var> = h
            .q
            .iter()
            .map(|q| {
                let var = b.add_var(0.0);
                t.add_matrix(q, Some(var), 1.0);
                var
            })
            .collect();
        if let Some(r) = r {
            let p = b.add_nonneg_var(inv_n * r);
            for j in 0..d {
                t.add(j, j, Some(p), 1.0);
            }
            rho.push(p);
        }
        certificates.push(emit_membership_on_face(&mut b, &t, &prog.support, face.as_ref().map(|f| &f.null))?);
        targets.push(t);
        alpha.push(a_i);
        v.push(v_i);
    }
    Ok(BoundModel { builder: b, lambda, alpha, rho, v, certificates, targets, face, support: prog.support.clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub epsilon: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub value: f64,
    pub lambda: f64,
    pub status: Status,
    pub runtime_ms: f64,
    /// optimal status and every constraint matrix passed the spot check
    pub certified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub alpha: Vec<f64>,
    /// recovered `u_i = t_i 1`, one `t_i` per sample
    pub u_scale: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub relative_gap: f64,
    pub spot_check_failures: usize,
    /// smallest normalized `z'Gz` seen across samples
    pub spot_check_worst: f64,
}

impl BoundResult {
    /// The record written by the command-line front end.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "epsilon": self.epsilon,
            "N": self.n,
            "value": self.value,
            "lambda": self.lambda,
            "status": self.status,
            "runtime_ms": self.runtime_ms,
        })
    }
}

pub fn solve_bound(
    prog: &MixedBinaryProgram,
    data: &Dataset,
    epsilon: f64,
    r: Option<f64>,
    opts: &BoundOptions,
) -> Result<BoundResult> {
    let start = Instant::now();
    let model = build(prog, data, epsilon, r)?;
    let problem = model.problem();
    let sol = solve(&problem, &opts.solver)?;
    let b = &model.builder;
    let value = b.objective(&sol);
    let (mut failures, mut worst) = (0, f64::INFINITY);
    let u_scale = model.recover_u(&sol.y);
    let finite = sol.y.iter().all(|v| v.is_finite());
    if opts.spot_check_trials > 0 && finite && matches!(sol.status, Status::Optimal | Status::MaxIter | Status::Numerical) {
        for i in 0..data.len() {
            let g = model.constraint_matrix(i, &sol.y, u_scale[i]);
            let chk = copositivity_spot_check(
                &g,
                &model.support,
                opts.spot_check_trials,
                opts.spot_check_tol,
                opts.spot_check_seed.wrapping_add(i as u64),
            );
            worst = worst.min(chk.worst);
            if !chk.pass {
                failures += 1;
            }
        }
    }
    if sol.status != Status::Optimal {
        warn!("bound at epsilon {epsilon} (N = {}) finished with status {}", data.len(), sol.status);
    }
    debug!("bound eps={epsilon} N={} value={value} iters={}", data.len(), sol.iterations);
    Ok(BoundResult {
        epsilon,
        n: data.len(),
        value,
        lambda: b.value(&sol, model.lambda),
        status: sol.status,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        certified: sol.status == Status::Optimal && failures == 0,
        r,
        alpha: model.alpha.iter().map(|&a| b.value(&sol, a)).collect(),
        u_scale,
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        relative_gap: sol.relative_gap,
        spot_check_failures: failures,
        spot_check_worst: if worst.is_finite() { worst } else { 0.0 },
    })
}

/// Average of the exact per-sample optima.
pub fn saa_value(prog: &MixedBinaryProgram, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    let vals: Vec<f64> = data
        .samples()
        .par_iter()
        .map(|xi| solve_deterministic(prog, xi).map(|r| r.0))
        .collect::<Result<_>>()?;
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}
