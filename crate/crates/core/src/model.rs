//! Uncertain mixed 0-1 linear programs
//!
//! ```text
//! v(xi) = max { (F xi)'x : A x = b, x >= 0, x_j in {0,1} for j in B }
//! ```
//!
//! with `xi` ranging over the slice `xi_1 = 1` of a closed convex cone.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use wasscopos_solver::{dense_independent_rows, solve_lp, SparseMatrix, Status, VarBound};

use crate::error::{Error, Result};

/// Homogenized support cone over `R^k`.
#[derive(Debug, Clone, PartialEq)]
pub enum SupportCone {
    /// `{xi : xi >= 0}`, i.e. polyhedral with `P = I`.
    NonnegOrthant(usize),
    /// `{xi : P xi >= 0}`
    Polyhedral(DMatrix<f64>),
    /// `{xi : ||(xi_2, ..., xi_k)|| <= xi_1}`
    SecondOrder(usize),
}

impl SupportCone {
    pub fn dim(&self) -> usize {
        match self {
            SupportCone::NonnegOrthant(k) | SupportCone::SecondOrder(k) => *k,
            SupportCone::Polyhedral(p) => p.ncols(),
        }
    }

    pub fn contains(&self, xi: &[f64], tol: f64) -> bool {
        match self {
            SupportCone::NonnegOrthant(_) => xi.iter().all(|&v| v >= -tol),
            SupportCone::Polyhedral(p) => (0..p.nrows()).all(|r| {
                let v: f64 = (0..p.ncols()).map(|c| p[(r, c)] * xi[c]).sum();
                v >= -tol
            }),
            SupportCone::SecondOrder(_) => soc_margin(xi) >= -tol,
        }
    }

    /// Membership in the dual cone. For the polyhedral cone this asks for
    /// a nonnegative `w` with `P'w = s`, decided by an LP.
    pub fn dual_contains(&self, s: &[f64], tol: f64) -> bool {
        match self {
            SupportCone::NonnegOrthant(_) => s.iter().all(|&v| v >= -tol),
            SupportCone::SecondOrder(_) => soc_margin(s) >= -tol,
            SupportCone::Polyhedral(p) => {
                let (pr, k) = (p.nrows(), p.ncols());
                // min 1'(e+ + e-)  s.t.  P'w + e+ - e- = s
                let mut a = SparseMatrix::new(k, pr + 2 * k);
                for c in 0..k {
                    for r in 0..pr {
                        a.push(c, r, p[(r, c)]);
                    }
                    a.push(c, pr + c, 1.0);
                    a.push(c, pr + k + c, -1.0);
                }
                let mut cost = vec![0.0; pr + 2 * k];
                cost[pr..].iter_mut().for_each(|v| *v = 1.0);
                match solve_lp(&cost, &a, s, &vec![VarBound::NonNeg; pr + 2 * k]) {
                    Ok(sol) if sol.status == Status::Optimal => sol.primal_objective <= tol,
                    _ => false,
                }
            }
        }
    }
}

fn soc_margin(v: &[f64]) -> f64 {
    v[0] - v[1..].iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// How Assumption-3 style bounds `x_j <= 1` on binaries are secured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BinaryBounds {
    #[default]
    Unchecked,
    /// explicit rows `x_j + s_j = 1` were added
    Enforced,
    /// implied by the constraints themselves (e.g. unit network flow)
    Implied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedBinaryProgram {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// `n x k`
    pub f: DMatrix<f64>,
    /// zero-based indices of binary variables
    pub binary_set: BTreeSet<usize>,
    pub support: SupportCone,
    /// redundant trace bound `z'z <= r`
    pub r: Option<f64>,
    pub binary_bounds: BinaryBounds,
    /// rows removed from the caller's `A` as linearly dependent
    pub dropped_rows: Vec<usize>,
}

impl MixedBinaryProgram {
    /// Validates dimensions and removes dependent equality rows.
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        f: DMatrix<f64>,
        binary_set: BTreeSet<usize>,
        support: SupportCone,
        r: Option<f64>,
    ) -> Result<Self> {
        let (m, n) = a.shape();
        if b.len() != m {
            return Err(Error::dim("b", format!("expected {m} entries, got {}", b.len())));
        }
        if f.nrows() != n {
            return Err(Error::dim("F", format!("expected {n} rows, got {}", f.nrows())));
        }
        let k = f.ncols();
        if support.dim() != k {
            return Err(Error::dim("support", format!("cone over R^{} but F has {k} columns", support.dim())));
        }
        if let SupportCone::NonnegOrthant(0) | SupportCone::SecondOrder(0) = support {
            return Err(Error::dim("support", "zero-dimensional cone"));
        }
        if let Some(&j) = binary_set.iter().find(|&&j| j >= n) {
            return Err(Error::dim("binary_set", format!("index {} exceeds n = {n}", j + 1)));
        }
        if let Some(r) = r {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("trace bound r must be positive, got {r}")));
            }
        }
        if a.iter().chain(b.iter()).chain(f.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Config("instance contains non-finite values".into()));
        }
        let rows: Vec<Vec<f64>> = (0..m).map(|i| a.row(i).iter().copied().collect()).collect();
        let keep = dense_independent_rows(&rows, 1e-9);
        let aug: Vec<Vec<f64>> = rows.iter().zip(b.iter()).map(|(r, bi)| r.iter().copied().chain([*bi]).collect()).collect();
        let keep_aug = dense_independent_rows(&aug, 1e-9);
        if keep_aug.iter().filter(|&&x| x).count() > keep.iter().filter(|&&x| x).count() {
            return Err(Error::Infeasible("equality system A x = b is inconsistent".into()));
        }
        let kept: Vec<usize> = (0..m).filter(|&i| keep[i]).collect();
        let dropped_rows: Vec<usize> = (0..m).filter(|&i| !keep[i]).collect();
        let a = a.select_rows(kept.iter());
        let b = b.select_rows(kept.iter());
        Ok(MixedBinaryProgram {
            a,
            b,
            f,
            binary_set,
            support,
            r,
            binary_bounds: BinaryBounds::Unchecked,
            dropped_rows,
        })
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn k(&self) -> usize {
        self.f.ncols()
    }

    /// Whether binaries are known to satisfy `x_j <= 1` on the LP relaxation.
    pub fn binary_bounds_ok(&self) -> bool {
        self.binary_set.is_empty() || self.binary_bounds != BinaryBounds::Unchecked
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: InstanceJson = serde_json::from_str(text)?;
        raw.into_program()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> InstanceJson {
        let rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        InstanceJson {
            a: rows(&self.a),
            b: self.b.iter().copied().collect(),
            f: rows(&self.f),
            binary_set: self.binary_set.iter().map(|j| j + 1).collect(),
            support: match &self.support {
                SupportCone::NonnegOrthant(_) => SupportJson { kind: SupportKind::NonnegOrthant, p: None },
                SupportCone::Polyhedral(p) => SupportJson { kind: SupportKind::Polyhedral, p: Some(rows(p)) },
                SupportCone::SecondOrder(_) => SupportJson { kind: SupportKind::Soc, p: None },
            },
            r: self.r,
            binary_bounds: self.binary_bounds,
        }
    }
}

/// Adds `x_j + s_j = 1, s_j >= 0` for every binary `j`, unless the caller
/// declares the bounds implied. `F` gets zero rows for the new slacks.
pub fn enforce_binary_bounds(prog: &MixedBinaryProgram, implied: bool) -> MixedBinaryProgram {
    let mut out = prog.clone();
    if prog.binary_set.is_empty() {
        return out;
    }
    if implied {
        out.binary_bounds = BinaryBounds::Implied;
        return out;
    }
    if prog.binary_bounds == BinaryBounds::Enforced {
        return out;
    }
    let (m, n) = prog.a.shape();
    let nb = prog.binary_set.len();
    let mut a = DMatrix::zeros(m + nb, n + nb);
    a.view_mut((0, 0), (m, n)).copy_from(&prog.a);
    let mut b = DVector::zeros(m + nb);
    b.rows_mut(0, m).copy_from(&prog.b);
    for (t, &j) in prog.binary_set.iter().enumerate() {
        a[(m + t, j)] = 1.0;
        a[(m + t, n + t)] = 1.0;
        b[m + t] = 1.0;
    }
    out.f = prog.f.clone().resize_vertically(n + nb, 0.0);
    out.a = a;
    out.b = b;
    out.binary_bounds = BinaryBounds::Enforced;
    out
}

/// Samples with the homogenizing coordinate `xi_1 = 1` already in place.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    k: usize,
    samples: Vec<Vec<f64>>,
}

impl Dataset {
    /// `samples` are full homogenized vectors of length `k`.
    pub fn new(k: usize, samples: Vec<Vec<f64>>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if s.len() != k {
                return Err(Error::dim("dataset", format!("sample {i} has length {}, expected {k}", s.len())));
            }
            if (s[0] - 1.0).abs() > 1e-12 {
                return Err(Error::dim("dataset", format!("sample {i} has first coordinate {}", s[0])));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("sample {i} is not finite")));
            }
        }
        Ok(Dataset { k, samples })
    }

    /// Prepends the homogenizing 1 to each raw observation.
    pub fn from_observations(observations: &[Vec<f64>]) -> Result<Self> {
        let k = observations.first().map_or(1, |o| o.len() + 1);
        Dataset::new(k, observations.iter().map(|o| std::iter::once(1.0).chain(o.iter().copied()).collect()).collect())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset { k: self.k, samples: idx.iter().map(|&i| self.samples[i].clone()).collect() }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: DatasetJson = serde_json::from_str(text)?;
        let ds = Dataset::from_observations(&raw.samples)?;
        if !raw.samples.is_empty() && ds.k != raw.k {
            return Err(Error::dim("dataset", format!("k = {} but observations have length {}", raw.k, ds.k - 1)));
        }
        Ok(Dataset { k: raw.k, ..ds })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> DatasetJson {
        DatasetJson { k: self.k, samples: self.samples.iter().map(|s| s[1..].to_vec()).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetJson {
    pub k: usize,
    pub samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportKind {
    NonnegOrthant,
    Polyhedral,
    Soc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportJson {
    #[serde(rename = "type")]
    pub kind: SupportKind,
    #[serde(default, rename = "P", skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<f64>>>,
}

/// On-disk instance: matrices row-major, `binary_set` one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceJson {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    #[serde(default)]
    pub binary_set: Vec<usize>,
    pub support: SupportJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default)]
    pub binary_bounds: BinaryBounds,
}

fn dense(what: &'static str, rows: &[Vec<f64>], ncols: Option<usize>) -> Result<DMatrix<f64>> {
    let nc = ncols.unwrap_or_else(|| rows.first().map_or(0, Vec::len));
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != nc) {
        return Err(Error::dim(what, format!("row {i} has {} entries, expected {nc}", r.len())));
    }
    Ok(DMatrix::from_fn(rows.len(), nc, |i, j| rows[i][j]))
}

impl InstanceJson {
    pub fn into_program(self) -> Result<MixedBinaryProgram> {
        let f = dense("F", &self.f, None)?;
        let n = f.nrows();
        let a = dense("A", &self.a, Some(n))?;
        let k = f.ncols();
        let support = match self.support.kind {
            SupportKind::NonnegOrthant => SupportCone::NonnegOrthant(k),
            SupportKind::Soc => SupportCone::SecondOrder(k),
            SupportKind::Polyhedral => {
                let p = self.support.p.as_ref().ok_or_else(|| Error::Config("polyhedral support needs P".into()))?;
                SupportCone::Polyhedral(dense("P", p, Some(k))?)
            }
        };
        if let Some(&j) = self.binary_set.iter().find(|&&j| j == 0 || j > n) {
            return Err(Error::dim("binary_set", format!("index {j} outside 1..={n}")));
        }
        let binary: BTreeSet<usize> = self.binary_set.iter().map(|j| j - 1).collect();
        let mut prog = MixedBinaryProgram::new(a, DVector::from_vec(self.b), f, binary, support, self.r)?;
        prog.binary_bounds = self.binary_bounds;
        Ok(prog)
    }
}

/// Matrix data of the lifted per-sample problems, with `z = (xi; x)`.
#[derive(Debug, Clone)]
pub struct HomogenizedData {
    /// `(-b e_1' | A)`, `m x (k+n)`
    pub e: DMatrix<f64>,
    /// `(e_1; 0)`
    pub g1: DVector<f64>,
    /// one per binary index, in increasing order
    pub q: Vec<DMatrix<f64>>,
    /// `[[0, F'/2], [F/2, 0]]`
    pub h_const: DMatrix<f64>,
    /// `H^i(lambda) = h_const + lambda * k_i[i]`
    pub k_i: Vec<DMatrix<f64>>,
}

impl HomogenizedData {
    pub fn h(&self, i: usize, lambda: f64) -> DMatrix<f64> {
        &self.h_const + &self.k_i[i] * lambda
    }
}

pub fn homogenize(prog: &MixedBinaryProgram, data: &Dataset) -> Result<HomogenizedData> {
    let (m, n, k) = (prog.m(), prog.n(), prog.k());
    if data.k() != k {
        return Err(Error::dim("dataset", format!("samples have dimension {}, F has {k} columns", data.k())));
    }
    let d = k + n;
    let mut e = DMatrix::zeros(m, d);
    for i in 0..m {
        e[(i, 0)] = -prog.b[i];
        for j in 0..n {
            e[(i, k + j)] = prog.a[(i, j)];
        }
    }
    let mut g1 = DVector::zeros(d);
    g1[0] = 1.0;
    let q = prog
        .binary_set
        .iter()
        .map(|&j| {
            let mut qm = DMatrix::zeros(d, d);
            qm[(k + j, k + j)] = 1.0;
            qm[(k + j, 0)] = -0.5;
            qm[(0, k + j)] = -0.5;
            qm
        })
        .collect();
    let mut h_const = DMatrix::zeros(d, d);
    for j in 0..n {
        for c in 0..k {
            h_const[(k + j, c)] = 0.5 * prog.f[(j, c)];
            h_const[(c, k + j)] = 0.5 * prog.f[(j, c)];
        }
    }
    let k_i = data
        .samples()
        .iter()
        .map(|xh| {
            let norm2: f64 = xh.iter().map(|v| v * v).sum();
            let mut km = DMatrix::zeros(d, d);
            for r in 0..k {
                km[(r, r)] = -1.0;
                km[(r, 0)] += xh[r];
                km[(0, r)] += xh[r];
            }
            km[(0, 0)] -= norm2;
            km
        })
        .collect();
    Ok(HomogenizedData { e, g1, q, h_const, k_i })
}

/// Exact `v(xi)`: one LP per assignment of the binaries.
pub fn solve_deterministic(prog: &MixedBinaryProgram, xi: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (m, n, k) = (prog.m(), prog.n(), prog.k());
    if xi.len() != k {
        return Err(Error::dim("xi", format!("length {}, expected {k}", xi.len())));
    }
    let obj: Vec<f64> = (0..n).map(|j| (0..k).map(|c| prog.f[(j, c)] * xi[c]).sum()).collect();
    let binaries: Vec<usize> = prog.binary_set.iter().copied().collect();
    if binaries.len() > 30 {
        return Err(Error::Config(format!("{} binaries is too many to enumerate", binaries.len())));
    }
    let continuous: Vec<usize> = (0..n).filter(|j| !prog.binary_set.contains(j)).collect();
    let mut sub = SparseMatrix::new(m, continuous.len());
    for (cj, &j) in continuous.iter().enumerate() {
        for i in 0..m {
            sub.push(i, cj, prog.a[(i, j)]);
        }
    }
    let cost: Vec<f64> = continuous.iter().map(|&j| -obj[j]).collect();
    let bounds = vec![VarBound::NonNeg; continuous.len()];
    let b_scale = 1.0 + prog.b.amax();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u64..(1u64 << binaries.len()) {
        let mut rhs: Vec<f64> = prog.b.iter().copied().collect();
        let mut x = vec![0.0; n];
        let mut val = 0.0;
        for (t, &j) in binaries.iter().enumerate() {
            if mask >> t & 1 == 1 {
                x[j] = 1.0;
                val += obj[j];
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r -= prog.a[(i, j)];
                }
            }
        }
        if continuous.is_empty() {
            if rhs.iter().any(|r| r.abs() > 1e-9 * b_scale) {
                continue;
            }
        } else {
            let sol = solve_lp(&cost, &sub, &rhs, &bounds)?;
            match sol.status {
                Status::Optimal => {}
                Status::Infeasible => continue,
                Status::Unbounded => {
                    return Err(Error::Unbounded("v(xi) is unbounded; the feasible set must be bounded".into()))
                }
                status => return Err(Error::NonOptimal { status }),
            }
            val -= sol.primal_objective;
            for (cj, &j) in continuous.iter().enumerate() {
                x[j] = sol.x[cj];
            }
        }
        if best.as_ref().is_none_or(|b| val > b.0) {
            best = Some((val, x));
        }
    }
    best.ok_or_else(|| Error::Infeasible("no feasible x for this instance".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ssa() -> MixedBinaryProgram {
        let f = DMatrix::from_fn(3, 4, |r, c| if c == r + 1 { 1.0 } else { 0.0 });
        MixedBinaryProgram::new(
            DMatrix::from_element(1, 3, 1.0),
            DVector::from_element(1, 1.0),
            f,
            BTreeSet::new(),
            SupportCone::NonnegOrthant(4),
            None,
        )
        .unwrap()
    }

    #[test]
    fn e_matrix_layout() {
        let h = homogenize(&ssa(), &Dataset::from_observations(&[vec![3.0, 1.0, 2.0]]).unwrap()).unwrap();
        assert_eq!(h.e.row(0).iter().copied().collect::<Vec<_>>(), vec![-1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(h.g1[0], 1.0);
        assert_eq!(h.h(0, 0.0), h.h_const);
    }

    #[test]
    fn q_matrix_on_small_example() {
        let prog = MixedBinaryProgram::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
            DMatrix::from_element(1, 2, 0.0),
            BTreeSet::from([0]),
            SupportCone::NonnegOrthant(2),
            None,
        )
        .unwrap();
        let h = homogenize(&prog, &Dataset::from_observations(&[vec![0.5]]).unwrap()).unwrap();
        let z = DVector::from_vec(vec![1.0, 0.5, 0.3]);
        let v = (z.transpose() * &h.q[0] * &z)[0];
        assert!((v + 0.21).abs() < 1e-15);
    }

    #[test]
    fn highest_order_statistic() {
        let (v, x) = solve_deterministic(&ssa(), &[1.0, 3.0, 1.0, 2.0]).unwrap();
        assert_eq!(v, 3.0);
        assert_eq!(x, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn dependent_rows_are_dropped_and_inconsistency_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let f = DMatrix::zeros(2, 1);
        let p = MixedBinaryProgram::new(
            a.clone(),
            DVector::from_vec(vec![1.0, 2.0]),
            f.clone(),
            BTreeSet::new(),
            SupportCone::NonnegOrthant(1),
            None,
        )
        .unwrap();
        assert_eq!(p.m(), 1);
        assert_eq!(p.dropped_rows, vec![1]);
        let bad = MixedBinaryProgram::new(
            a,
            DVector::from_vec(vec![1.0, 3.0]),
            f,
            BTreeSet::new(),
            SupportCone::NonnegOrthant(1),
            None,
        );
        assert!(matches!(bad, Err(Error::Infeasible(_))));
    }

    #[test]
    fn empty_binary_set_is_unchanged_by_enforcement() {
        let p = ssa();
        assert_eq!(enforce_binary_bounds(&p, false), p);
    }

    #[test]
    fn instance_json_roundtrip() {
        let p = ssa();
        let text = serde_json::to_string(&p.to_json()).unwrap();
        assert!(text.contains("\"nonneg_orthant\""));
        assert_eq!(MixedBinaryProgram::from_json_str(&text).unwrap(), p);
    }

    #[test]
    fn dataset_json_adds_leading_one() {
        let d = Dataset::from_json_str(r#"{"k": 3, "samples": [[2.0, 5.0], [1.0, 1.0]]}"#).unwrap();
        assert_eq!(d.samples()[0], vec![1.0, 2.0, 5.0]);
        assert!(Dataset::from_json_str(r#"{"k": 4, "samples": [[2.0, 5.0]]}"#).is_err());
    }

    #[test]
    fn dual_cone_membership() {
        let p = SupportCone::Polyhedral(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]));
        assert!(p.dual_contains(&[2.0, 1.0], 1e-9));
        assert!(!p.dual_contains(&[-1.0, 0.0], 1e-9));
        assert!(SupportCone::SecondOrder(3).dual_contains(&[1.0, 0.6, 0.8], 1e-9));
        assert!(!SupportCone::SecondOrder(3).dual_contains(&[1.0, 0.7, 0.8], 1e-9));
    }
}
