//! Inner approximations of the copositive cone over `Xi^ x R^n_+` and a
//! sampling check of copositivity.
//!
//! A matrix `G` of order `k + n` is certified as `G = S + M` with `M` PSD,
//! `S_22 >= 0` entrywise, rows of `S_21` in the dual support cone, and
//! `S_11` copositive on the support by construction:
//!
//! * polyhedral `{P xi >= 0}`: `S_11 = P'YP`, `S_21 = WP` with `Y, W >= 0`;
//! * nonnegative orthant: `P = I`, so `S` is just entrywise nonnegative;
//! * second-order cone: `S_11 = tau J + M_11` with `tau >= 0`, `M_11` PSD.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use wasscopos_solver::{BlockId, ConicSolution, DualBuilder, Var};

use crate::error::{Error, Result};
use crate::model::SupportCone;

pub type Term = (Option<Var>, f64);

/// Symmetric matrix whose entries are affine in builder variables.
#[derive(Debug, Clone)]
pub struct SymExpr {
    dim: usize,
    /// keyed by `(i, j)` with `i >= j`
    entries: BTreeMap<(usize, usize), Vec<Term>>,
}

impl SymExpr {
    pub fn new(dim: usize) -> Self {
        SymExpr { dim, entries: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds `coef * var` to entries `(i, j)` and `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, var: Option<Var>, coef: f64) {
        if coef != 0.0 {
            let key = if i >= j { (i, j) } else { (j, i) };
            self.entries.entry(key).or_default().push((var, coef));
        }
    }

    /// Adds `scale * var * m` for a symmetric `m`.
    pub fn add_matrix(&mut self, m: &DMatrix<f64>, var: Option<Var>, scale: f64) {
        for j in 0..self.dim {
            for i in j..self.dim {
                self.add(i, j, var, scale * m[(i, j)]);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, &[Term])> {
        self.entries.iter().map(|(&(i, j), t)| (i, j, t.as_slice()))
    }

    pub fn eval(&self, y: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (&(i, j), terms) in &self.entries {
            let v: f64 = terms.iter().map(|&(var, c)| c * var.map_or(1.0, |Var(k)| y[k])).sum();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }
}

/// Cone memberships beyond plain nonnegativity that `verify` must check.
#[derive(Debug, Clone)]
enum Certificate {
    Linear,
    Soc { m11: BlockId, rows: Vec<Vec<Var>> },
}

/// Sizes of the certificate added for one membership constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MembershipCounts {
    pub psd_blocks: usize,
    /// order of the main PSD block `M`
    pub psd_dim: usize,
    /// nonnegative entries of `Y` (or `S_11` when `P = I`)
    pub y_entries: usize,
    pub w_entries: usize,
    pub s22_entries: usize,
    pub soc_blocks: usize,
    /// scalar identities `G = S + M`, one per upper-triangular entry; they
    /// are eliminated by writing `M = G - S`
    pub linking_equalities: usize,
}

/// Certificate variables tying one target matrix to `IA(Xi^ x R^n_+)`.
#[derive(Debug, Clone)]
pub struct IADecomposition {
    k: usize,
    n: usize,
    target: SymExpr,
    s: SymExpr,
    face: Option<DMatrix<f64>>,
    m_block: BlockId,
    cert: Certificate,
    /// every variable constrained to be nonnegative by this certificate
    nonneg: Vec<Var>,
    counts: MembershipCounts,
}

/// Numerical check of a solved certificate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MembershipReport {
    /// `max |V'(G - S)V - M|`
    pub reconstruction_error: f64,
    /// most negative certificate entry or cone margin (0 when all hold)
    pub worst_violation: f64,
}

fn upper_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Adds certificate variables and cone blocks so that `target` lies in
/// the inner approximation for the support of its leading `k` coordinates.
pub fn emit_membership(b: &mut DualBuilder, target: &SymExpr, support: &SupportCone) -> Result<IADecomposition> {
    emit_membership_on_face(b, target, support, None)
}

/// As [`emit_membership`], but only `V'MV` is required PSD, where the
/// columns of `face` (`V`) span a subspace containing every relevant `z`.
/// Used when all lifted points satisfy `Ez = 0`: then `z'Gz = z'Sz +
/// w'V'(G - S)Vw` for `z = Vw`, and a term `t E'E` restores full PSD-ness.
pub fn emit_membership_on_face(
    b: &mut DualBuilder,
    target: &SymExpr,
    support: &SupportCone,
    face: Option<&DMatrix<f64>>,
) -> Result<IADecomposition> {
    let d = target.dim();
    let k = support.dim();
    if k > d {
        return Err(Error::dim("target", format!("order {d} below support dimension {k}")));
    }
    if let Some(f) = face {
        if f.nrows() != d {
            return Err(Error::dim("face", format!("{} rows, target has order {d}", f.nrows())));
        }
    }
    let n = d - k;
    let mut s = SymExpr::new(d);
    let mut nonneg = Vec::new();
    let mut counts = MembershipCounts {
        psd_blocks: 1,
        psd_dim: d,
        y_entries: 0,
        w_entries: 0,
        s22_entries: upper_len(n),
        soc_blocks: 0,
        linking_equalities: upper_len(d),
    };
    // S_22 >= 0 in every variant
    for i in k..d {
        for j in k..=i {
            let v = b.add_nonneg_var(0.0);
            nonneg.push(v);
            s.add(i, j, Some(v), 1.0);
        }
    }
    let cert = match support {
        SupportCone::NonnegOrthant(_) => {
            for i in 0..d {
                for j in 0..=i.min(k - 1) {
                    let v = b.add_nonneg_var(0.0);
                    nonneg.push(v);
                    s.add(i, j, Some(v), 1.0);
                }
            }
            counts.y_entries = upper_len(k);
            counts.w_entries = n * k;
            Certificate::Linear
        }
        SupportCone::Polyhedral(p) => {
            let pr = p.nrows();
            for r in 0..pr {
                for t in 0..=r {
                    let v = b.add_nonneg_var(0.0);
                    nonneg.push(v);
                    // (P'YP)_{ab} gains P_ra P_tb + P_ta P_rb (once if r == t)
                    for a in 0..k {
                        for c in 0..=a {
                            let mut coef = p[(r, a)] * p[(t, c)];
                            if r != t {
                                coef += p[(t, a)] * p[(r, c)];
                            }
                            s.add(a, c, Some(v), coef);
                        }
                    }
                }
            }
            for j in 0..n {
                for r in 0..pr {
                    let v = b.add_nonneg_var(0.0);
                    nonneg.push(v);
                    for a in 0..k {
                        s.add(k + j, a, Some(v), p[(r, a)]);
                    }
                }
            }
            counts.y_entries = upper_len(pr);
            counts.w_entries = n * pr;
            Certificate::Linear
        }
        SupportCone::SecondOrder(_) => {
            let tau = b.add_nonneg_var(0.0);
            nonneg.push(tau);
            s.add(0, 0, Some(tau), 1.0);
            for a in 1..k {
                s.add(a, a, Some(tau), -1.0);
            }
            let m11 = b.add_psd_block(k);
            for a in 0..k {
                for c in 0..=a {
                    let v = b.add_var(0.0);
                    b.add_psd_entry(m11, a, c, Some(v), 1.0);
                    s.add(a, c, Some(v), 1.0);
                }
            }
            let mut rows = Vec::with_capacity(n);
            for j in 0..n {
                let blk = b.add_soc_block(k);
                let vars: Vec<Var> = (0..k)
                    .map(|a| {
                        let v = b.add_var(0.0);
                        b.add_soc_entry(blk, a, Some(v), 1.0);
                        s.add(k + j, a, Some(v), 1.0);
                        v
                    })
                    .collect();
                rows.push(vars);
            }
            counts.psd_blocks += 1;
            counts.soc_blocks = n;
            counts.y_entries = 1;
            counts.w_entries = n * k;
            Certificate::Soc { m11, rows }
        }
    };
    // M = V'(target - S)V, with V = I when no face is given
    let mut coefs: BTreeMap<Option<Var>, DMatrix<f64>> = BTreeMap::new();
    for (expr, sign) in [(target, 1.0), (&s, -1.0)] {
        for (i, j, terms) in expr.terms() {
            for &(v, c) in terms {
                let m = coefs.entry(v).or_insert_with(|| DMatrix::zeros(d, d));
                m[(i, j)] += sign * c;
                if i != j {
                    m[(j, i)] += sign * c;
                }
            }
        }
    }
    let dm = face.map_or(d, |f| f.ncols());
    counts.psd_dim = dm;
    let m_block = b.add_psd_block(dm);
    for (v, c) in coefs {
        let r = match face {
            Some(f) => f.transpose() * &c * f,
            None => c,
        };
        let cut = 1e-13 * r.amax();
        for j in 0..dm {
            for i in j..dm {
                if r[(i, j)].abs() > cut {
                    b.add_psd_entry(m_block, i, j, v, r[(i, j)]);
                }
            }
        }
    }
    Ok(IADecomposition { k, n, target: target.clone(), s, face: face.cloned(), m_block, cert, nonneg, counts })
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

impl IADecomposition {
    pub fn counts(&self) -> MembershipCounts {
        self.counts
    }

    pub fn target_matrix(&self, y: &[f64]) -> DMatrix<f64> {
        self.target.eval(y)
    }

    pub fn s_matrix(&self, y: &[f64]) -> DMatrix<f64> {
        self.s.eval(y)
    }

    /// `M` as held by the solver's cone slack (on the face, if any).
    pub fn m_matrix(&self, b: &DualBuilder, sol: &ConicSolution) -> DMatrix<f64> {
        b.psd_slack(sol, self.m_block)
    }

    pub fn block(&self) -> BlockId {
        self.m_block
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.k, self.n)
    }

    pub fn verify(&self, b: &DualBuilder, sol: &ConicSolution) -> MembershipReport {
        let y = &sol.y;
        let g = self.target_matrix(y);
        let s = self.s_matrix(y);
        let m = self.m_matrix(b, sol);
        let diff = &g - &s;
        let reduced = match &self.face {
            Some(f) => f.transpose() * diff * f,
            None => diff,
        };
        let reconstruction_error = (reduced - &m).amax();
        let mut worst: f64 = 0.0;
        for v in &self.nonneg {
            worst = worst.min(y[v.0]);
        }
        worst = worst.min(min_eig(&m));
        if let Certificate::Soc { m11, rows, .. } = &self.cert {
            worst = worst.min(min_eig(&b.psd_slack(sol, *m11)));
            for vars in rows {
                let r: Vec<f64> = vars.iter().map(|v| y[v.0]).collect();
                let margin = r[0] - r[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
                worst = worst.min(margin);
            }
        }
        MembershipReport { reconstruction_error, worst_violation: worst }
    }
}

/// Outcome of sampling `z' G z` over `Xi^ x R^n_+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpotCheck {
    pub pass: bool,
    /// smallest `z'Gz / z'z` found
    pub worst: f64,
    pub trials: usize,
}

fn sample_support(support: &SupportCone, rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let k = out.len();
    match support {
        SupportCone::NonnegOrthant(_) => {
            for v in out.iter_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *v = if rng.random_bool(0.3) { 0.0 } else { g.abs() };
            }
        }
        SupportCone::SecondOrder(_) => {
            let mut norm = 0.0;
            for v in out[1..].iter_mut() {
                *v = rng.sample(StandardNormal);
                norm += *v * *v;
            }
            let norm = norm.sqrt();
            let radius = if rng.random_bool(0.3) { 1.0 } else { rng.random::<f64>().powf(1.0 / (k.max(2) - 1) as f64) };
            out[0] = 1.0;
            if norm > 0.0 {
                for v in out[1..].iter_mut() {
                    *v *= radius / norm;
                }
            }
        }
        SupportCone::Polyhedral(_) => {
            for _ in 0..10_000 {
                for v in out.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                if support.contains(out, 0.0) {
                    return;
                }
            }
            out.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// Samples `z = (p; q)` with `p` in the support cone and `q >= 0` and
/// checks `z'Gz >= -tol (1 + ||G||_F) z'z`.
pub fn copositivity_spot_check(
    g: &DMatrix<f64>,
    support: &SupportCone,
    trials: usize,
    tol: f64,
    seed: u64,
) -> SpotCheck {
    let d = g.nrows();
    let k = support.dim().min(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = vec![0.0; d];
    let mut worst = f64::INFINITY;
    for _ in 0..trials.max(1) {
        sample_support(support, &mut rng, &mut z[..k]);
        for v in z[k..].iter_mut() {
            let x: f64 = rng.sample(StandardNormal);
            *v = if rng.random_bool(0.3) { 0.0 } else { x.abs() };
        }
        match rng.random_range(0..8) {
            0 => z[k..].iter_mut().for_each(|v| *v = 0.0),
            1 => z[..k].iter_mut().for_each(|v| *v = 0.0),
            _ => {}
        }
        let nz: f64 = z.iter().map(|v| v * v).sum();
        if nz == 0.0 {
            continue;
        }
        let mut q = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                row += g[(i, j)] * z[j];
            }
            q += z[i] * row;
        }
        worst = worst.min(q / nz);
    }
    if !worst.is_finite() {
        worst = 0.0;
    }
    let pass = worst >= -tol * (1.0 + g.norm());
    SpotCheck { pass, worst, trials: trials.max(1) }
}
