//! Infeasible-start primal-dual path-following with Mehrotra's
//! predictor-corrector and Nesterov-Todd scaling.

use nalgebra::DMatrix;

use crate::cone::{Block, Scaling};
use crate::linalg::{dot, norm2, svec_entry};
use crate::presolve::independent_rows;
use crate::problem::{Cone, ConicProblem, ConicSolution, IterateRecord, SolverOptions, Status};
use crate::schur::{SchurMatrix, SchurStructure};
use crate::SolverError;

/// Threshold for the Farkas-style infeasibility tests: a certificate this
/// good means every feasible point has norm at least `1 / INFEAS_TOL`.
const INFEAS_TOL: f64 = 1e-9;

/// Where an original column went after free variables were split.
#[derive(Debug, Clone, Copy)]
enum ColMap {
    Direct(usize),
    Split(usize, usize),
}

/// A PSD block row: entries `(i, j, value)` of the symmetric coefficient
/// matrix with `i >= j`.
struct PsdRow {
    row: usize,
    entries: Vec<(usize, usize, f64)>,
    dense: bool,
}

enum BlockData {
    NonNeg,
    Soc { rows: Vec<usize>, sub: Vec<Vec<f64>> },
    Psd { dim: usize, rows: Vec<PsdRow> },
}

struct Prepared {
    n: usize,
    m: usize,
    blocks: Vec<Block>,
    data: Vec<BlockData>,
    /// CSC columns over reduced rows
    cols: Vec<Vec<(usize, f64)>>,
    c: Vec<f64>,
    b: Vec<f64>,
    structure: SchurStructure,
    degree: f64,
}

impl Prepared {
    fn a_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (j, col) in self.cols.iter().enumerate() {
            let xj = x[j];
            if xj != 0.0 {
                for &(i, v) in col {
                    out[i] += v * xj;
                }
            }
        }
        out
    }

    fn at_mul(&self, y: &[f64]) -> Vec<f64> {
        self.cols.iter().map(|col| col.iter().map(|&(i, v)| v * y[i]).sum()).collect()
    }
}

fn expand(p: &ConicProblem) -> (Vec<Block>, Vec<ColMap>, usize) {
    let mut blocks = Vec::new();
    let mut map = Vec::with_capacity(p.num_vars());
    let mut next = 0;
    for cone in &p.cones {
        match *cone {
            Cone::Free(n) => {
                for i in 0..n {
                    map.push(ColMap::Split(next + i, next + n + i));
                }
                if n > 0 {
                    blocks.push(Block::NonNeg { start: next, len: 2 * n });
                }
                next += 2 * n;
            }
            Cone::NonNeg(n) => {
                for i in 0..n {
                    map.push(ColMap::Direct(next + i));
                }
                if n > 0 {
                    blocks.push(Block::NonNeg { start: next, len: n });
                }
                next += n;
            }
            Cone::Soc(d) => {
                for i in 0..d {
                    map.push(ColMap::Direct(next + i));
                }
                blocks.push(Block::Soc { start: next, dim: d });
                next += d;
            }
            Cone::Psd(d) => {
                let len = cone.len();
                for i in 0..len {
                    map.push(ColMap::Direct(next + i));
                }
                if d > 0 {
                    blocks.push(Block::Psd { start: next, dim: d });
                }
                next += len;
            }
        }
    }
    (blocks, map, next)
}

fn merge_sorted(mut v: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    v.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(v.len());
    for (i, a) in v {
        match out.last_mut() {
            Some(last) if last.0 == i => last.1 += a,
            _ => out.push((i, a)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    out
}

fn block_rows_of(blocks: &[Block], cols: &[Vec<(usize, f64)>]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for blk in blocks {
        match blk {
            Block::NonNeg { .. } => {
                for j in blk.range() {
                    out.push(cols[j].iter().map(|e| e.0).collect());
                }
            }
            _ => {
                let mut rows: Vec<usize> = blk.range().flat_map(|j| cols[j].iter().map(|e| e.0)).collect();
                rows.sort_unstable();
                rows.dedup();
                out.push(rows);
            }
        }
    }
    out
}

fn prepare(p: &ConicProblem, opts: &SolverOptions) -> (Prepared, Vec<ColMap>, Vec<Option<usize>>) {
    let (blocks, map, n) = expand(p);
    let m0 = p.num_constraints();
    let mut c = vec![0.0; n];
    for (j, cm) in map.iter().enumerate() {
        match *cm {
            ColMap::Direct(k) => c[k] = p.c[j],
            ColMap::Split(a, b) => {
                c[a] = p.c[j];
                c[b] = -p.c[j];
            }
        }
    }
    let mut raw_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m0];
    for &(i, j, v) in &p.a.entries {
        match map[j] {
            ColMap::Direct(k) => raw_rows[i].push((k, v)),
            ColMap::Split(a, b) => {
                raw_rows[i].push((a, v));
                raw_rows[i].push((b, -v));
            }
        }
    }
    let rows: Vec<Vec<(usize, f64)>> = raw_rows.into_iter().map(merge_sorted).collect();
    let mut cols0: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            cols0[j].push((i, v));
        }
    }
    let row_nnz: Vec<usize> = rows.iter().map(Vec::len).collect();
    let st0 = SchurStructure::detect(m0, &row_nnz, &block_rows_of(&blocks, &cols0));
    let keep = independent_rows(n, &rows, &st0, opts.presolve_tol);

    let mut new_index = vec![None; m0];
    let mut m = 0;
    for i in 0..m0 {
        if keep[i] {
            new_index[i] = Some(m);
            m += 1;
        }
    }
    let b: Vec<f64> = (0..m0).filter(|&i| keep[i]).map(|i| p.b[i]).collect();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut kept_nnz = vec![0usize; m];
    for (i, row) in rows.iter().enumerate() {
        if let Some(r) = new_index[i] {
            kept_nnz[r] = row.len();
            for &(j, v) in row {
                cols[j].push((r, v));
            }
        }
    }
    let structure = SchurStructure::detect(m, &kept_nnz, &block_rows_of(&blocks, &cols));

    let mut data = Vec::with_capacity(blocks.len());
    for blk in &blocks {
        match *blk {
            Block::NonNeg { .. } => data.push(BlockData::NonNeg),
            Block::Soc { start, dim } => {
                let mut rows: Vec<usize> = blk.range().flat_map(|j| cols[j].iter().map(|e| e.0)).collect();
                rows.sort_unstable();
                rows.dedup();
                let mut sub = vec![vec![0.0; dim]; rows.len()];
                for j in 0..dim {
                    for &(r, v) in &cols[start + j] {
                        let pos = rows.binary_search(&r).unwrap();
                        sub[pos][j] = v;
                    }
                }
                data.push(BlockData::Soc { rows, sub });
            }
            Block::Psd { start, dim } => {
                let mut per_row: std::collections::BTreeMap<usize, Vec<(usize, usize, f64)>> = Default::default();
                for k in 0..blk.len() {
                    let (i, j) = svec_entry(dim, k);
                    let scale = if i == j { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
                    for &(r, v) in &cols[start + k] {
                        per_row.entry(r).or_default().push((i, j, v * scale));
                    }
                }
                let rows = per_row
                    .into_iter()
                    .map(|(row, entries)| {
                        let full = entries.iter().map(|e| if e.0 == e.1 { 1 } else { 2 }).sum::<usize>();
                        PsdRow { row, dense: full > 2 * dim, entries }
                    })
                    .collect();
                data.push(BlockData::Psd { dim, rows });
            }
        }
    }
    let degree = blocks.iter().map(Block::degree).sum::<usize>().max(1) as f64;
    let dropped: Vec<Option<usize>> = new_index;
    (Prepared { n, m, blocks, data, cols, c, b, structure, degree }, map, dropped)
}

fn assemble(prep: &Prepared, scalings: &[Scaling], h: &mut SchurMatrix) {
    let st = &prep.structure;
    h.clear();
    for ((blk, data), sc) in prep.blocks.iter().zip(&prep.data).zip(scalings) {
        match data {
            BlockData::NonNeg => {
                let w = sc.nonneg_w().unwrap();
                for (k, j) in blk.range().enumerate() {
                    let w2 = w[k] * w[k];
                    let col = &prep.cols[j];
                    for &(r1, v1) in col {
                        for &(r2, v2) in col {
                            h.add(st, r1, r2, w2 * v1 * v2);
                        }
                    }
                }
            }
            BlockData::Soc { rows, sub } => {
                let w = sc.soc_w().unwrap();
                let w2 = w * w;
                let q = w2.nrows();
                let t: Vec<Vec<f64>> = sub
                    .iter()
                    .map(|a| (0..q).map(|i| (0..q).map(|j| w2[(i, j)] * a[j]).sum()).collect())
                    .collect();
                for (p1, &r1) in rows.iter().enumerate() {
                    for (p2, &r2) in rows.iter().enumerate() {
                        h.add(st, r1, r2, dot(&sub[p1], &t[p2]));
                    }
                }
            }
            BlockData::Psd { dim, rows } => {
                let g = sc.psd_g().unwrap();
                assemble_psd(*dim, g, rows, st, h);
            }
        }
    }
}

fn expand_full(entries: &[(usize, usize, f64)]) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::with_capacity(2 * entries.len());
    for &(i, j, v) in entries {
        out.push((i, j, v));
        if i != j {
            out.push((j, i, v));
        }
    }
    out
}

fn assemble_psd(d: usize, g: &DMatrix<f64>, rows: &[PsdRow], st: &SchurStructure, h: &mut SchurMatrix) {
    let gv: Vec<f64> = (0..d * d).map(|k| g[(k / d, k % d)]).collect();
    let full: Vec<Vec<(usize, usize, f64)>> = rows.iter().map(|r| expand_full(&r.entries)).collect();
    // T_a = G U_a G for dense rows, row-major
    let t: Vec<Option<Vec<f64>>> = rows
        .iter()
        .zip(&full)
        .map(|(r, f)| {
            if !r.dense {
                return None;
            }
            let mut u = DMatrix::zeros(d, d);
            for &(i, j, v) in f {
                u[(i, j)] += v;
            }
            let prod = g * u * g;
            Some((0..d * d).map(|k| prod[(k / d, k % d)]).collect())
        })
        .collect();
    for a in 0..rows.len() {
        for b in 0..=a {
            let val = if let Some(ta) = &t[a] {
                full[b].iter().map(|&(r, tt, w)| w * ta[tt * d + r]).sum::<f64>()
            } else if let Some(tb) = &t[b] {
                full[a].iter().map(|&(p, q, u)| u * tb[q * d + p]).sum::<f64>()
            } else {
                let mut acc = 0.0;
                for &(p, q, u) in &full[a] {
                    for &(r, tt, w) in &full[b] {
                        acc += u * w * gv[q * d + r] * gv[tt * d + p];
                    }
                }
                acc
            };
            let (ra, rb) = (rows[a].row, rows[b].row);
            h.add(st, ra, rb, val);
            if a != b {
                h.add(st, rb, ra, val);
            }
        }
    }
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    ds: Vec<f64>,
    dx_scaled: Vec<f64>,
    ds_scaled: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn newton(
    prep: &Prepared,
    scalings: &[Scaling],
    h: &SchurMatrix,
    factor: &crate::schur::SchurFactor,
    rp: &[f64],
    rd: &[f64],
    d: &[f64],
) -> Direction {
    let n = prep.n;
    let mut q = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut t = vec![0.0; n];
    for (blk, sc) in prep.blocks.iter().zip(scalings) {
        let r = blk.range();
        sc.lambda_solve(&d[r.clone()], &mut q[r.clone()]);
        sc.scale_dual(&rd[r.clone()], &mut tmp[r.clone()]);
        let diff: Vec<f64> = q[r.clone()].iter().zip(&tmp[r.clone()]).map(|(a, b)| a - b).collect();
        sc.unscale_primal(&diff, &mut t[r]);
    }
    let at = prep.a_mul(&t);
    let rhs: Vec<f64> = rp.iter().zip(&at).map(|(a, b)| a - b).collect();
    let st = &prep.structure;
    let mut dy = factor.solve(st, &rhs);
    for _ in 0..2 {
        let hy = h.mul(st, &dy);
        let res: Vec<f64> = rhs.iter().zip(&hy).map(|(a, b)| a - b).collect();
        if norm2(&res) <= 1e-15 * (1.0 + norm2(&rhs)) {
            break;
        }
        let corr = factor.solve(st, &res);
        dy.iter_mut().zip(&corr).for_each(|(a, b)| *a += b);
    }
    let aty = prep.at_mul(&dy);
    let ds: Vec<f64> = rd.iter().zip(&aty).map(|(a, b)| a - b).collect();
    let mut ds_scaled = vec![0.0; n];
    let mut dx_scaled = vec![0.0; n];
    let mut dx = vec![0.0; n];
    for (blk, sc) in prep.blocks.iter().zip(scalings) {
        let r = blk.range();
        sc.scale_dual(&ds[r.clone()], &mut ds_scaled[r.clone()]);
        for k in r.clone() {
            dx_scaled[k] = q[k] - ds_scaled[k];
        }
        sc.unscale_primal(&dx_scaled[r.clone()], &mut dx[r]);
    }
    Direction { dx, dy, ds, dx_scaled, ds_scaled }
}

fn max_steps(prep: &Prepared, scalings: &[Scaling], dir: &Direction) -> (f64, f64) {
    let mut ap = f64::INFINITY;
    let mut ad = f64::INFINITY;
    for (blk, sc) in prep.blocks.iter().zip(scalings) {
        let r = blk.range();
        ap = ap.min(sc.max_step(&dir.dx_scaled[r.clone()]));
        ad = ad.min(sc.max_step(&dir.ds_scaled[r]));
    }
    (ap, ad)
}

fn initial_point(prep: &Prepared) -> (Vec<f64>, Vec<f64>) {
    let nu = prep.degree;
    let mut row_norm = vec![0.0f64; prep.m];
    for col in &prep.cols {
        for &(i, v) in col {
            row_norm[i] += v * v;
        }
    }
    let row_norm: Vec<f64> = row_norm.into_iter().map(f64::sqrt).collect();
    let xi = (0..prep.m)
        .map(|i| (1.0 + prep.b[i].abs()) / (1.0 + row_norm[i]))
        .fold(10.0f64.max(nu.sqrt()), f64::max);
    let eta = row_norm.iter().copied().fold(norm2(&prep.c).max(10.0).max(nu.sqrt()), f64::max);
    let mut x = vec![0.0; prep.n];
    let mut s = vec![0.0; prep.n];
    for blk in &prep.blocks {
        let r = blk.range();
        blk.identity_into(&mut x[r.clone()]);
        blk.identity_into(&mut s[r]);
    }
    x.iter_mut().for_each(|v| *v *= xi);
    s.iter_mut().for_each(|v| *v *= eta);
    (x, s)
}

pub fn solve(p: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution, SolverError> {
    p.validate()?;
    let (prep, map, row_index) = prepare(p, opts);
    let n = prep.n;
    let (mut x, mut s) = initial_point(&prep);
    let mut y = vec![0.0; prep.m];
    let mut h = prep.structure.zero_matrix();
    let norm_b = norm2(&prep.b);
    let norm_c = norm2(&prep.c);
    let feas_scale = 1.0 + norm_b + norm_c;
    let mut history = Vec::new();
    let mut status = Status::MaxIter;
    let mut iterations = 0;
    let mut stalls = 0;
    // best dual-feasible iterate, returned if the run ends without optimality
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> = None;

    for iter in 0..=opts.max_iter {
        iterations = iter;
        let ax = prep.a_mul(&x);
        let rp: Vec<f64> = prep.b.iter().zip(&ax).map(|(a, b)| a - b).collect();
        let aty = prep.at_mul(&y);
        let rd: Vec<f64> = (0..n).map(|j| prep.c[j] - aty[j] - s[j]).collect();
        let pobj = dot(&prep.c, &x);
        let dobj = dot(&prep.b, &y);
        let pres = norm2(&rp);
        let dres = norm2(&rd);
        let xs = dot(&x, &s);
        if opts.record_history {
            history.push(IterateRecord {
                iteration: iter,
                primal_objective: pobj,
                dual_objective: dobj,
                complementarity: xs,
                dual_residual_term: dot(&x, &rd),
                primal_residual_term: dot(&y, &rp),
                primal_residual: pres,
                dual_residual: dres,
            });
        }
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        if dres <= opts.feas_tol * feas_scale && dobj.is_finite() && best.as_ref().is_none_or(|b| dobj > b.0) {
            best = Some((dobj, x.clone(), y.clone(), s.clone()));
        }
        if pres <= opts.feas_tol * feas_scale && dres <= opts.feas_tol * feas_scale && gap <= opts.gap_tol {
            status = Status::Optimal;
            break;
        }
        if iter >= 3 {
            // A'y + s = c - rd ; A x = b - rp
            let aty_s: Vec<f64> = prep.c.iter().zip(&rd).map(|(a, b)| a - b).collect();
            if dobj > 0.0 && norm2(&aty_s) <= INFEAS_TOL * dobj {
                status = Status::Infeasible;
                break;
            }
            let ax_norm = norm2(&ax);
            if pobj < 0.0 && ax_norm <= INFEAS_TOL * (-pobj) {
                status = Status::Unbounded;
                break;
            }
        }
        if iter == opts.max_iter {
            break;
        }

        let scalings: Result<Vec<Scaling>, _> =
            prep.blocks.iter().map(|blk| Scaling::new(blk, &x[blk.range()], &s[blk.range()])).collect();
        let scalings = match scalings {
            Ok(v) => v,
            Err(_) => {
                status = Status::Numerical;
                break;
            }
        };
        assemble(&prep, &scalings, &mut h);
        let factor = h.factor(&prep.structure);

        let mut lambda = vec![0.0; n];
        let mut lam_sq = vec![0.0; n];
        for (blk, sc) in prep.blocks.iter().zip(&scalings) {
            let r = blk.range();
            sc.lambda_into(&mut lambda[r.clone()]);
            blk.jordan(&lambda[r.clone()], &lambda[r.clone()], &mut lam_sq[r]);
        }
        let mu = xs / prep.degree;

        // predictor
        let d_aff: Vec<f64> = lam_sq.iter().map(|v| -v).collect();
        let aff = newton(&prep, &scalings, &h, &factor, &rp, &rd, &d_aff);
        let (ap, ad) = max_steps(&prep, &scalings, &aff);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mut mu_aff = 0.0;
        for k in 0..n {
            mu_aff += (lambda[k] + ap * aff.dx_scaled[k]) * (lambda[k] + ad * aff.ds_scaled[k]);
        }
        mu_aff /= prep.degree;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let mut d = vec![0.0; n];
        let mut cross = vec![0.0; n];
        let mut e = vec![0.0; n];
        for blk in &prep.blocks {
            let r = blk.range();
            blk.jordan(&aff.dx_scaled[r.clone()], &aff.ds_scaled[r.clone()], &mut cross[r.clone()]);
            blk.identity_into(&mut e[r]);
        }
        for k in 0..n {
            d[k] = -lam_sq[k] - cross[k] + sigma * mu * e[k];
        }
        let dir = newton(&prep, &scalings, &h, &factor, &rp, &rd, &d);
        let (ap, ad) = max_steps(&prep, &scalings, &dir);
        let ap = (opts.step_fraction * ap).min(1.0);
        let ad = (opts.step_fraction * ad).min(1.0);
        if ap.max(ad) < 1e-10 {
            stalls += 1;
            if stalls >= 5 {
                status = Status::Numerical;
                break;
            }
        } else {
            stalls = 0;
        }
        for k in 0..n {
            x[k] += ap * dir.dx[k];
            s[k] += ad * dir.ds[k];
        }
        for (yi, dyi) in y.iter_mut().zip(&dir.dy) {
            *yi += ad * dyi;
        }
        if !x.iter().chain(&s).chain(&y).all(|v| v.is_finite()) {
            status = Status::Numerical;
            break;
        }
    }

    if matches!(status, Status::MaxIter | Status::Numerical) {
        if let Some((_, bx, by, bs)) = best {
            (x, y, s) = (bx, by, bs);
        }
    }

    // map back to the caller's variables
    let nv = p.num_vars();
    let mut x_out = vec![0.0; nv];
    let mut s_out = vec![0.0; nv];
    let mut free_cols = Vec::new();
    for (j, cm) in map.iter().enumerate() {
        match *cm {
            ColMap::Direct(k) => {
                x_out[j] = x[k];
                s_out[j] = s[k];
            }
            ColMap::Split(a, b) => {
                x_out[j] = x[a] - x[b];
                free_cols.push(j);
            }
        }
    }
    let mut y_out = vec![0.0; p.num_constraints()];
    let mut dropped_rows = Vec::new();
    for (i, idx) in row_index.iter().enumerate() {
        match idx {
            Some(r) => y_out[i] = y[*r],
            None => dropped_rows.push(i),
        }
    }
    let aty_full = p.a.tr_mul_vec(&y_out);
    for &j in &free_cols {
        s_out[j] = p.c[j] - aty_full[j];
    }
    let ax_full = p.a.mul_vec(&x_out);
    let rp_full: Vec<f64> = p.b.iter().zip(&ax_full).map(|(a, b)| a - b).collect();
    let rd_full: Vec<f64> = (0..nv).map(|j| p.c[j] - aty_full[j] - s_out[j]).collect();
    let primal_objective = dot(&p.c, &x_out);
    let dual_objective = dot(&p.b, &y_out);
    let primal_residual = norm2(&rp_full);
    let dual_residual = norm2(&rd_full);
    let relative_gap =
        (primal_objective - dual_objective).abs() / (1.0 + primal_objective.abs() + dual_objective.abs());
    let full_scale = 1.0 + norm2(&p.b) + norm2(&p.c);
    if status == Status::Optimal && !dropped_rows.is_empty() && primal_residual > 10.0 * opts.feas_tol * full_scale {
        // the dropped rows were inconsistent with the kept ones
        status = Status::Infeasible;
    }
    Ok(ConicSolution {
        status,
        x: x_out,
        y: y_out,
        s: s_out,
        primal_objective,
        dual_objective,
        primal_residual,
        dual_residual,
        relative_gap,
        iterations,
        dropped_rows,
        history,
    })
}
