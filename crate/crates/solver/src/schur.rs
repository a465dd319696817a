//! Block-arrow factorization of the Schur complement `A W^T W A^T`.
//!
//! Rows of `A` that touch many cone blocks (e.g. a variable shared by every
//! sample) are treated as *linking* rows. The remaining rows split into
//! connected components that share no column, so the Schur complement is
//!
//! ```text
//! [ H_1            C_1 ]
//! [      ...       ... ]
//! [           H_g  C_g ]
//! [ C_1' ... C_g'  H_L ]
//! ```
//!
//! and is factored by dense Cholesky of each `H_i` followed by the dense
//! Schur complement on the linking rows. Without structure this degrades to
//! a single dense factorization.

use crate::linalg::DenseCholesky;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Group(usize, usize),
    Link(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct SchurStructure {
    slots: Vec<Slot>,
    pub groups: Vec<Vec<usize>>,
    pub link: Vec<usize>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

impl SchurStructure {
    /// `row_nnz[r]` is the number of nonzeros of row `r`; `block_rows[b]`
    /// lists the rows touching column-block `b`.
    pub fn detect(nrows: usize, row_nnz: &[usize], block_rows: &[Vec<usize>]) -> Self {
        let mut is_link = vec![false; nrows];
        if nrows > 64 {
            let mut sorted: Vec<usize> = row_nnz.to_vec();
            sorted.sort_unstable();
            let median = sorted[nrows / 2].max(1);
            let threshold = (8 * median).max(32);
            // also rows coupling many cone blocks, however short they are
            let mut touches = vec![0usize; nrows];
            for rows in block_rows.iter().filter(|r| r.len() > 1) {
                for &r in rows {
                    touches[r] += 1;
                }
            }
            let mut sorted_touch = touches.clone();
            sorted_touch.sort_unstable();
            let touch_threshold = (4 * sorted_touch[nrows / 2]).max(3);
            let mut candidates: Vec<usize> =
                (0..nrows).filter(|&r| row_nnz[r] >= threshold || touches[r] >= touch_threshold).collect();
            candidates.sort_by(|a, b| {
                (touches[*b], row_nnz[*b]).cmp(&(touches[*a], row_nnz[*a])).then(a.cmp(b))
            });
            candidates.truncate((nrows / 4).min(256));
            for r in candidates {
                is_link[r] = true;
            }
        }
        let mut uf = UnionFind((0..nrows).collect());
        for rows in block_rows {
            let mut first = None;
            for &r in rows {
                if is_link[r] {
                    continue;
                }
                match first {
                    None => first = Some(r),
                    Some(f) => uf.union(f, r),
                }
            }
        }
        let mut root_to_group = vec![usize::MAX; nrows];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut link = Vec::new();
        let mut slots = vec![Slot::Link(0); nrows];
        for r in 0..nrows {
            if is_link[r] {
                slots[r] = Slot::Link(link.len());
                link.push(r);
                continue;
            }
            let root = uf.find(r);
            if root_to_group[root] == usize::MAX {
                root_to_group[root] = groups.len();
                groups.push(Vec::new());
            }
            let g = root_to_group[root];
            slots[r] = Slot::Group(g, groups[g].len());
            groups[g].push(r);
        }
        SchurStructure { slots, groups, link }
    }

    pub fn zero_matrix(&self) -> SchurMatrix {
        let l = self.link.len();
        SchurMatrix {
            groups: self.groups.iter().map(|g| vec![0.0; g.len() * g.len()]).collect(),
            coupling: self.groups.iter().map(|g| vec![0.0; g.len() * l]).collect(),
            link: vec![0.0; l * l],
        }
    }
}

/// Assembled symmetric Schur complement in block-arrow storage.
#[derive(Debug, Clone)]
pub(crate) struct SchurMatrix {
    groups: Vec<Vec<f64>>,
    /// `n_g x L`, row-major
    coupling: Vec<Vec<f64>>,
    link: Vec<f64>,
}

impl SchurMatrix {
    pub fn clear(&mut self) {
        for v in self.groups.iter_mut().chain(self.coupling.iter_mut()) {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
        self.link.iter_mut().for_each(|x| *x = 0.0);
    }

    /// Add `v` to entry `(ri, rj)` of the full matrix. Symmetric callers add
    /// both `(ri, rj)` and `(rj, ri)`.
    #[inline]
    pub fn add(&mut self, st: &SchurStructure, ri: usize, rj: usize, v: f64) {
        match (st.slots[ri], st.slots[rj]) {
            (Slot::Group(g, a), Slot::Group(_h, b)) => {
                debug_assert_eq!(g, _h, "rows {ri} and {rj} share a column across groups");
                let n = st.groups[g].len();
                self.groups[g][a * n + b] += v;
            }
            (Slot::Group(g, a), Slot::Link(b)) => {
                let l = st.link.len();
                self.coupling[g][a * l + b] += v;
            }
            (Slot::Link(_), Slot::Group(..)) => {}
            (Slot::Link(a), Slot::Link(b)) => {
                let l = st.link.len();
                self.link[a * l + b] += v;
            }
        }
    }

    pub fn mul(&self, st: &SchurStructure, x: &[f64]) -> Vec<f64> {
        let l = st.link.len();
        let mut out = vec![0.0; x.len()];
        let xl: Vec<f64> = st.link.iter().map(|&r| x[r]).collect();
        let mut out_l = vec![0.0; l];
        for (g, rows) in st.groups.iter().enumerate() {
            let n = rows.len();
            let h = &self.groups[g];
            let c = &self.coupling[g];
            for a in 0..n {
                let mut acc = 0.0;
                for b in 0..n {
                    acc += h[a * n + b] * x[rows[b]];
                }
                for k in 0..l {
                    acc += c[a * l + k] * xl[k];
                    out_l[k] += c[a * l + k] * x[rows[a]];
                }
                out[rows[a]] = acc;
            }
        }
        for a in 0..l {
            let mut acc = out_l[a];
            for b in 0..l {
                acc += self.link[a * l + b] * xl[b];
            }
            out[st.link[a]] = acc;
        }
        out
    }

    pub fn factor(&self, st: &SchurStructure) -> SchurFactor {
        let l = st.link.len();
        let mut s = self.link.clone();
        let mut chol = Vec::with_capacity(st.groups.len());
        let mut xs = Vec::with_capacity(st.groups.len());
        for (g, rows) in st.groups.iter().enumerate() {
            let n = rows.len();
            let f = DenseCholesky::factor(self.groups[g].clone(), n);
            // X_g = L_g^{-1} C_g, stored column-major (L columns of length n)
            let mut x = vec![0.0; n * l];
            let mut col = vec![0.0; n];
            for k in 0..l {
                for a in 0..n {
                    col[a] = self.coupling[g][a * l + k];
                }
                f.forward(&mut col);
                x[k * n..(k + 1) * n].copy_from_slice(&col);
            }
            // S -= X_g' X_g
            for p in 0..l {
                let xp = &x[p * n..(p + 1) * n];
                for q in 0..=p {
                    let xq = &x[q * n..(q + 1) * n];
                    let d: f64 = xp.iter().zip(xq).map(|(a, b)| a * b).sum();
                    s[p * l + q] -= d;
                    if p != q {
                        s[q * l + p] -= d;
                    }
                }
            }
            chol.push(f);
            xs.push(x);
        }
        let link = DenseCholesky::factor(s, l);
        SchurFactor { groups: chol, x: xs, link }
    }
}

pub(crate) struct SchurFactor {
    groups: Vec<DenseCholesky>,
    x: Vec<Vec<f64>>,
    link: DenseCholesky,
}

impl SchurFactor {
    pub fn solve(&self, st: &SchurStructure, rhs: &[f64]) -> Vec<f64> {
        let l = st.link.len();
        let mut out = vec![0.0; rhs.len()];
        let mut rl: Vec<f64> = st.link.iter().map(|&r| rhs[r]).collect();
        let mut ws: Vec<Vec<f64>> = Vec::with_capacity(st.groups.len());
        for (g, rows) in st.groups.iter().enumerate() {
            let n = rows.len();
            let mut w: Vec<f64> = rows.iter().map(|&r| rhs[r]).collect();
            self.groups[g].forward(&mut w);
            let x = &self.x[g];
            for k in 0..l {
                let xk = &x[k * n..(k + 1) * n];
                rl[k] -= xk.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            }
            ws.push(w);
        }
        self.link.solve(&mut rl);
        for (g, rows) in st.groups.iter().enumerate() {
            let n = rows.len();
            let w = &mut ws[g];
            let x = &self.x[g];
            for k in 0..l {
                let xk = &x[k * n..(k + 1) * n];
                for a in 0..n {
                    w[a] -= xk[a] * rl[k];
                }
            }
            self.groups[g].backward(w);
            for (a, &r) in rows.iter().enumerate() {
                out[r] = w[a];
            }
        }
        for (k, &r) in st.link.iter().enumerate() {
            out[r] = rl[k];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Arrow matrix: 100 rows in 50 independent pairs plus one row linking all.
    #[test]
    fn arrow_factor_matches_dense_solution() {
        let n = 101;
        let mut block_rows: Vec<Vec<usize>> = (0..50).map(|g| vec![2 * g, 2 * g + 1, 100]).collect();
        block_rows.push(vec![100]);
        let mut row_nnz = vec![3usize; n];
        row_nnz[100] = 200;
        let st = SchurStructure::detect(n, &row_nnz, &block_rows);
        assert_eq!(st.link, vec![100]);
        assert_eq!(st.groups.len(), 50);

        let mut dense = vec![0.0; n * n];
        let mut h = st.zero_matrix();
        let mut put = |i: usize, j: usize, v: f64, h: &mut SchurMatrix| {
            h.add(&st, i, j, v);
            dense[i * n + j] += v;
            if i != j {
                h.add(&st, j, i, v);
                dense[j * n + i] += v;
            }
        };
        for g in 0..50 {
            let (a, b) = (2 * g, 2 * g + 1);
            put(a, a, 4.0 + g as f64 * 0.01, &mut h);
            put(b, b, 3.0, &mut h);
            put(a, b, 1.0, &mut h);
            put(a, 100, 0.1, &mut h);
            put(b, 100, -0.2, &mut h);
        }
        put(100, 100, 50.0, &mut h);

        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let sol = h.factor(&st).solve(&st, &rhs);
        let back = h.mul(&st, &sol);
        for i in 0..n {
            assert!((back[i] - rhs[i]).abs() < 1e-10);
            let d: f64 = (0..n).map(|j| dense[i * n + j] * sol[j]).sum();
            assert!((d - rhs[i]).abs() < 1e-10);
        }
    }
}
