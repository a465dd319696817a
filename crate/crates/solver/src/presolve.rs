//! Detection of linearly dependent equality rows.
//!
//! Rows are orthogonalized with twice-applied modified Gram-Schmidt. A row
//! whose residual norm falls below `tol * ||row||` is dependent. Components
//! of [`SchurStructure`] have disjoint column supports, so each is processed
//! independently and the linking rows are reduced against all of them.

use crate::schur::SchurStructure;

/// Returns `keep[r] == false` for rows that are linear combinations of
/// earlier kept rows.
pub(crate) fn independent_rows(
    ncols: usize,
    rows: &[Vec<(usize, f64)>],
    st: &SchurStructure,
    tol: f64,
) -> Vec<bool> {
    let mut keep = vec![true; rows.len()];
    // per group: local column list and an orthonormal basis over it
    let mut group_cols: Vec<Vec<usize>> = Vec::with_capacity(st.groups.len());
    let mut group_basis: Vec<Vec<Vec<f64>>> = Vec::with_capacity(st.groups.len());
    let mut local = vec![usize::MAX; ncols];
    for grp in &st.groups {
        let mut cols: Vec<usize> = grp.iter().flat_map(|&r| rows[r].iter().map(|e| e.0)).collect();
        cols.sort_unstable();
        cols.dedup();
        for (i, &c) in cols.iter().enumerate() {
            local[c] = i;
        }
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for &r in grp {
            let mut v = vec![0.0; cols.len()];
            for &(c, a) in &rows[r] {
                v[local[c]] += a;
            }
            if !reduce_and_push(&mut v, &mut basis, tol) {
                keep[r] = false;
            }
        }
        group_cols.push(cols);
        group_basis.push(basis);
    }
    let mut link_basis: Vec<Vec<f64>> = Vec::new();
    for &r in &st.link {
        let mut v = vec![0.0; ncols];
        for &(c, a) in &rows[r] {
            v[c] += a;
        }
        let norm0 = norm(&v);
        for _ in 0..2 {
            for (cols, basis) in group_cols.iter().zip(&group_basis) {
                for q in basis {
                    let coef: f64 = cols.iter().zip(q).map(|(&c, qv)| v[c] * qv).sum();
                    if coef != 0.0 {
                        for (&c, qv) in cols.iter().zip(q) {
                            v[c] -= coef * qv;
                        }
                    }
                }
            }
            for q in &link_basis {
                let coef: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= coef * b);
            }
        }
        let nr = norm(&v);
        if nr <= tol * norm0 || nr == 0.0 {
            keep[r] = false;
        } else {
            v.iter_mut().for_each(|a| *a /= nr);
            link_basis.push(v);
        }
    }
    keep
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn reduce_and_push(v: &mut [f64], basis: &mut Vec<Vec<f64>>, tol: f64) -> bool {
    let norm0 = norm(v);
    for _ in 0..2 {
        for q in basis.iter() {
            let coef: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= coef * b);
        }
    }
    let nr = norm(v);
    if nr <= tol * norm0 || nr == 0.0 {
        return false;
    }
    basis.push(v.iter().map(|a| a / nr).collect());
    true
}

/// Dense variant: `keep[r]` is false when row `r` depends on earlier kept rows.
pub fn dense_independent_rows(a: &[Vec<f64>], tol: f64) -> Vec<bool> {
    let ncols = a.first().map_or(0, |r| r.len());
    let mut basis = Vec::new();
    a.iter()
        .map(|row| {
            let mut v = row.clone();
            debug_assert_eq!(v.len(), ncols);
            reduce_and_push(&mut v, &mut basis, tol)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicated_and_summed_rows_are_dropped() {
        let a = vec![
            vec![1.0, 1.0, 0.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 1.0, 0.0],
            vec![1.0, 2.0, 1.0],
            vec![0.0, 0.0, 0.0],
        ];
        assert_eq!(dense_independent_rows(&a, 1e-9), vec![true, true, false, false, false]);
    }

    #[test]
    fn structured_detection_handles_linking_rows() {
        // two disjoint groups plus a linking row equal to their sum
        let rows = vec![
            vec![(0, 1.0), (1, 2.0)],
            vec![(2, 1.0)],
            vec![(0, 1.0), (1, 2.0), (2, 1.0)],
            vec![(0, 1.0), (3, 1.0)],
        ];
        let block_rows = vec![vec![0, 2, 3], vec![0, 2], vec![1, 2], vec![3]];
        let st = SchurStructure::detect(4, &[2, 1, 3, 2], &block_rows);
        let keep = independent_rows(4, &rows, &st, 1e-9);
        assert_eq!(keep, vec![true, true, false, true]);
    }
}
