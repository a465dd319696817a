//! Small cone programs with closed-form optima, used as a solver self-check.

use crate::linalg::{svec, svec_index, svec_len, SQRT2};
use crate::problem::{Cone, ConicProblem, SparseMatrix};
use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct Reference {
    pub name: &'static str,
    pub problem: ConicProblem,
    pub optimum: f64,
}

fn lp(c: Vec<f64>, rows: &[Vec<f64>], b: Vec<f64>, cones: Vec<Cone>) -> ConicProblem {
    let a = SparseMatrix::from_dense(rows, c.len());
    ConicProblem { c, a, b, cones }
}

/// `min <C, X>` s.t. `<A_i, X> = b_i`, `X` PSD of order `d`.
fn sdp(cmat: DMatrix<f64>, cons: &[(DMatrix<f64>, f64)]) -> ConicProblem {
    let d = cmat.nrows();
    let rows: Vec<Vec<f64>> = cons.iter().map(|(m, _)| svec(m)).collect();
    lp(svec(&cmat), &rows, cons.iter().map(|c| c.1).collect(), vec![Cone::Psd(d)])
}

fn unit(d: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    m[(i, j)] = if i == j { 1.0 } else { 0.5 };
    m[(j, i)] = m[(i, j)];
    m
}

pub fn library() -> Vec<Reference> {
    let mut out = Vec::new();
    out.push(Reference {
        name: "lp_single_slack",
        problem: lp(vec![-1.0, 0.0], &[vec![1.0, 1.0]], vec![1.0], vec![Cone::NonNeg(2)]),
        optimum: -1.0,
    });
    out.push(Reference {
        name: "lp_two_row_vertex",
        problem: lp(
            vec![-1.0, -2.0, 0.0, 0.0],
            &[vec![1.0, 1.0, 1.0, 0.0], vec![1.0, 3.0, 0.0, 1.0]],
            vec![4.0, 6.0],
            vec![Cone::NonNeg(4)],
        ),
        optimum: -5.0,
    });
    out.push(Reference {
        name: "lp_duplicated_row",
        problem: lp(
            vec![1.0, 2.0],
            &[vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 2.0]],
            vec![1.0, 1.0, 2.0],
            vec![Cone::NonNeg(2)],
        ),
        optimum: 1.0,
    });
    out.push(Reference {
        name: "lp_free_variable",
        problem: lp(
            vec![1.0, 1.0],
            &[vec![1.0, -1.0]],
            vec![-1.0],
            vec![Cone::Free(1), Cone::NonNeg(1)],
        ),
        optimum: -1.0,
    });
    // min t  s.t.  ||(x1, x2)|| <= t,  x = (3, 4)
    out.push(Reference {
        name: "soc_norm",
        problem: lp(
            vec![1.0, 0.0, 0.0],
            &[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            vec![3.0, 4.0],
            vec![Cone::Soc(3)],
        ),
        optimum: 5.0,
    });
    // distance from (3, 4) to the unit disk: (t, w) in Q3, (1, z) in Q3, w - z = -p
    out.push(Reference {
        name: "soc_projection",
        problem: lp(
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            &[
                vec![0.0, 1.0, 0.0, 0.0, -1.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0, 0.0, -1.0],
                vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            ],
            vec![-3.0, -4.0, 1.0],
            vec![Cone::Soc(3), Cone::Soc(3)],
        ),
        optimum: 4.0,
    });
    out.push(Reference {
        name: "sdp_min_trace_unit_diagonal",
        problem: sdp(DMatrix::identity(2, 2), &[(unit(2, 0, 0), 1.0), (unit(2, 1, 1), 1.0)]),
        optimum: 2.0,
    });
    out.push(Reference {
        name: "sdp_max_offdiagonal",
        problem: sdp(-unit(2, 0, 1), &[(unit(2, 0, 0), 1.0), (unit(2, 1, 1), 1.0)]),
        optimum: -1.0,
    });
    out.push(Reference {
        name: "sdp_min_eigenvalue_2",
        problem: sdp(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]), &[(DMatrix::identity(2, 2), 1.0)]),
        optimum: 1.0,
    });
    out.push(Reference {
        name: "sdp_min_eigenvalue_tridiagonal",
        problem: sdp(
            DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]),
            &[(DMatrix::identity(3, 3), 1.0)],
        ),
        optimum: 2.0 - SQRT2,
    });
    out.push(Reference { name: "mixed_lp_soc_sdp", problem: mixed(), optimum: 1.0 + 5.0 + 2.0 });
    out
}

/// Three independent pieces sharing one objective:
/// `min x` with `x >= 1`, `min t` with `||(3,4)|| <= t`, `min tr X` with unit diagonal.
fn mixed() -> ConicProblem {
    let d = 2;
    let np = svec_len(d);
    let n = 2 + 3 + np;
    let mut c = vec![0.0; n];
    c[0] = 1.0;
    c[2] = 1.0;
    c[5 + svec_index(d, 0, 0)] = 1.0;
    c[5 + svec_index(d, 1, 1)] = 1.0;
    let mut a = SparseMatrix::new(5, n);
    a.push(0, 0, 1.0);
    a.push(0, 1, -1.0);
    a.push(1, 3, 1.0);
    a.push(2, 4, 1.0);
    a.push(3, 5 + svec_index(d, 0, 0), 1.0);
    a.push(4, 5 + svec_index(d, 1, 1), 1.0);
    ConicProblem { c, a, b: vec![1.0, 3.0, 4.0, 1.0, 1.0], cones: vec![Cone::NonNeg(2), Cone::Soc(3), Cone::Psd(d)] }
}
