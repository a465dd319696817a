use wasscopos_solver::reference::library;
use wasscopos_solver::{solve_lp, Cone, SparseMatrix, Status, VarBound};

fn bounds_of(cones: &[Cone]) -> Option<Vec<VarBound>> {
    let mut out = Vec::new();
    for c in cones {
        match *c {
            Cone::Free(n) => out.extend(std::iter::repeat_n(VarBound::Free, n)),
            Cone::NonNeg(n) => out.extend(std::iter::repeat_n(VarBound::NonNeg, n)),
            _ => return None,
        }
    }
    Some(out)
}

#[test]
fn linear_references_match() {
    for r in library() {
        let Some(bounds) = bounds_of(&r.problem.cones) else { continue };
        let p = &r.problem;
        let sol = solve_lp(&p.c, &p.a, &p.b, &bounds).unwrap();
        assert_eq!(sol.status, Status::Optimal, "{}", r.name);
        assert!((sol.primal_objective - r.optimum).abs() < 1e-12, "{}", r.name);
        assert!((sol.dual_objective - r.optimum).abs() < 1e-12, "{}", r.name);
        assert!(sol.dual_residual < 1e-12, "{}", r.name);
    }
}

#[test]
fn single_cell_transport_plan() {
    // one source, one sink, unit mass
    let a = SparseMatrix::from_dense(&[vec![1.0], vec![1.0]], 1);
    let sol = solve_lp(&[2.5], &a, &[1.0, 1.0], &[VarBound::NonNeg]).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert_eq!(sol.x, vec![1.0]);
    assert_eq!(sol.dropped_rows, vec![1]);
}

#[test]
fn highest_order_statistic() {
    // max zeta'x  s.t.  sum x = 1, x >= 0
    let zeta = [3.0, 1.0, 2.0];
    let a = SparseMatrix::from_dense(&[vec![1.0; 3]], 3);
    let c: Vec<f64> = zeta.iter().map(|z| -z).collect();
    let sol = solve_lp(&c, &a, &[1.0], &[VarBound::NonNeg; 3]).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert_eq!(-sol.primal_objective, 3.0);
    assert_eq!(sol.x, vec![1.0, 0.0, 0.0]);
}

#[test]
fn degenerate_cycling_candidate_terminates() {
    // Beale's example in equality form
    let a = SparseMatrix::from_dense(
        &[
            vec![0.25, -8.0, -1.0, 9.0, 1.0, 0.0, 0.0],
            vec![0.5, -12.0, -0.5, 3.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        ],
        7,
    );
    let c = [-0.75, 20.0, -0.5, 6.0, 0.0, 0.0, 0.0];
    let sol = solve_lp(&c, &a, &[0.0, 0.0, 1.0], &[VarBound::NonNeg; 7]).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.primal_objective + 1.25).abs() < 1e-12);
}
