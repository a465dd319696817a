use wasscopos_solver::reference::library;
use wasscopos_solver::{solve, solve_lp, SolverOptions, Status, VarBound, SparseMatrix};

#[test]
fn reference_library_values_and_kkt() {
    let lib = library();
    assert!(lib.len() >= 10);
    for r in lib {
        let sol = solve(&r.problem, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal, "{}", r.name);
        let err = (sol.primal_objective - r.optimum).abs();
        assert!(err <= 1e-6, "{}: value {} vs {}", r.name, sol.primal_objective, r.optimum);
        assert!(sol.primal_residual <= 1e-7, "{}: primal residual {}", r.name, sol.primal_residual);
        assert!(sol.dual_residual <= 1e-7, "{}: dual residual {}", r.name, sol.dual_residual);
        let xs: f64 = sol.x.iter().zip(&sol.s).map(|(a, b)| a * b).sum();
        assert!(xs / sol.x.len() as f64 <= 1e-6, "{}: complementarity {xs}", r.name);
    }
}

#[test]
fn max_offdiagonal_gives_all_ones() {
    let r = library().into_iter().find(|r| r.name == "sdp_max_offdiagonal").unwrap();
    let sol = solve(&r.problem, &SolverOptions::default()).unwrap();
    let x = wasscopos_solver::linalg::smat(2, &sol.x);
    for v in x.iter() {
        assert!((v - 1.0).abs() < 1e-5, "{x}");
    }
}

#[test]
fn duplicated_rows_are_reported() {
    let r = library().into_iter().find(|r| r.name == "lp_duplicated_row").unwrap();
    let sol = solve(&r.problem, &SolverOptions::default()).unwrap();
    assert_eq!(sol.dropped_rows, vec![1, 2]);
}

#[test]
fn inconsistent_duplicate_is_infeasible() {
    let p = wasscopos_solver::ConicProblem {
        c: vec![1.0, 1.0],
        a: SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]], 2),
        b: vec![1.0, 2.0],
        cones: vec![wasscopos_solver::Cone::NonNeg(2)],
    };
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Infeasible);
    let lp = solve_lp(&p.c, &p.a, &p.b, &[VarBound::NonNeg; 2]).unwrap();
    assert_eq!(lp.status, Status::Infeasible);
}

#[test]
fn detects_primal_infeasible_lp() {
    // x1 + x2 = -1, x >= 0
    let p = wasscopos_solver::ConicProblem {
        c: vec![1.0, 1.0],
        a: SparseMatrix::from_dense(&[vec![1.0, 1.0]], 2),
        b: vec![-1.0],
        cones: vec![wasscopos_solver::Cone::NonNeg(2)],
    };
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Infeasible);
}

#[test]
fn detects_unbounded_lp() {
    // min -x1  s.t. x1 - x2 = 0, x >= 0
    let p = wasscopos_solver::ConicProblem {
        c: vec![-1.0, 0.0],
        a: SparseMatrix::from_dense(&[vec![1.0, -1.0]], 2),
        b: vec![0.0],
        cones: vec![wasscopos_solver::Cone::NonNeg(2)],
    };
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Unbounded);
    let lp = solve_lp(&p.c, &p.a, &p.b, &[VarBound::NonNeg; 2]).unwrap();
    assert_eq!(lp.status, Status::Unbounded);
}

#[test]
fn dimension_mismatch_is_an_error() {
    let p = wasscopos_solver::ConicProblem {
        c: vec![1.0],
        a: SparseMatrix::new(1, 2),
        b: vec![0.0],
        cones: vec![wasscopos_solver::Cone::NonNeg(2)],
    };
    assert!(solve(&p, &SolverOptions::default()).is_err());
}

#[test]
fn problem_roundtrips_through_json() {
    for r in library() {
        let text = serde_json::to_string(&r.problem).unwrap();
        let back: wasscopos_solver::ConicProblem = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r.problem);
    }
}
