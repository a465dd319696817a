use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasscopos_solver::linalg::{svec, svec_len};
use wasscopos_solver::{solve, Cone, ConicProblem, SolverOptions, SparseMatrix, Status};

fn random_psd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    &g * g.transpose() + DMatrix::identity(d, d) * 0.1
}

/// Random problem with strictly feasible primal and dual points built in.
fn feasible_problem(seed: u64, nn: usize, soc: usize, psd: usize, m: usize) -> ConicProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cones = vec![Cone::NonNeg(nn)];
    if soc > 1 {
        cones.push(Cone::Soc(soc));
    }
    if psd > 0 {
        cones.push(Cone::Psd(psd));
    }
    let interior = |rng: &mut ChaCha8Rng| {
        let mut v: Vec<f64> = (0..nn).map(|_| rng.random_range(0.1..2.0)).collect();
        if soc > 1 {
            let tail: Vec<f64> = (1..soc).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = tail.iter().map(|t| t * t).sum::<f64>().sqrt();
            v.push(norm + rng.random_range(0.1..1.0));
            v.extend(tail);
        }
        if psd > 0 {
            v.extend(svec(&random_psd(rng, psd)));
        }
        v
    };
    let x0 = interior(&mut rng);
    let s0 = interior(&mut rng);
    let n = x0.len();
    assert_eq!(n, nn + if soc > 1 { soc } else { 0 } + svec_len(psd));
    let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let a = SparseMatrix::from_dense(&rows, n);
    let b = a.mul_vec(&x0);
    let y0: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let aty = a.tr_mul_vec(&y0);
    let c: Vec<f64> = aty.iter().zip(&s0).map(|(u, v)| u + v).collect();
    ConicProblem { c, a, b, cones }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weak_duality_and_kkt(seed in any::<u64>(), nn in 1usize..6, soc in 0usize..5, psd in 0usize..4, m in 1usize..6) {
        let p = feasible_problem(seed, nn, soc, psd, m);
        let opts = SolverOptions { record_history: true, ..SolverOptions::default() };
        let sol = solve(&p, &opts).unwrap();
        prop_assert_eq!(sol.status, Status::Optimal);
        let scale = 1.0 + wasscopos_solver::linalg::norm2(&p.b) + wasscopos_solver::linalg::norm2(&p.c);
        // c'x - b'y = <x,s> + <x, r_d> - <y, r_p> with <x,s> >= 0
        for h in &sol.history {
            let lhs = h.primal_objective - h.dual_objective;
            let rhs = h.complementarity + h.dual_residual_term - h.primal_residual_term;
            prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + lhs.abs() + h.complementarity.abs()));
            prop_assert!(h.complementarity >= 0.0);
        }
        prop_assert!(sol.primal_objective >= sol.dual_objective - 1e-6);
        prop_assert!(sol.primal_residual <= 1e-7 * scale);
        prop_assert!(sol.dual_residual <= 1e-7 * scale);
        prop_assert!(sol.relative_gap <= 1e-7);
        let xs: f64 = sol.x.iter().zip(&sol.s).map(|(a, b)| a * b).sum();
        prop_assert!(xs / sol.x.len() as f64 <= 1e-6);
    }

    #[test]
    fn duplicating_a_row_keeps_the_optimum(seed in any::<u64>(), nn in 2usize..6, m in 1usize..4) {
        let p = feasible_problem(seed, nn, 3, 2, m);
        let base = solve(&p, &SolverOptions::default()).unwrap();
        let mut q = p.clone();
        let dup: Vec<_> = p.a.entries.iter().filter(|e| e.0 == 0).map(|&(_, j, v)| (m, j, 2.0 * v)).collect();
        q.a.entries.extend(dup);
        q.a.nrows += 1;
        q.b.push(2.0 * p.b[0]);
        let sol = solve(&q, &SolverOptions::default()).unwrap();
        prop_assert_eq!(sol.status, Status::Optimal);
        prop_assert_eq!(sol.dropped_rows.clone(), vec![m]);
        prop_assert!((sol.primal_objective - base.primal_objective).abs() <= 1e-6 * (1.0 + base.primal_objective.abs()));
    }
}
