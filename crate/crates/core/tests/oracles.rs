//! Hand-computed values checked through the public API.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use wasscopos_core::bound::{build, saa_value, solve_bound, BoundOptions};
use wasscopos_core::calibrate::{curve, empirical_confidence, select_radius, CalibrationOptions, DEFAULT_GRID};
use wasscopos_core::cones::{emit_membership, SymExpr};
use wasscopos_core::experiments::{random_correlation, simulate, Case};
use wasscopos_core::model::{homogenize, solve_deterministic, Dataset, MixedBinaryProgram, SupportCone};
use wasscopos_core::transport::{wasserstein2, DiscreteDistribution};
use wasscopos_solver::DualBuilder;

fn ssa_dirac(zeta: &[f64]) -> Dataset {
    Dataset::from_observations(&[zeta.to_vec()]).unwrap()
}

#[test]
fn binary_quadratic_at_a_point() {
    let prog = MixedBinaryProgram::new(
        DMatrix::from_element(1, 1, 1.0),
        DVector::from_element(1, 1.0),
        DMatrix::zeros(1, 2),
        BTreeSet::from([0]),
        SupportCone::NonnegOrthant(2),
        None,
    )
    .unwrap();
    let h = homogenize(&prog, &ssa_dirac(&[0.5])).unwrap();
    let z = DVector::from_vec(vec![1.0, 0.5, 0.3]);
    let v = (z.transpose() * &h.q[0] * &z)[0];
    assert!((v - (-0.21)).abs() < 1e-14, "{v}");
}

#[test]
fn knapsack_augmented_shape() {
    let prog = Case::Knapsack.program();
    assert_eq!((prog.n(), prog.m(), prog.k()), (9, 5, 5));
    assert!(prog.binary_bounds_ok());
}

#[test]
fn knapsack_and_project_oracles() {
    let (v, x) = solve_deterministic(&Case::Knapsack.program(), &[1.0; 5]).unwrap();
    assert_eq!(v, 2.0);
    assert_eq!(x[..4].iter().sum::<f64>(), 2.0);
    let project = Case::Project.program();
    let (v, _) = solve_deterministic(&project, &vec![1.0; project.k()]).unwrap();
    assert!((v - 3.0).abs() < 1e-12, "{v}");
}

#[test]
fn two_atoms_onto_the_origin() {
    let q = DiscreteDistribution::new(vec![vec![1.0, 0.0], vec![1.0, 2.0]], vec![0.5, 0.5]).unwrap();
    let p = DiscreteDistribution::new(vec![vec![1.0, 0.0]], vec![1.0]).unwrap();
    assert!((wasserstein2(&q, &p).unwrap() - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn membership_counts_for_seven_by_seven_target() {
    let mut b = DualBuilder::new();
    let mut t = SymExpr::new(7);
    t.add_matrix(&DMatrix::identity(7, 7), None, 1.0);
    let c = emit_membership(&mut b, &t, &SupportCone::NonnegOrthant(4)).unwrap().counts();
    assert_eq!((c.psd_blocks, c.psd_dim), (1, 7));
    assert_eq!((c.y_entries, c.w_entries, c.s22_entries), (10, 12, 6));
    assert_eq!(c.linking_equalities, 28);
}

#[test]
fn ssa_bound_model_blocks() {
    let prog = Case::Ssa.program();
    let data = Case::Ssa.distribution(3).sample(10, 4).unwrap();
    let model = build(&prog, &data, 0.1, None).unwrap();
    assert_eq!(model.certificates.len(), 10);
    assert_eq!((model.alpha.len(), model.rho.len()), (10, 0));
    assert!(model.v.iter().all(|v| v.is_empty()));
    for cert in &model.certificates {
        let c = cert.counts();
        assert_eq!(c.psd_blocks, 1);
        // the PSD block lives on the 6-dimensional null space of E
        assert_eq!(c.psd_dim, 6);
        assert_eq!(c.linking_equalities, 28);
    }
}

#[test]
fn dirac_dataset_at_zero_radius() {
    let r = solve_bound(&Case::Ssa.program(), &ssa_dirac(&[3.0, 1.0, 2.0]), 0.0, None, &BoundOptions::default()).unwrap();
    assert!(r.value >= 3.0 - 1e-6 && r.value <= 3.03, "{}", r.value);
    assert_eq!(r.spot_check_failures, 0);
}

#[test]
fn knapsack_bound_dominates_saa() {
    let prog = Case::Knapsack.program();
    let data = Case::Knapsack.distribution(21).sample(6, 22).unwrap();
    let saa = saa_value(&prog, &data).unwrap();
    for eps in [0.0, 0.2] {
        let r = solve_bound(&prog, &data, eps, None, &BoundOptions::default()).unwrap();
        assert!(r.value >= saa - 1e-6, "eps {eps}: {} < {saa}", r.value);
    }
}

#[test]
fn saa_of_two_samples() {
    let data = Dataset::from_observations(&[vec![3.0, 1.0, 2.0], vec![1.0, 4.0, 1.0]]).unwrap();
    assert_eq!(saa_value(&Case::Ssa.program(), &data).unwrap(), 3.5);
}

#[test]
fn correlation_trace() {
    for d in [1, 3, 7] {
        let c = random_correlation(d, 5);
        assert!((c.trace() - d as f64).abs() < 1e-10);
    }
}

#[test]
fn lognormal_sample_mean() {
    let spec = Case::Ssa.distribution(8);
    let (mu, cov) = spec.lognormal_moments().unwrap();
    let n = 100_000;
    let draws = spec.draw(n, 9).unwrap();
    for (i, m) in mu.iter().enumerate() {
        let mean = draws.iter().map(|z| z[i]).sum::<f64>() / n as f64;
        let se = (cov[(i, i)] / n as f64).sqrt();
        assert!((mean - m).abs() <= 3.0 * se, "coordinate {i}: {mean} vs {m}");
    }
}

#[test]
fn simulation_repeatability() {
    let prog = Case::Ssa.program();
    let spec = Case::Ssa.distribution(10);
    let a = simulate(&prog, &spec, 20_000, 1).unwrap();
    let b = simulate(&prog, &spec, 20_000, 2).unwrap();
    assert!((a.mean - b.mean).abs() <= 3.0 * a.std_error.hypot(b.std_error));
    assert_eq!(simulate(&prog, &spec, 500, 1).unwrap().mean, simulate(&prog, &spec, 500, 1).unwrap().mean);
}

#[test]
fn zero_radius_rarely_covers() {
    let prog = Case::Ssa.program();
    let data = Case::Ssa.distribution(12).sample(20, 13).unwrap();
    let opts = CalibrationOptions { splits: 20, seed: 1, ..CalibrationOptions::default() };
    assert!(empirical_confidence(&prog, &data, 0.0, &opts).unwrap() < 1.0);
}

#[test]
fn default_grid_reaches_ninety_percent() {
    let prog = Case::Ssa.program();
    let data = Case::Ssa.distribution(14).sample(20, 15).unwrap();
    let opts = CalibrationOptions { splits: 20, seed: 2, ..CalibrationOptions::default() };
    let c = curve(&prog, &data, &DEFAULT_GRID, &opts).unwrap();
    let eps = select_radius(&c, 0.1).unwrap();
    assert!(DEFAULT_GRID.contains(&eps));
}
