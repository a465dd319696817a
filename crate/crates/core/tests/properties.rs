use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use wasscopos_core::bound::{solve_bound, BoundOptions};
use wasscopos_core::calibrate::split;
use wasscopos_core::cones::copositivity_spot_check;
use wasscopos_core::experiments::Case;
use wasscopos_core::model::{homogenize, Dataset, MixedBinaryProgram, SupportCone};
use wasscopos_core::transport::{wasserstein2, DiscreteDistribution};

fn point(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, k - 1).prop_map(|v| std::iter::once(1.0).chain(v).collect())
}

fn distribution(k: usize) -> impl Strategy<Value = DiscreteDistribution> {
    prop::collection::vec((point(k), 0.05..1.0f64), 1..4).prop_map(|atoms| {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let (pts, w): (Vec<_>, Vec<_>) = atoms.into_iter().map(|(p, w)| (p, w / total)).unzip();
        DiscreteDistribution::new(pts, w).unwrap()
    })
}

fn random_program(k: usize, n: usize, f: Vec<f64>) -> MixedBinaryProgram {
    MixedBinaryProgram::new(
        DMatrix::from_element(1, n, 1.0),
        DVector::from_element(1, 1.0),
        DMatrix::from_vec(n, k, f),
        BTreeSet::from([0]),
        SupportCone::NonnegOrthant(k),
        None,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lifted_objective_identity(
        f in prop::collection::vec(-2.0..2.0f64, 12),
        xi in point(4),
        xh in point(4),
        x in prop::collection::vec(0.0..2.0f64, 3),
        lambda in 0.0..5.0f64,
    ) {
        let prog = random_program(4, 3, f);
        let h = homogenize(&prog, &Dataset::new(4, vec![xh.clone()]).unwrap()).unwrap();
        let z = DVector::from_iterator(7, xi.iter().chain(&x).copied());
        let lhs = (z.transpose() * h.h(0, lambda) * &z)[0];
        let fx: f64 = (0..3).map(|j| x[j] * (0..4).map(|c| prog.f[(j, c)] * xi[c]).sum::<f64>()).sum();
        let dist: f64 = xi.iter().zip(&xh).map(|(a, b)| (a - b) * (a - b)).sum();
        let rhs = fx - lambda * dist;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn feasible_points_lie_in_the_kernel(
        f in prop::collection::vec(-2.0..2.0f64, 12),
        xi in point(4),
        raw in prop::collection::vec(0.01..1.0f64, 3),
    ) {
        let prog = random_program(4, 3, f);
        let h = homogenize(&prog, &Dataset::new(4, vec![xi.clone()]).unwrap()).unwrap();
        let total: f64 = raw.iter().sum();
        let z = DVector::from_iterator(7, xi.iter().copied().chain(raw.iter().map(|v| v / total)));
        prop_assert!((&h.e * z).amax() < 1e-12);
    }

    #[test]
    fn wasserstein_is_a_metric(p in distribution(3), q in distribution(3), r in distribution(3)) {
        let pq = wasserstein2(&p, &q).unwrap();
        prop_assert!((pq - wasserstein2(&q, &p).unwrap()).abs() < 1e-9);
        prop_assert!(wasserstein2(&p, &p).unwrap() < 1e-7);
        let pr = wasserstein2(&p, &r).unwrap();
        let rq = wasserstein2(&r, &q).unwrap();
        prop_assert!(pq <= pr + rq + 1e-8);
    }

    #[test]
    fn dual_cone_pairs_nonnegatively(w in prop::collection::vec(0.0..2.0f64, 3), xs in prop::collection::vec(-2.0..2.0f64, 20)) {
        let p = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, -1.0]);
        let s: Vec<f64> = (0..2).map(|c| (0..3).map(|r| p[(r, c)] * w[r]).sum()).collect();
        let cone = SupportCone::Polyhedral(p);
        prop_assert!(cone.dual_contains(&s, 1e-9));
        for xi in xs.chunks(2) {
            if cone.contains(xi, 0.0) {
                prop_assert!(s[0] * xi[0] + s[1] * xi[1] >= -1e-12);
            }
        }
    }

    #[test]
    fn psd_plus_nonnegative_passes_the_spot_check(
        l in prop::collection::vec(-1.0..1.0f64, 25),
        nn in prop::collection::vec(0.0..1.0f64, 25),
        seed in any::<u64>(),
    ) {
        let l = DMatrix::from_vec(5, 5, l);
        let nn = DMatrix::from_vec(5, 5, nn);
        let g = &l * l.transpose() + (&nn + nn.transpose());
        prop_assert!(copositivity_spot_check(&g, &SupportCone::NonnegOrthant(2), 2000, 1e-9, seed).pass);
    }

    #[test]
    fn splits_are_deterministic_partitions(n in 2usize..60, count in 1usize..10, frac in 0.01..0.99f64, seed in any::<u64>()) {
        let n_t = ((n as f64 * frac) as usize).clamp(1, n - 1);
        let a = split(n, count, n_t, seed).unwrap();
        prop_assert_eq!(&a, &split(n, count, n_t, seed).unwrap());
        for s in &a {
            let mut all: Vec<usize> = s.train.iter().chain(&s.validation).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(s.train.len(), n_t);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn bound_is_monotone_and_dominates_saa(dist_seed in 0u64..1000, data_seed in 0u64..1000, e1 in 0.0..0.5f64, de in 0.0..0.5f64) {
        let prog = Case::Ssa.program();
        let data = Case::Ssa.distribution(dist_seed).sample(4, data_seed).unwrap();
        let opts = BoundOptions { spot_check_trials: 1000, ..BoundOptions::default() };
        let lo = solve_bound(&prog, &data, e1, None, &opts).unwrap();
        let hi = solve_bound(&prog, &data, e1 + de, None, &opts).unwrap();
        let saa = wasscopos_core::bound::saa_value(&prog, &data).unwrap();
        prop_assert!(lo.value <= hi.value + 1e-6);
        prop_assert!(lo.value >= saa - 1e-6);
        prop_assert_eq!(lo.spot_check_failures + hi.spot_check_failures, 0);
    }
}
