//! Discrete distributions and the exact 2-Wasserstein distance.

use serde::{Deserialize, Serialize};
use wasscopos_solver::{solve_lp, SparseMatrix, Status, VarBound};

use crate::error::{Error, Result};
use crate::model::Dataset;

const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    /// Weights within `1e-12` of summing to one are renormalized.
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::dim("distribution", format!("{} atoms, {} weights", atoms.len(), weights.len())));
        }
        let k = atoms[0].len();
        if atoms.iter().any(|a| a.len() != k) {
            return Err(Error::dim("distribution", "atoms of unequal length"));
        }
        if atoms.iter().any(|a| (a[0] - 1.0).abs() > 1e-12) {
            return Err(Error::Config("atoms must have first coordinate 1".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL * weights.len() as f64 {
            return Err(Error::Config(format!("weights sum to {total}")));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(DiscreteDistribution { atoms, weights })
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }
}

/// Uniform weights over the samples; duplicates stay separate atoms.
pub fn empirical(data: &Dataset) -> Result<DiscreteDistribution> {
    if data.is_empty() {
        return Err(Error::Config("empty dataset".into()));
    }
    let n = data.len();
    DiscreteDistribution::new(data.samples().to_vec(), vec![1.0 / n as f64; n])
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared-distance cost matrix, row-major `len(p) x len(q)`.
pub fn cost_matrix(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Vec<f64> {
    p.atoms.iter().flat_map(|a| q.atoms.iter().map(move |b| sq_dist(a, b))).collect()
}

/// Optimal transport plan (row-major) and the 2-Wasserstein distance.
pub fn transport_plan(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<(Vec<f64>, f64)> {
    if p.dim() != q.dim() {
        return Err(Error::dim("distribution", format!("dimensions {} and {}", p.dim(), q.dim())));
    }
    let (mp, mq) = (p.len(), q.len());
    let cost = cost_matrix(p, q);
    let mut a = SparseMatrix::new(mp + mq, mp * mq);
    for i in 0..mp {
        for j in 0..mq {
            a.push(i, i * mq + j, 1.0);
            a.push(mp + j, i * mq + j, 1.0);
        }
    }
    let b: Vec<f64> = p.weights.iter().chain(&q.weights).copied().collect();
    let sol = solve_lp(&cost, &a, &b, &vec![VarBound::NonNeg; mp * mq])?;
    if sol.status != Status::Optimal {
        return Err(Error::NonOptimal { status: sol.status });
    }
    Ok((sol.x, sol.primal_objective.max(0.0).sqrt()))
}

pub fn wasserstein2(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    transport_plan(p, q).map(|r| r.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(points: &[f64], weights: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::new(points.iter().map(|&x| vec![1.0, x]).collect(), weights.to_vec()).unwrap()
    }

    #[test]
    fn two_atoms_onto_one() {
        let w = wasserstein2(&dist(&[0.0, 2.0], &[0.5, 0.5]), &dist(&[0.0], &[1.0])).unwrap();
        assert!((w - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn diracs_and_identity() {
        let a = dist(&[1.5], &[1.0]);
        let b = dist(&[-2.0], &[1.0]);
        assert!((wasserstein2(&a, &b).unwrap() - 3.5).abs() < 1e-12);
        let q = dist(&[0.0, 1.0, 3.0], &[0.2, 0.3, 0.5]);
        assert_eq!(wasserstein2(&q, &q).unwrap(), 0.0);
    }

    #[test]
    fn empirical_weights() {
        let d = Dataset::from_observations(&[vec![1.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let e = empirical(&d).unwrap();
        assert_eq!(e.weights(), &[0.25; 4]);
        assert_eq!(e.len(), 4);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(DiscreteDistribution::new(vec![vec![1.0]], vec![0.5]).is_err());
        assert!(DiscreteDistribution::new(vec![vec![1.0], vec![1.0]], vec![1.5, -0.5]).is_err());
    }
}
