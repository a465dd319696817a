//! Empirical confidence levels of candidate Wasserstein radii.
//!
//! The dataset is split `K` times into a training part of size `N_T` and a
//! validation part. A radius covers a split when the bound computed on the
//! training data is at least the sample average on the validation data. The
//! same splits are shared by every radius of a curve.

use std::io::Write;
use std::path::Path;

use log::warn;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wasscopos_solver::Status;

use crate::bound::{saa_value, solve_bound, BoundOptions};
use crate::error::{Error, Result};
use crate::model::{Dataset, MixedBinaryProgram};

/// Candidate radii used by the case studies.
pub const DEFAULT_GRID: [f64; 15] = [0.001, 0.005, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 2.0];

pub const DEFAULT_SPLITS: usize = 100;

/// Half of the data, rounded up.
pub fn default_train_size(n: usize) -> usize {
    n.div_ceil(2)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// `count` random partitions of `0..n` with `n_t` training indices each.
pub fn split(n: usize, count: usize, n_t: usize, seed: u64) -> Result<Vec<Split>> {
    if n_t == 0 || n_t >= n {
        return Err(Error::Config(format!("training size must satisfy 1 <= N_T < N, got N_T = {n_t}, N = {n}")));
    }
    if count == 0 {
        return Err(Error::Config("split count K must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let mut in_train = vec![false; n];
            let mut train: Vec<usize> = sample(&mut rng, n, n_t).into_vec();
            train.sort_unstable();
            for &i in &train {
                in_train[i] = true;
            }
            let validation = (0..n).filter(|&i| !in_train[i]).collect();
            Split { train, validation }
        })
        .collect())
}

/// Settings shared by every radius of a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub splits: usize,
    /// defaults to `ceil(N / 2)`
    pub train_size: Option<usize>,
    pub seed: u64,
    pub r: Option<f64>,
    pub bound: BoundOptions,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        let bound = BoundOptions { spot_check_trials: 0, ..BoundOptions::default() };
        CalibrationOptions { splits: DEFAULT_SPLITS, train_size: None, seed: 0, r: None, bound }
    }
}

impl CalibrationOptions {
    fn train_size_for(&self, n: usize) -> usize {
        self.train_size.unwrap_or_else(|| default_train_size(n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub grid: Vec<f64>,
    /// fraction of splits covered at each radius, as measured
    pub raw: Vec<f64>,
    /// after carrying coverage forward along the grid within each split
    pub confidence: Vec<f64>,
    pub splits: usize,
    pub train_size: usize,
    pub seed: u64,
    /// bound solves that failed and were counted as not covering
    pub failures: usize,
}

/// Bound value usable for a coverage test, or `None` for a failed solve.
fn trained_bound(prog: &MixedBinaryProgram, train: &Dataset, eps: f64, opts: &CalibrationOptions) -> Option<f64> {
    match solve_bound(prog, train, eps, opts.r, &opts.bound) {
        Ok(res) if matches!(res.status, Status::Optimal | Status::MaxIter | Status::Numerical) && res.value.is_finite() => {
            if res.status != Status::Optimal {
                warn!("calibration bound at epsilon {eps} ended with status {}; using its value", res.status);
            }
            Some(res.value)
        }
        Ok(res) => {
            warn!("calibration bound at epsilon {eps} failed with status {}", res.status);
            None
        }
        Err(e) => {
            warn!("calibration bound at epsilon {eps} failed: {e}");
            None
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("radius grid is empty".into()));
    }
    if grid.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(Error::Config("radii must be nonnegative numbers".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("radius grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Coverage indicators, `covered[split][radius]`, and the failure count.
fn coverage(
    prog: &MixedBinaryProgram,
    data: &Dataset,
    grid: &[f64],
    opts: &CalibrationOptions,
) -> Result<(Vec<Vec<bool>>, usize)> {
    let splits = split(data.len(), opts.splits, opts.train_size_for(data.len()), opts.seed)?;
    let jobs: Vec<(usize, usize)> = (0..splits.len()).flat_map(|s| (0..grid.len()).map(move |g| (s, g))).collect();
    let references: Vec<f64> =
        splits.par_iter().map(|sp| saa_value(prog, &data.subset(&sp.validation))).collect::<Result<_>>()?;
    let trains: Vec<Dataset> = splits.iter().map(|sp| data.subset(&sp.train)).collect();
    let values: Vec<Option<f64>> =
        jobs.par_iter().map(|&(s, g)| trained_bound(prog, &trains[s], grid[g], opts)).collect();
    let mut covered = vec![vec![false; grid.len()]; splits.len()];
    let mut failures = 0;
    for (&(s, g), v) in jobs.iter().zip(&values) {
        match v {
            Some(v) => covered[s][g] = *v >= references[s],
            None => failures += 1,
        }
    }
    Ok((covered, failures))
}

/// Fraction of splits on which the bound at `eps` covers the validation
/// sample average.
pub fn empirical_confidence(
    prog: &MixedBinaryProgram,
    data: &Dataset,
    eps: f64,
    opts: &CalibrationOptions,
) -> Result<f64> {
    check_grid(&[eps])?;
    let (covered, _) = coverage(prog, data, &[eps], opts)?;
    Ok(covered.iter().filter(|c| c[0]).count() as f64 / covered.len() as f64)
}

/// Confidence levels over an increasing grid. The bound is nondecreasing in
/// the radius, so once a split is covered it stays covered; `confidence`
/// applies this to absorb solver noise while `raw` keeps the measurements.
pub fn curve(prog: &MixedBinaryProgram, data: &Dataset, grid: &[f64], opts: &CalibrationOptions) -> Result<CalibrationCurve> {
    check_grid(grid)?;
    let (covered, failures) = coverage(prog, data, grid, opts)?;
    let total = covered.len() as f64;
    let mut raw = vec![0usize; grid.len()];
    let mut confidence = vec![0usize; grid.len()];
    for row in &covered {
        let mut seen = false;
        for (g, &c) in row.iter().enumerate() {
            seen |= c;
            raw[g] += c as usize;
            confidence[g] += seen as usize;
        }
    }
    let frac = |counts: Vec<usize>| counts.into_iter().map(|c| c as f64 / total).collect();
    Ok(CalibrationCurve {
        grid: grid.to_vec(),
        raw: frac(raw),
        confidence: frac(confidence),
        splits: opts.splits,
        train_size: opts.train_size_for(data.len()),
        seed: opts.seed,
        failures,
    })
}

/// Smallest radius whose confidence reaches `1 - beta`.
pub fn select_radius(curve: &CalibrationCurve, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Config(format!("beta must lie in [0, 1], got {beta}")));
    }
    if curve.grid.is_empty() {
        return Err(Error::Config("calibration curve is empty".into()));
    }
    // counts over K splits are exact multiples of 1/K; allow rounding
    let target = 1.0 - beta - 1e-12;
    curve.grid.iter().zip(&curve.confidence).find(|(_, &c)| c >= target).map(|(&e, _)| e).ok_or_else(|| {
        let best = curve.confidence.iter().cloned().fold(0.0, f64::max);
        Error::Config(format!(
            "no radius reaches confidence {:.3} (best {best:.3} at {}); extend the grid with larger radii",
            1.0 - beta,
            curve.grid.last().unwrap()
        ))
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveRow {
    epsilon: f64,
    confidence: f64,
    raw_confidence: f64,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "N_T")]
    n_t: usize,
    seed: u64,
}

impl CalibrationCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for ((&epsilon, &confidence), &raw_confidence) in self.grid.iter().zip(&self.confidence).zip(&self.raw) {
            w.serialize(CurveRow { epsilon, confidence, raw_confidence, k: self.splits, n_t: self.train_size, seed: self.seed })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_curve(conf: &[f64]) -> CalibrationCurve {
        CalibrationCurve {
            grid: vec![0.01, 0.1, 0.2][..conf.len()].to_vec(),
            raw: conf.to_vec(),
            confidence: conf.to_vec(),
            splits: 20,
            train_size: 5,
            seed: 0,
            failures: 0,
        }
    }

    #[test]
    fn splits_partition_the_indices() {
        let s = split(10, 3, 5, 7).unwrap();
        assert_eq!(s.len(), 3);
        for sp in &s {
            assert_eq!((sp.train.len(), sp.validation.len()), (5, 5));
            let mut all: Vec<usize> = sp.train.iter().chain(&sp.validation).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..10).collect::<Vec<_>>());
        }
        assert_eq!(s, split(10, 3, 5, 7).unwrap());
        assert_eq!(split(10, 2, 9, 1).unwrap()[0].validation.len(), 1);
        assert!(split(10, 2, 10, 1).is_err());
        assert!(split(10, 2, 0, 1).is_err());
    }

    #[test]
    fn radius_selection() {
        let c = toy_curve(&[0.40, 0.85, 0.92]);
        assert_eq!(select_radius(&c, 0.1).unwrap(), 0.2);
        assert_eq!(select_radius(&c, 0.5).unwrap(), 0.1);
        assert!(select_radius(&c, 0.05).is_err());
        let full = toy_curve(&[0.5, 0.9, 1.0]);
        assert_eq!(select_radius(&full, 0.0).unwrap(), 0.2);
    }

    #[test]
    fn exact_fraction_meets_target() {
        // 18 of 20 splits is exactly 0.9 even though 1 - 0.1 rounds differently
        let c = toy_curve(&[18.0 / 20.0]);
        assert_eq!(select_radius(&c, 0.1).unwrap(), 0.01);
    }

    #[test]
    fn curve_csv_columns() {
        let mut buf = Vec::new();
        toy_curve(&[0.4, 0.85]).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "epsilon,confidence,raw_confidence,K,N_T,seed");
        assert_eq!(text.lines().count(), 3);
    }
}
