//! Random instances, the three case studies and the Monte Carlo trial driver.
//!
//! Cases:
//!
//! * `ssa`: `max zeta'x` over the unit simplex in `R^3`, lognormal `zeta`.
//! * `knapsack`: items with weights `(5, 4, 6, 3)` and capacity 10, lognormal
//!   values, binary bounds enforced through slacks.
//! * `project`: longest path through the 6-node, 7-arc network
//!   [`PROJECT_ARCS`] with truncated normal arc lengths.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bound::{saa_value, solve_bound, BoundOptions};
use crate::calibrate::{curve, select_radius, CalibrationCurve, CalibrationOptions, DEFAULT_GRID, DEFAULT_SPLITS};
use crate::error::{Error, Result};
use crate::model::{enforce_binary_bounds, solve_deterministic, Dataset, MixedBinaryProgram, SupportCone};

/// Arcs `(from, to)` of the project network, nodes numbered from 1. Source 1,
/// sink 6; the three source-sink paths are 1-2-4-6, 1-3-4-6 and 1-3-5-6.
pub const PROJECT_ARCS: [(usize, usize); 7] = [(1, 2), (1, 3), (2, 4), (3, 4), (3, 5), (4, 6), (5, 6)];
pub const PROJECT_NODES: usize = 6;

pub const KNAPSACK_WEIGHTS: [f64; 4] = [5.0, 4.0, 6.0, 3.0];
pub const KNAPSACK_CAPACITY: f64 = 10.0;

/// Independent seed for `(stream, index)` derived from a master seed.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}

/// Random correlation matrix with a random spectrum summing to `d`, made
/// unit-diagonal by Givens rotations that preserve the eigenvalues.
pub fn random_correlation(d: usize, seed: u64) -> DMatrix<f64> {
    if d <= 1 {
        return DMatrix::identity(d, d);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eig: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = eig.iter().sum();
    eig.iter_mut().for_each(|v| *v *= d as f64 / total);
    // Haar orthogonal matrix: QR of a Gaussian matrix with sign correction
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let mut a = &q * DMatrix::from_diagonal(&DVector::from_vec(eig)) * q.transpose();
    for _ in 0..d - 1 {
        let below = (0..d).find(|&i| a[(i, i)] < 1.0 - 1e-14);
        let above = (0..d).find(|&i| a[(i, i)] > 1.0 + 1e-14);
        let (Some(i), Some(j)) = (below, above) else { break };
        let (aii, ajj, aij) = (a[(i, i)], a[(j, j)], a[(i, j)]);
        let disc = (aij * aij - (aii - 1.0) * (ajj - 1.0)).max(0.0).sqrt();
        let t = (aij + if aij >= 0.0 { disc } else { -disc }) / (ajj - 1.0);
        let c = 1.0 / (1.0 + t * t).sqrt();
        let s = c * t;
        for k in 0..d {
            let (ri, rj) = (a[(i, k)], a[(j, k)]);
            a[(i, k)] = c * ri - s * rj;
            a[(j, k)] = s * ri + c * rj;
        }
        for k in 0..d {
            let (ci, cj) = (a[(k, i)], a[(k, j)]);
            a[(k, i)] = c * ci - s * cj;
            a[(k, j)] = s * ci + c * cj;
        }
        a[(i, i)] = 1.0;
    }
    for i in 0..d {
        a[(i, i)] = 1.0;
        for j in 0..i {
            let v = (0.5 * (a[(i, j)] + a[(j, i)])).clamp(-1.0, 1.0);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

/// Mean and covariance of `exp(Y)` for `Y ~ N(mu, sigma)`.
pub fn moments_to_lognormal(mu: &[f64], sigma: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let d = mu.len();
    let mean = (0..d).map(|i| (mu[i] + 0.5 * sigma[(i, i)]).exp()).collect();
    let cov = DMatrix::from_fn(d, d, |i, j| {
        (mu[i] + mu[j] + 0.5 * (sigma[(i, i)] + sigma[(j, j)])).exp() * sigma[(i, j)].exp_m1()
    });
    (mean, cov)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    /// `zeta = exp(Y)`
    Lognormal,
    /// `zeta = Y` conditioned on `Y >= 0`
    TruncatedNormal,
}

/// Law of the uncertain coefficients `zeta`, built from `Y ~ N(mu, cov)`.
/// The second moment of `Y` is `cov + mu mu'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    pub mu: Vec<f64>,
    /// row-major covariance of `Y`
    pub cov: Vec<Vec<f64>>,
}

/// Below this acceptance rate truncated sampling gives up.
const MIN_ACCEPTANCE: f64 = 1e-4;

impl DistributionSpec {
    pub fn new(kind: DistributionKind, mu: Vec<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let spec = DistributionSpec { kind, mu, cov: cov.row_iter().map(|r| r.iter().copied().collect()).collect() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn cov_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.cov[i][j])
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::Config("distribution has dimension 0".into()));
        }
        if self.cov.len() != d || self.cov.iter().any(|r| r.len() != d) {
            return Err(Error::dim("cov", format!("expected {d} x {d}")));
        }
        let c = self.cov_matrix();
        if (&c - c.transpose()).amax() > 1e-10 * (1.0 + c.amax()) {
            return Err(Error::Config("covariance is not symmetric".into()));
        }
        let lmin = SymmetricEigen::new(c.clone()).eigenvalues.min();
        if lmin < -1e-10 * (1.0 + c.amax()) {
            return Err(Error::Config(format!("covariance is not PSD (eigenvalue {lmin:e})")));
        }
        if self.mu.iter().chain(self.cov.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Config("distribution parameters must be finite".into()));
        }
        Ok(())
    }

    /// Mean and covariance of `zeta` in the lognormal case.
    pub fn lognormal_moments(&self) -> Option<(Vec<f64>, DMatrix<f64>)> {
        (self.kind == DistributionKind::Lognormal).then(|| moments_to_lognormal(&self.mu, &self.cov_matrix()))
    }

    /// Lower-triangular `L` with `L L' = cov`; a clipped eigen factor when
    /// the covariance is only semidefinite.
    fn factor(&self) -> DMatrix<f64> {
        let c = self.cov_matrix();
        if let Some(ch) = c.clone().cholesky() {
            return ch.l();
        }
        let eig = SymmetricEigen::new(c);
        let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        &eig.eigenvectors * DMatrix::from_diagonal(&root)
    }

    /// Raw draws of `zeta` (without the homogenizing coordinate).
    pub fn draw(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let d = self.dim();
        let l = self.factor();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        let mut attempts: u64 = 0;
        let mut z = DVector::zeros(d);
        while out.len() < n {
            attempts += 1;
            z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            let y = &l * &z;
            let point: Vec<f64> = (0..d).map(|i| self.mu[i] + y[i]).collect();
            match self.kind {
                DistributionKind::Lognormal => out.push(point.into_iter().map(f64::exp).collect()),
                DistributionKind::TruncatedNormal => {
                    if point.iter().all(|v| *v >= 0.0) {
                        out.push(point);
                    } else if attempts >= 100_000 && (out.len() as f64) < MIN_ACCEPTANCE * attempts as f64 {
                        return Err(Error::Config(format!(
                            "truncated normal accepts {} of {attempts} draws; use means further inside the orthant",
                            out.len()
                        )));
                    }
                }
            }
        }
        Ok(out)
    }

    /// `n` homogenized samples `(1, zeta)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::Config("sample size must be positive".into()));
        }
        Dataset::from_observations(&self.draw(n, seed)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Ssa,
    Project,
    Knapsack,
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ssa" => Ok(Case::Ssa),
            "project" => Ok(Case::Project),
            "knapsack" => Ok(Case::Knapsack),
            other => Err(Error::Config(format!("unknown case '{other}' (expected ssa, project or knapsack)"))),
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::Ssa => "ssa",
            Case::Project => "project",
            Case::Knapsack => "knapsack",
        })
    }
}

/// `F = (0 | I)` padded with `extra` zero rows.
fn selector(n: usize, extra: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n + extra, n + 1, |r, c| if r < n && c == r + 1 { 1.0 } else { 0.0 })
}

impl Case {
    /// Dimension of `zeta`.
    pub fn dim(&self) -> usize {
        match self {
            Case::Ssa => 3,
            Case::Project => PROJECT_ARCS.len(),
            Case::Knapsack => KNAPSACK_WEIGHTS.len(),
        }
    }

    pub fn program(&self) -> MixedBinaryProgram {
        let n = self.dim();
        let k = n + 1;
        let prog = match self {
            Case::Ssa => MixedBinaryProgram::new(
                DMatrix::from_element(1, n, 1.0),
                DVector::from_element(1, 1.0),
                selector(n, 0),
                BTreeSet::new(),
                SupportCone::NonnegOrthant(k),
                None,
            ),
            Case::Knapsack => {
                // w'x + s = W with a continuous slack s
                let mut a = DMatrix::zeros(1, n + 1);
                for (j, w) in KNAPSACK_WEIGHTS.iter().enumerate() {
                    a[(0, j)] = *w;
                }
                a[(0, n)] = 1.0;
                MixedBinaryProgram::new(
                    a,
                    DVector::from_element(1, KNAPSACK_CAPACITY),
                    selector(n, 1),
                    (0..n).collect(),
                    SupportCone::NonnegOrthant(k),
                    None,
                )
                .map(|p| enforce_binary_bounds(&p, false))
            }
            Case::Project => {
                // out-flow minus in-flow: 1 at the source, -1 at the sink
                let mut a = DMatrix::zeros(PROJECT_NODES, n);
                for (j, &(from, to)) in PROJECT_ARCS.iter().enumerate() {
                    a[(from - 1, j)] = 1.0;
                    a[(to - 1, j)] = -1.0;
                }
                let mut b = DVector::zeros(PROJECT_NODES);
                b[0] = 1.0;
                b[PROJECT_NODES - 1] = -1.0;
                MixedBinaryProgram::new(a, b, selector(n, 0), BTreeSet::new(), SupportCone::NonnegOrthant(k), None)
            }
        };
        prog.expect("case instances are well formed")
    }

    /// Random distribution of the kind used by the case, as in the studies:
    /// `mu` uniform on a box, `cov = diag(s) C diag(s)` with `C` a random
    /// correlation matrix.
    pub fn distribution(&self, seed: u64) -> DistributionSpec {
        let d = self.dim();
        let (kind, hi, sd) = match self {
            Case::Ssa | Case::Knapsack => (DistributionKind::Lognormal, 2.0, 0.25),
            Case::Project => (DistributionKind::TruncatedNormal, 5.0, 1.0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unif = Uniform::new(0.0, hi).expect("valid range");
        let mu: Vec<f64> = (0..d).map(|_| unif.sample(&mut rng)).collect();
        let c = random_correlation(d, rng.next_u64());
        let cov = c * (sd * sd);
        DistributionSpec::new(kind, mu, &cov).expect("generated covariance is valid")
    }
}

/// The instance of a named case and a random distribution for it.
pub fn build_case(name: &str, seed: u64) -> Result<(MixedBinaryProgram, DistributionSpec)> {
    let case: Case = name.parse()?;
    Ok((case.program(), case.distribution(seed)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Monte Carlo estimate of `E[v(xi)]`.
pub fn simulate(prog: &MixedBinaryProgram, spec: &DistributionSpec, samples: usize, seed: u64) -> Result<Simulation> {
    let data = spec.sample(samples, seed)?;
    let values: Vec<f64> =
        data.samples().par_iter().map(|xi| solve_deterministic(prog, xi).map(|r| r.0)).collect::<Result<_>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok(Simulation { mean, std_error: (var / n).sqrt(), samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialMode {
    /// one underlying distribution, a fresh dataset per trial
    Fixed,
    /// a fresh random distribution per trial
    Varied,
}

impl FromStr for TrialMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(TrialMode::Fixed),
            "varied" => Ok(TrialMode::Varied),
            other => Err(Error::Config(format!("unknown trial mode '{other}' (expected fixed or varied)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub case: Case,
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub beta: f64,
    pub seed: u64,
    pub mode: TrialMode,
    /// splits `K` per calibration
    pub splits: usize,
    /// calibration training size, `ceil(N / 2)` when absent
    pub train_size: Option<usize>,
    pub grid: Vec<f64>,
    /// Monte Carlo samples behind each simulated value
    pub sim_samples: usize,
    pub bound: BoundOptions,
}

impl ExperimentConfig {
    pub fn new(case: Case) -> Self {
        ExperimentConfig {
            case,
            n_list: vec![10, 20, 40, 80, 160, 320, 640, 1280],
            trials: 100,
            beta: 0.1,
            seed: 0,
            mode: TrialMode::Fixed,
            splits: DEFAULT_SPLITS,
            train_size: None,
            grid: DEFAULT_GRID.to_vec(),
            sim_samples: 100_000,
            bound: BoundOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_list.iter().any(|&n| n < 2) {
            return Err(Error::Config("every N must be at least 2 to allow a split".into()));
        }
        if self.trials == 0 || self.sim_samples == 0 {
            return Err(Error::Config("trials and simulation samples must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        Ok(())
    }
}

// seed streams
const S_BASE: u64 = 1;
const S_CAL_DATA: u64 = 2;
const S_CAL_SPLIT: u64 = 3;
const S_TRIAL_DATA: u64 = 4;
const S_TRIAL_DIST: u64 = 5;
const S_SIM: u64 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub case: Case,
    #[serde(rename = "N")]
    pub n: usize,
    pub trial: usize,
    pub epsilon: f64,
    pub v_wb: f64,
    pub v_sb: f64,
    /// sample average of the trial's own dataset
    pub v_saa: f64,
    pub gap: f64,
    pub covered: bool,
    pub runtime_ms: f64,
    pub status: String,
    pub certified: bool,
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub case: Case,
    #[serde(rename = "N")]
    pub n: usize,
    pub epsilon: f64,
    pub trials: usize,
    pub failed: usize,
    pub mean_gap: f64,
    pub gap_q20: f64,
    pub gap_q50: f64,
    pub gap_q80: f64,
    pub v_wb_q20: f64,
    pub v_wb_q50: f64,
    pub v_wb_q80: f64,
    pub mean_v_sb: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    #[serde(rename = "N")]
    pub n: usize,
    pub epsilon: f64,
    pub confidence: f64,
    pub raw_confidence: f64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N_T")]
    pub n_t: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub trials: Vec<TrialRecord>,
    pub aggregates: Vec<Aggregate>,
    pub curves: Vec<(usize, CalibrationCurve)>,
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn aggregate(case: Case, n: usize, epsilon: f64, rows: &[TrialRecord]) -> Aggregate {
    let ok: Vec<&TrialRecord> = rows.iter().filter(|r| !r.failed()).collect();
    let sorted = |f: fn(&TrialRecord) -> f64| {
        let mut v: Vec<f64> = ok.iter().map(|r| f(r)).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let gaps = sorted(|r| r.gap);
    let vals = sorted(|r| r.v_wb);
    let m = ok.len() as f64;
    Aggregate {
        case,
        n,
        epsilon,
        trials: rows.len(),
        failed: rows.len() - ok.len(),
        mean_gap: gaps.iter().sum::<f64>() / m,
        gap_q20: quantile(&gaps, 0.2),
        gap_q50: quantile(&gaps, 0.5),
        gap_q80: quantile(&gaps, 0.8),
        v_wb_q20: quantile(&vals, 0.2),
        v_wb_q50: quantile(&vals, 0.5),
        v_wb_q80: quantile(&vals, 0.8),
        mean_v_sb: ok.iter().map(|r| r.v_sb).sum::<f64>() / m,
        coverage: ok.iter().filter(|r| r.covered).count() as f64 / m,
    }
}

/// Calibrates a radius for every `N` on data from the base distribution,
/// then runs the trials with that radius. Trial failures are recorded, not
/// raised.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let prog = cfg.case.program();
    let base = cfg.case.distribution(derive_seed(cfg.seed, S_BASE, 0));
    let base_sim = match cfg.mode {
        TrialMode::Fixed => Some(simulate(&prog, &base, cfg.sim_samples, derive_seed(cfg.seed, S_SIM, 0))?),
        TrialMode::Varied => None,
    };
    let mut out = ExperimentOutput { trials: Vec::new(), aggregates: Vec::new(), curves: Vec::new() };
    for &n in &cfg.n_list {
        let n64 = n as u64;
        let cal_data = base.sample(n, derive_seed(cfg.seed, S_CAL_DATA, n64))?;
        let cal_opts = CalibrationOptions {
            splits: cfg.splits,
            train_size: cfg.train_size,
            seed: derive_seed(cfg.seed, S_CAL_SPLIT, n64),
            r: prog.r,
            bound: BoundOptions { spot_check_trials: 0, ..cfg.bound },
        };
        let cal = curve(&prog, &cal_data, &cfg.grid, &cal_opts)?;
        let epsilon = select_radius(&cal, cfg.beta).unwrap_or_else(|e| {
            let last = *cal.grid.last().expect("grid is nonempty");
            warn!("N = {n}: {e}; using the largest radius {last}");
            last
        });
        info!("{} N = {n}: calibrated radius {epsilon}", cfg.case);
        let rows: Vec<TrialRecord> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let idx = (n64 << 32) | t as u64;
                let start = Instant::now();
                let res = (|| -> Result<(f64, f64, f64, String, bool)> {
                    let (spec, sim) = match (&base_sim, cfg.mode) {
                        (Some(sim), TrialMode::Fixed) => (base.clone(), *sim),
                        _ => {
                            let spec = cfg.case.distribution(derive_seed(cfg.seed, S_TRIAL_DIST, idx));
                            let sim = simulate(&prog, &spec, cfg.sim_samples, derive_seed(cfg.seed, S_SIM, idx))?;
                            (spec, sim)
                        }
                    };
                    let data = spec.sample(n, derive_seed(cfg.seed, S_TRIAL_DATA, idx))?;
                    let b = solve_bound(&prog, &data, epsilon, prog.r, &cfg.bound)?;
                    if !b.value.is_finite() {
                        return Err(Error::NonOptimal { status: b.status });
                    }
                    let v_saa = saa_value(&prog, &data)?;
                    Ok((b.value, sim.mean, v_saa, b.status.to_string(), b.certified))
                })();
                let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
                match res {
                    Ok((v_wb, v_sb, v_saa, status, certified)) => TrialRecord {
                        case: cfg.case,
                        n,
                        trial: t,
                        epsilon,
                        v_wb,
                        v_sb,
                        v_saa,
                        gap: (v_wb - v_sb) / v_sb,
                        covered: v_wb >= v_sb,
                        runtime_ms,
                        status,
                        certified,
                        error: None,
                    },
                    Err(e) => {
                        warn!("{} N = {n} trial {t} failed: {e}", cfg.case);
                        TrialRecord {
                            case: cfg.case,
                            n,
                            trial: t,
                            epsilon,
                            v_wb: f64::NAN,
                            v_sb: f64::NAN,
                            v_saa: f64::NAN,
                            gap: f64::NAN,
                            covered: false,
                            runtime_ms,
                            status: "error".into(),
                            certified: false,
                            error: Some(e.to_string()),
                        }
                    }
                }
            })
            .collect();
        out.aggregates.push(aggregate(cfg.case, n, epsilon, &rows));
        out.trials.extend(rows);
        out.curves.push((n, cal));
    }
    Ok(out)
}

impl ExperimentOutput {
    pub fn curve_records(&self) -> Vec<CurveRecord> {
        self.curves
            .iter()
            .flat_map(|(n, c)| {
                c.grid.iter().zip(&c.confidence).zip(&c.raw).map(move |((&epsilon, &confidence), &raw_confidence)| {
                    CurveRecord { n: *n, epsilon, confidence, raw_confidence, k: c.splits, n_t: c.train_size, seed: c.seed }
                })
            })
            .collect()
    }

    /// Writes `trials.csv`, `aggregates.csv` and `curve.csv` into `dir`.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_csv(&dir.join("trials.csv"), &self.trials)?;
        write_csv(&dir.join("aggregates.csv"), &self.aggregates)?;
        write_csv(&dir.join("curve.csv"), &self.curve_records())?;
        Ok(())
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
