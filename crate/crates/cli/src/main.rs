//! `wasscopos`: distributionally robust bounds, radius calibration and the
//! case-study experiments from the command line.
//!
//! Results go to stdout as JSON, tables go to CSV files under `--out`, and
//! every run that has an output directory leaves a `manifest.json` that
//! `wasscopos rerun` replays.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::json;
use wasscopos_core::bound::{build, solve_bound, BoundOptions};
use wasscopos_core::calibrate::{curve, select_radius, CalibrationOptions, DEFAULT_GRID, DEFAULT_SPLITS};
use wasscopos_core::experiments::{build_case, run_trials, simulate, Case, DistributionSpec, ExperimentConfig};
use wasscopos_core::model::{Dataset, MixedBinaryProgram};
use wasscopos_core::{Error, SolverOptions, Status};

#[derive(Parser, Debug)]
#[command(name = "wasscopos", version, about = "Wasserstein distributionally robust bounds for mixed 0-1 LPs")]
struct Cli {
    /// Worker threads (default: logical cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Directory for CSV output and the run manifest
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
enum Command {
    /// Upper bound over a Wasserstein ball around a dataset
    Bound(BoundArgs),
    /// Empirical confidence curve and radius selection
    Calibrate(CalibrateArgs),
    /// Calibrated Monte Carlo trials for a case study
    Experiment(ExperimentArgs),
    /// Monte Carlo estimate of the expected optimal value
    Simulate(SimulateArgs),
    /// Write a case instance, a random distribution and optionally a dataset
    Generate(GenerateArgs),
    /// Replay a run from its manifest
    Rerun(RerunArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-7)]
    feas_tol: f64,
    #[arg(long, default_value_t = 1e-7)]
    gap_tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Samples per constraint matrix in the copositivity check (0 disables)
    #[arg(long, default_value_t = 10_000)]
    spot_checks: usize,
}

impl SolverArgs {
    fn options(&self) -> BoundOptions {
        let solver = SolverOptions { feas_tol: self.feas_tol, gap_tol: self.gap_tol, max_iter: self.max_iter, ..Default::default() };
        BoundOptions { solver, spot_check_trials: self.spot_checks, ..Default::default() }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct BoundArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    epsilon: f64,
    /// Trace bound; overrides the instance's
    #[arg(long, allow_negative_numbers = true)]
    r: Option<f64>,
    /// Write the standard-form cone program as JSON
    #[arg(long)]
    dump_problem: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct CalibrateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    beta: f64,
    /// Comma-separated candidate radii
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_GRID.to_vec())]
    grid: Vec<f64>,
    #[arg(long = "K", default_value_t = DEFAULT_SPLITS)]
    splits: usize,
    /// Training size (default: half the data, rounded up)
    #[arg(long = "NT")]
    train_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    r: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct ExperimentArgs {
    /// ssa, project or knapsack
    #[arg(long)]
    case: String,
    #[arg(long = "N-list", value_delimiter = ',', default_values_t = vec![10, 20, 40, 80, 160, 320, 640, 1280])]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// fixed: one distribution for all trials; varied: one per trial
    #[arg(long, default_value = "fixed")]
    mode: String,
    #[arg(long = "K", default_value_t = DEFAULT_SPLITS)]
    splits: usize,
    #[arg(long = "NT")]
    train_size: Option<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_GRID.to_vec())]
    grid: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    sim_samples: usize,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Distribution JSON as written by `generate`
    #[arg(long)]
    dist: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct GenerateArgs {
    #[arg(long)]
    case: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also draw a dataset of this size
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct RerunArgs {
    manifest: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    jobs: Option<usize>,
    out: Option<PathBuf>,
    #[serde(flatten)]
    command: Command,
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Io(_) => (2, "io"),
            Error::Csv(c) if c.is_io_error() => (2, "io"),
            Error::NonOptimal { .. } => (4, "nonoptimal"),
            Error::Solver(_) => (4, "solver"),
            Error::Infeasible(_) => (3, "infeasible"),
            Error::Unbounded(_) => (3, "unbounded"),
            Error::Dimension { .. } => (3, "dimension"),
            _ => (3, "config"),
        };
        Failure { code, kind, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e).into()
    }
}

type Outcome = Result<ExitCode, Failure>;

fn config(msg: impl Into<String>) -> Failure {
    Failure { code: 3, kind: "config", message: msg.into() }
}

fn read_instance(path: &Path) -> Result<MixedBinaryProgram, Failure> {
    Ok(MixedBinaryProgram::load(path)?)
}

fn print(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("JSON values serialize"));
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn cmd_bound(args: &BoundArgs, out: Option<&Path>) -> Outcome {
    let prog = read_instance(&args.instance)?;
    let data = Dataset::load(&args.dataset)?;
    let r = args.r.or(prog.r);
    if let Some(path) = &args.dump_problem {
        let model = build(&prog, &data, args.epsilon, r)?;
        write_json(path, &model.problem())?;
    }
    let res = solve_bound(&prog, &data, args.epsilon, r, &args.solver.options())?;
    let mut summary = res.summary();
    summary["certified"] = json!(res.certified);
    if let Some(dir) = out {
        write_json(&dir.join("result.json"), &res)?;
    }
    print(&summary);
    Ok(if res.status == Status::Optimal { ExitCode::SUCCESS } else { ExitCode::from(4) })
}

fn cmd_calibrate(args: &CalibrateArgs, out: &Path) -> Outcome {
    let prog = read_instance(&args.instance)?;
    let data = Dataset::load(&args.dataset)?;
    let opts = CalibrationOptions {
        splits: args.splits,
        train_size: args.train_size,
        seed: args.seed,
        r: args.r.or(prog.r),
        bound: BoundOptions { spot_check_trials: 0, ..args.solver.options() },
    };
    let c = curve(&prog, &data, &args.grid, &opts)?;
    c.save_csv(&out.join("curve.csv"))?;
    let epsilon = select_radius(&c, args.beta)?;
    let conf = c.grid.iter().zip(&c.confidence).find(|(e, _)| **e == epsilon).map(|(_, c)| *c);
    print(&json!({
        "epsilon": epsilon,
        "beta": args.beta,
        "confidence": conf,
        "K": c.splits,
        "N_T": c.train_size,
        "failures": c.failures,
    }));
    Ok(ExitCode::SUCCESS)
}

fn cmd_experiment(args: &ExperimentArgs, out: &Path) -> Outcome {
    let case: Case = args.case.parse()?;
    let mut cfg = ExperimentConfig::new(case);
    cfg.n_list = args.n_list.clone();
    cfg.trials = args.trials;
    cfg.beta = args.beta;
    cfg.seed = args.seed;
    cfg.mode = args.mode.parse()?;
    cfg.splits = args.splits;
    cfg.train_size = args.train_size;
    cfg.grid = args.grid.clone();
    cfg.sim_samples = args.sim_samples;
    cfg.bound = args.solver.options();
    let res = run_trials(&cfg)?;
    res.write_csvs(out)?;
    print(&serde_json::to_value(&res.aggregates)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: &SimulateArgs) -> Outcome {
    let prog = read_instance(&args.instance)?;
    let spec: DistributionSpec = serde_json::from_str(&fs::read_to_string(&args.dist)?)?;
    spec.validate()?;
    if spec.dim() + 1 != prog.k() {
        return Err(config(format!("distribution has dimension {}, instance expects {}", spec.dim(), prog.k() - 1)));
    }
    let sim = simulate(&prog, &spec, args.samples, args.seed)?;
    print(&serde_json::to_value(sim)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_generate(args: &GenerateArgs, out: &Path) -> Outcome {
    let (prog, spec) = build_case(&args.case, args.seed)?;
    write_json(&out.join("instance.json"), &prog.to_json())?;
    write_json(&out.join("distribution.json"), &spec)?;
    let mut written = vec!["instance.json", "distribution.json"];
    if let Some(n) = args.samples {
        let data = spec.sample(n, args.seed)?;
        write_json(&out.join("dataset.json"), &data.to_json())?;
        written.push("dataset.json");
    }
    print(&json!({ "case": args.case, "seed": args.seed, "written": written }));
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Outcome {
    let (command, jobs, out) = match cli.command {
        Command::Rerun(r) => {
            let text = fs::read_to_string(&r.manifest)?;
            let m: Manifest = serde_json::from_str(&text)?;
            if matches!(m.command, Command::Rerun(_)) {
                return Err(config("a manifest cannot describe a rerun"));
            }
            (m.command, cli.jobs.or(m.jobs), cli.out.or(m.out))
        }
        c => (c, cli.jobs, cli.out),
    };
    if let Some(j) = jobs {
        if j == 0 {
            return Err(config("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().map_err(|e| config(e.to_string()))?;
    }
    // table-producing commands always need a directory
    let dir = match (&command, &out) {
        (_, Some(d)) => Some(d.clone()),
        (Command::Calibrate(_) | Command::Experiment(_) | Command::Generate(_), None) => Some(PathBuf::from(".")),
        _ => None,
    };
    if let Some(d) = &dir {
        fs::create_dir_all(d)?;
        let manifest = Manifest {
            tool: "wasscopos".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            jobs,
            out: out.clone(),
            command: command.clone(),
        };
        write_json(&d.join("manifest.json"), &manifest)?;
        info!("manifest written to {}", d.join("manifest.json").display());
    }
    let here = PathBuf::from(".");
    let dir_ref = dir.as_deref().unwrap_or(&here);
    match &command {
        Command::Bound(a) => cmd_bound(a, dir.as_deref()),
        Command::Calibrate(a) => cmd_calibrate(a, dir_ref),
        Command::Experiment(a) => cmd_experiment(a, dir_ref),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Generate(a) => cmd_generate(a, dir_ref),
        Command::Rerun(_) => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WASSCOPOS_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            print(&json!({ "error": "config", "message": e.kind().to_string() }));
            return ExitCode::from(3);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(f) => {
            print(&json!({ "error": f.kind, "message": f.message }));
            ExitCode::from(f.code)
        }
    }
}
