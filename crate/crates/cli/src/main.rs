//! Command-line front end: solve single instances, run benchmark sweeps,
//! check gradients, train the affinity metric and generate instances.
//!
//! Exit codes: 0 on success, 1 on configuration or input errors, 2 on I/O
//! errors, 3 when `gradcheck` runs but exceeds its threshold.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use dpgm::baselines::{run_baseline, BaselineConfig, BaselineMethod};
use dpgm::data::{
    gen_er_pair, gen_point_pair, random_affinity, read_dataset, read_pair, synthetic_affinity, write_dataset,
    write_pair, GraphPairJson, KeypointPairSample, PointCloudSpec, SyntheticSpec, SYNTHETIC_SCALE,
};
use dpgm::grad::{finite_diff_check, DiffMethod, GradConfig, LossSpec, UnrollConfig};
use dpgm::harness::{matching_accuracy, mean_accuracy_by_method, run_sweep, ExperimentConfig, Method};
use dpgm::learn::{evaluate, planted_metric_dataset, train, PlantedMetricSpec, TrainConfig, WeightMatrix};
use dpgm::solver::convergence_report;
use dpgm::{dpgm_solve, qap_objective, Error, PermutationMatching, SolverParams};

#[derive(Parser, Debug)]
#[command(name = "dpgm", version, about = "Proximal graph matching solver and experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Match one graph pair read from JSON.
    Solve(SolveArgs),
    /// Run a parameter sweep described by an experiment config.
    BenchSweep(SweepArgs),
    /// Compare unrolled gradients with central finite differences.
    Gradcheck(GradArgs),
    /// Learn the node-affinity metric on a labelled dataset.
    Train(TrainArgs),
    /// Write generated instances as JSON.
    Generate(GenerateArgs),
}

#[derive(clap::Args, Debug)]
struct SolveArgs {
    /// Graph-pair JSON file.
    instance: PathBuf,
    #[arg(long, default_value = "dpgm")]
    method: Method,
    /// Where to write the result JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Kernel denominator of the distance affinity.
    #[arg(long, default_value_t = SYNTHETIC_SCALE)]
    scale: f64,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Write the per-iteration trace and convergence report (dpgm only).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct SweepArgs {
    /// JSON object with the fields of the experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LossKind {
    Linear,
    CrossEntropy,
}

#[derive(clap::Args, Debug)]
struct GradArgs {
    #[arg(long, default_value = "dpgm")]
    method: DiffMethod,
    /// Size of the random instance when no `--instance` is given.
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Unrolled outer iterations.
    #[arg(long, default_value_t = 5)]
    iters: usize,
    #[arg(long, default_value_t = 30)]
    sweeps: usize,
    /// Finite-difference step; defaults to 1e-6 for rrwm and 1e-5 otherwise.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "linear")]
    loss: LossKind,
    #[arg(long, default_value_t = 1e-4)]
    threshold: f64,
}

#[derive(clap::Args, Debug)]
struct TrainArgs {
    /// JSON array of labelled graph pairs.
    #[arg(long)]
    dataset: PathBuf,
    /// Labelled pairs for held-out accuracy.
    #[arg(long)]
    heldout: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Unrolled solver depth.
    #[arg(long, default_value_t = 10)]
    iters: usize,
    /// Checkpoint of the learned weights.
    #[arg(long, default_value = "weights.json")]
    out: PathBuf,
    /// Per-epoch loss and accuracy, as JSON.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    /// Erdős–Rényi feature graphs.
    Er,
    /// Delaunay graphs on rotated point clouds.
    Pointcloud,
    /// Feature graphs related through a hidden linear map.
    Planted,
}

#[derive(clap::Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "er")]
    kind: Kind,
    #[arg(long, default_value_t = 20)]
    nin: usize,
    #[arg(long, default_value_t = 0)]
    nout: usize,
    #[arg(long, default_value_t = 0.7)]
    pedge: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Feature dimension (er and planted).
    #[arg(long, default_value_t = 20)]
    dim: usize,
    /// Rotation and jitter level of point clouds.
    #[arg(long, default_value_t = 0.5)]
    gap: f64,
    /// Number of pairs; more than one writes a JSON array.
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::BenchSweep(a) => bench_sweep(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Train(a) => train_cmd(a),
        Command::Generate(a) => generate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 2,
        Error::Json(j) if j.is_io() => 2,
        Error::Csv(c) if c.is_io_error() => 2,
        _ => 1,
    }
}

fn read_text(path: &Path) -> dpgm::Result<String> {
    Ok(fs::read_to_string(path)?)
}

fn write_or_print(path: Option<&Path>, value: &impl Serialize) -> dpgm::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn solve(a: SolveArgs) -> dpgm::Result<u8> {
    let (sample, has_truth) = read_pair(&a.instance)?.to_sample()?;
    let aff = synthetic_affinity(&sample, a.scale)?;
    let mut solver = SolverParams::default();
    if let Some(l) = a.lambda {
        solver.lambda = l;
    }
    if let Some(b) = a.beta {
        solver.beta = b;
    }
    if let Some(t) = a.max_iters {
        solver.max_iters = t;
    }
    let (matching, iterations, converged) = match a.method {
        Method::Dpgm => {
            let r = dpgm_solve(&aff, &solver)?;
            if let Some(path) = &a.trace {
                write_trace(path, &r.trace)?;
            }
            (r.matching, r.trace.iters_run, r.trace.converged)
        }
        m => {
            if a.trace.is_some() {
                return Err(Error::Config("--trace is only available for dpgm".into()));
            }
            let method: BaselineMethod = m.name().parse()?;
            let r = run_baseline(&aff, &BaselineConfig::for_method(method))?;
            (r.matching, r.iterations, r.converged)
        }
    };
    let accuracy = if has_truth { Some(matching_accuracy(&matching, &sample.truth, &sample.mask)?) } else { None };
    let out = json!({
        "method": a.method.name(),
        "matching": matching.assignment(),
        "objective": qap_objective(&aff, &matching)?,
        "accuracy": accuracy,
        "iterations": iterations,
        "converged": converged,
    });
    write_or_print(a.out.as_deref(), &out)?;
    Ok(0)
}

fn write_trace(path: &Path, trace: &dpgm::SolverTrace) -> dpgm::Result<()> {
    let report = convergence_report(trace);
    let value = json!({
        "initial_objective": trace.initial_objective,
        "objective": trace.objective,
        "delta_sq": trace.delta_sq,
        "delta_inf": trace.delta_inf,
        "iters_run": trace.iters_run,
        "converged": trace.converged,
        "report": {
            "horizons": report.horizons,
            "running_mean": report.running_mean,
            "slope": report.slope,
            "objective_gap": report.objective_gap,
            "non_increasing": report.non_increasing,
            "final_delta_sq": report.final_delta_sq,
        },
    });
    write_or_print(Some(path), &value)
}

fn bench_sweep(a: SweepArgs) -> dpgm::Result<u8> {
    let mut cfg: ExperimentConfig = serde_json::from_str(&read_text(&a.config)?)?;
    if a.out.is_some() {
        cfg.output = a.out;
    }
    let records = run_sweep(&cfg)?;
    for &value in &cfg.values {
        let at: Vec<_> = records.iter().filter(|r| r.sweep_value == value).cloned().collect();
        let summary: Vec<String> =
            mean_accuracy_by_method(&at).into_iter().map(|(m, acc)| format!("{m} {acc:.3}")).collect();
        println!("{} = {value}: {}", cfg.sweep_var.name(), summary.join(", "));
    }
    if let Some(path) = &cfg.output {
        println!("wrote {} records to {}", records.len(), path.display());
    }
    Ok(0)
}

fn gradcheck(a: GradArgs) -> dpgm::Result<u8> {
    let (aff, truth) = match &a.instance {
        Some(path) => {
            let (sample, has_truth) = read_pair(path)?.to_sample()?;
            let aff = synthetic_affinity(&sample, SYNTHETIC_SCALE)?;
            (aff, has_truth.then_some((sample.truth, sample.mask)))
        }
        None => {
            if a.n == 0 {
                return Err(Error::Config("--n must be at least 1".into()));
            }
            (random_affinity(a.n, 0.6, a.seed), None)
        }
    };
    let n = aff.n();
    let loss = match a.loss {
        LossKind::Linear => {
            let r = random_affinity(n, 1.0, a.seed.wrapping_add(1)).u().iter().map(|v| v - 0.5).collect();
            LossSpec::Linear(r)
        }
        LossKind::CrossEntropy => {
            let (truth, mask) = truth.unwrap_or_else(|| (PermutationMatching::identity(n), dpgm::NodeMask::all(n)));
            LossSpec::CrossEntropy { truth, mask }
        }
    };
    let cfg = GradConfig {
        method: a.method,
        unroll: UnrollConfig::fixed(a.iters, a.sweeps),
        samples: a.samples,
        seed: a.seed,
        ..GradConfig::default()
    };
    let report = finite_diff_check(&aff, &cfg, &loss, a.h.unwrap_or(a.method.default_step()))?;
    println!("checked {} coordinates", report.coordinates.len());
    println!("max relative error: {:.3e}", report.max_rel_error);
    let pass = report.max_rel_error <= a.threshold;
    println!("{} (threshold {:.1e})", if pass { "PASS" } else { "FAIL" }, a.threshold);
    Ok(if pass { 0 } else { 3 })
}

fn labelled(path: &Path) -> dpgm::Result<Vec<KeypointPairSample>> {
    read_dataset(path)?
        .iter()
        .enumerate()
        .map(|(k, pair)| match pair.to_sample()? {
            (s, true) => Ok(s),
            (_, false) => Err(Error::Config(format!("pair {k} of {} has no truth", path.display()))),
        })
        .collect()
}

fn train_cmd(a: TrainArgs) -> dpgm::Result<u8> {
    let data = labelled(&a.dataset)?;
    let heldout = match &a.heldout {
        Some(p) => labelled(p)?,
        None => Vec::new(),
    };
    let cfg = TrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch,
        rng_seed: a.seed,
        unroll: UnrollConfig::fixed(a.iters, 30),
        ..TrainConfig::default()
    };
    let (w, curve) = train(&data, &heldout, &cfg)?;
    fs::write(&a.out, w.to_json()? + "\n")?;
    if let Some(path) = &a.curve {
        write_or_print(Some(path), &curve)?;
    }
    if !heldout.is_empty() {
        let base = evaluate(&heldout, &WeightMatrix::identity(w.dim(), cfg.init_scale), &cfg)?;
        let learned = curve.heldout_accuracy.last().copied().unwrap_or(base);
        println!("held-out accuracy: identity {base:.3}, trained {learned:.3}");
    }
    if let Some(loss) = curve.train_loss.last() {
        println!("final training loss {loss:.4}");
    }
    println!("wrote weights to {}", a.out.display());
    Ok(0)
}

fn generate(a: GenerateArgs) -> dpgm::Result<u8> {
    if a.count == 0 {
        return Err(Error::Config("--count must be at least 1".into()));
    }
    let samples: Vec<KeypointPairSample> = match a.kind {
        Kind::Er => (0..a.count as u64)
            .map(|k| {
                gen_er_pair(&SyntheticSpec {
                    n_in: a.nin,
                    n_out: a.nout,
                    p_edge: a.pedge,
                    sigma: a.sigma,
                    dim: a.dim,
                    rng_seed: a.seed + k,
                })
            })
            .collect::<dpgm::Result<_>>()?,
        Kind::Pointcloud => (0..a.count as u64)
            .map(|k| {
                gen_point_pair(&PointCloudSpec {
                    n_points: a.nin + a.nout,
                    frame_gap: a.gap,
                    inlier_count: a.nin,
                    rng_seed: a.seed + k,
                })
            })
            .collect::<dpgm::Result<_>>()?,
        Kind::Planted => {
            let spec = PlantedMetricSpec { n_in: a.nin, dim: a.dim, sigma: a.sigma, p_edge: a.pedge, ..Default::default() };
            planted_metric_dataset(&spec, a.count, a.seed)?
        }
    };
    let pairs: Vec<GraphPairJson> = samples.iter().map(GraphPairJson::from_sample).collect();
    if pairs.len() == 1 {
        write_pair(&pairs[0], &a.out)?;
    } else {
        write_dataset(&pairs, &a.out)?;
    }
    println!("wrote {} pair(s) to {}", pairs.len(), a.out.display());
    Ok(0)
}
