//! Benchmark sweeps over generated instances.
//!
//! A sweep varies one generator parameter, solves every instance with each
//! requested method and records accuracy, objective, oracle ratio, time and
//! iteration count per run. Records are deterministic given the config,
//! apart from wall time, which can be disabled.

mod output;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use output::{emit_results, read_csv, read_json, OutputFormat, ResultRecord, CSV_HEADER};

use crate::baselines::{run_baseline, BaselineConfig, BaselineMethod};
use crate::data::{
    gen_er_pair, gen_point_pair, house_affinity, synthetic_affinity, KeypointPairSample, PointCloudSpec,
    SyntheticSpec, HOUSE_SCALE, SYNTHETIC_SCALE,
};
use crate::error::{Error, Result};
use crate::problem::{
    brute_force_qap, qap_objective, AffinityDecomposition, NodeMask, PermutationMatching, SolverParams,
    BRUTE_FORCE_LIMIT,
};
use crate::solver::dpgm_solve;
use output::RecordSink;

/// Fraction of genuine rows whose predicted target equals the truth.
/// Vacuously 1 when every row is masked.
pub fn matching_accuracy(pred: &PermutationMatching, truth: &PermutationMatching, mask: &NodeMask) -> Result<f64> {
    let n = truth.len();
    if pred.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: pred.len() });
    }
    if mask.rows.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: mask.rows.len() });
    }
    let genuine = mask.rows.iter().filter(|&&g| g).count();
    if genuine == 0 {
        return Ok(1.0);
    }
    let correct = (0..n).filter(|&i| mask.rows[i] && pred.target(i) == truth.target(i)).count();
    Ok(correct as f64 / genuine as f64)
}

/// Any solver the harness can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dpgm,
    Sm,
    Rrwm,
    Gagm,
    Ipfp,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Dpgm, Method::Sm, Method::Rrwm, Method::Gagm, Method::Ipfp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dpgm => "dpgm",
            Self::Sm => "sm",
            Self::Rrwm => "rrwm",
            Self::Gagm => "gagm",
            Self::Ipfp => "ipfp",
        }
    }

    fn baseline(self) -> Option<BaselineMethod> {
        match self {
            Self::Dpgm => None,
            Self::Sm => Some(BaselineMethod::Sm),
            Self::Rrwm => Some(BaselineMethod::Rrwm),
            Self::Gagm => Some(BaselineMethod::Gagm),
            Self::Ipfp => Some(BaselineMethod::Ipfp),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// Rounded matching plus diagnostics of one solve.
#[derive(Clone, Debug)]
pub struct Solved {
    pub matching: PermutationMatching,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs one method on an affinity.
pub fn solve_with(
    method: Method,
    aff: &AffinityDecomposition,
    solver: &SolverParams,
    baseline: &BaselineConfig,
) -> Result<Solved> {
    match method.baseline() {
        None => {
            let r = dpgm_solve(aff, solver)?;
            Ok(Solved { matching: r.matching, iterations: r.trace.iters_run, converged: r.trace.converged })
        }
        Some(b) => {
            let cfg = BaselineConfig { method: b, ..baseline.clone() };
            let r = run_baseline(aff, &cfg)?;
            Ok(Solved { matching: r.matching, iterations: r.iterations, converged: r.converged })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    /// Feature noise of Erdős–Rényi pairs.
    Sigma,
    /// Outlier count of Erdős–Rényi pairs.
    NOut,
    /// Fraction of corresponding points in point-cloud pairs.
    InlierRatio,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sigma => "sigma",
            Self::NOut => "n_out",
            Self::InlierRatio => "inlier_ratio",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub sweep_var: SweepVar,
    pub values: Vec<f64>,
    pub methods: Vec<Method>,
    pub trials: usize,
    /// Base seed; trial `t` at sweep index `k` uses `seed + 1000 k + t`.
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    /// Fixed fields of Erdős–Rényi instances (`sigma`/`n_out` sweeps).
    pub synthetic: SyntheticSpec,
    /// Fixed fields of point-cloud instances (`inlier_ratio` sweep).
    pub pointcloud: PointCloudSpec,
    /// Kernel denominator; defaults to 2900 for feature graphs and 2500 for
    /// point clouds.
    pub scale: Option<f64>,
    pub solver: SolverParams,
    pub baseline: BaselineConfig,
    /// Write measured solver time; zero otherwise, which makes outputs
    /// byte-identical across runs.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sweep_var: SweepVar::Sigma,
            values: vec![0.0, 0.5, 1.0],
            methods: Method::ALL.to_vec(),
            trials: 20,
            seed: 0,
            output: None,
            format: OutputFormat::Csv,
            synthetic: SyntheticSpec::default(),
            pointcloud: PointCloudSpec::default(),
            scale: None,
            solver: SolverParams::default(),
            baseline: BaselineConfig::default(),
            record_timing: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep value list is empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("method list is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let Some(s) = self.scale {
            if !(s > 0.0) {
                return Err(Error::Config(format!("kernel scale must be positive, got {s}")));
            }
        }
        for &v in &self.values {
            self.instance_spec(v, 0)?;
        }
        self.solver.validate()?;
        self.baseline.validate()
    }

    fn instance_spec(&self, value: f64, seed: u64) -> Result<InstanceSpec> {
        match self.sweep_var {
            SweepVar::Sigma => {
                let spec = SyntheticSpec { sigma: value, rng_seed: seed, ..self.synthetic.clone() };
                spec.validate()?;
                Ok(InstanceSpec::Synthetic(spec))
            }
            SweepVar::NOut => {
                if !(value >= 0.0) || value.fract() != 0.0 {
                    return Err(Error::Config(format!("n_out sweep values must be whole numbers, got {value}")));
                }
                let spec = SyntheticSpec { n_out: value as usize, rng_seed: seed, ..self.synthetic.clone() };
                spec.validate()?;
                Ok(InstanceSpec::Synthetic(spec))
            }
            SweepVar::InlierRatio => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::Config(format!("inlier ratio must lie in [0, 1], got {value}")));
                }
                let n = self.pointcloud.n_points;
                let spec = PointCloudSpec {
                    inlier_count: (value * n as f64).round() as usize,
                    rng_seed: seed,
                    ..self.pointcloud.clone()
                };
                spec.validate()?;
                Ok(InstanceSpec::PointCloud(spec))
            }
        }
    }
}

enum InstanceSpec {
    Synthetic(SyntheticSpec),
    PointCloud(PointCloudSpec),
}

impl InstanceSpec {
    fn build(&self, scale: Option<f64>) -> Result<(KeypointPairSample, AffinityDecomposition)> {
        match self {
            Self::Synthetic(spec) => {
                let s = gen_er_pair(spec)?;
                let aff = synthetic_affinity(&s, scale.unwrap_or(SYNTHETIC_SCALE))?;
                Ok((s, aff))
            }
            Self::PointCloud(spec) => {
                let s = gen_point_pair(spec)?;
                let aff = house_affinity(&s, scale.unwrap_or(HOUSE_SCALE))?;
                Ok((s, aff))
            }
        }
    }
}

fn run_instance(cfg: &ExperimentConfig, value: f64, seed: u64) -> Result<Vec<ResultRecord>> {
    let (sample, aff) = cfg.instance_spec(value, seed)?.build(cfg.scale)?;
    let oracle = if aff.n() <= BRUTE_FORCE_LIMIT { Some(brute_force_qap(&aff)?.1) } else { None };
    let mut records = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let start = Instant::now();
        let solved = solve_with(method, &aff, &cfg.solver, &cfg.baseline);
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        let mut record = ResultRecord {
            method: method.name().into(),
            sweep_var: cfg.sweep_var.name().into(),
            sweep_value: value,
            seed,
            accuracy: None,
            objective: None,
            oracle_ratio: None,
            wall_ms: if cfg.record_timing { elapsed } else { 0.0 },
            iters: 0,
        };
        match solved {
            Ok(s) => {
                let objective = qap_objective(&aff, &s.matching)?;
                record.accuracy = Some(matching_accuracy(&s.matching, &sample.truth, &sample.mask)?);
                record.objective = Some(objective);
                record.oracle_ratio = oracle.filter(|&b| b > 0.0).map(|b| objective / b);
                record.iters = s.iterations;
            }
            Err(e) => log::warn!("{} failed on seed {seed}: {e}", method.name()),
        }
        records.push(record);
    }
    Ok(records)
}

/// Runs the sweep. Instances of one sweep value are solved in parallel;
/// their records are appended to `cfg.output` (if set) in
/// `(sweep value, method, seed)` order before the next value starts.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let mut sink = match &cfg.output {
        Some(path) => Some(RecordSink::create(path, cfg.format)?),
        None => None,
    };
    let mut all = Vec::new();
    for (k, &value) in cfg.values.iter().enumerate() {
        let seeds: Vec<u64> = (0..cfg.trials as u64).map(|t| cfg.seed + 1000 * k as u64 + t).collect();
        let per_instance: Vec<Vec<ResultRecord>> =
            seeds.par_iter().map(|&seed| run_instance(cfg, value, seed)).collect::<Result<_>>()?;
        let mut batch = Vec::with_capacity(cfg.methods.len() * seeds.len());
        for m in 0..cfg.methods.len() {
            batch.extend(per_instance.iter().map(|records| records[m].clone()));
        }
        if let Some(sink) = sink.as_mut() {
            sink.append(&batch)?;
        }
        all.extend(batch);
    }
    if let Some(sink) = sink {
        sink.finish()?;
    }
    Ok(all)
}

/// Mean accuracy per method over successful records.
pub fn mean_accuracy_by_method(records: &[ResultRecord]) -> Vec<(String, f64)> {
    let mut names: Vec<String> = Vec::new();
    for r in records {
        if !names.contains(&r.method) {
            names.push(r.method.clone());
        }
    }
    names
        .into_iter()
        .map(|name| {
            let acc: Vec<f64> = records.iter().filter(|r| r.method == name).filter_map(|r| r.accuracy).collect();
            let mean = if acc.is_empty() { 0.0 } else { acc.iter().sum::<f64>() / acc.len() as f64 };
            (name, mean)
        })
        .collect()
}
