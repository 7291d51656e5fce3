//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dpgm::baselines::{ipfp, BaselineConfig, BaselineMethod};
use dpgm::data::{gen_er_pair, random_affinity, synthetic_affinity, SyntheticSpec, SYNTHETIC_SCALE};
use dpgm::grad::{finite_diff_check, DiffMethod, GradConfig, LossSpec, UnrollConfig};
use dpgm::harness::{mean_accuracy_by_method, run_sweep, ExperimentConfig, Method, SweepVar};
use dpgm::learn::{evaluate, planted_metric_dataset, train, PlantedMetricSpec, TrainConfig, WeightMatrix};
use dpgm::solver::{convergence_report, init_state, message_passing_step, proximal_step};
use dpgm::{
    brute_force_qap, dpgm_solve, qap_objective, sinkhorn_normalize, MatchingState, SinkhornConfig, SolverParams,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ac1_sinkhorn() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = SinkhornConfig::default();
    let start = Instant::now();
    let mut worst_dev = 0.0f64;
    let mut worst_iters = 0;
    let mut all_converged = true;
    for k in 0..100 {
        let n = [5, 20, 50][k % 3];
        // Entries in (0, 1].
        let m = Array2::from_shape_fn((n, n), |_| 1.0 - rng.random::<f64>());
        let out = sinkhorn_normalize(&m, &cfg).expect("positive input");
        worst_dev = worst_dev.max(out.max_deviation());
        worst_iters = worst_iters.max(out.iterations);
        all_converged &= out.converged;
    }
    let elapsed = start.elapsed();
    let pass = all_converged && worst_dev <= 1e-9 && worst_iters <= 1000 && elapsed < Duration::from_secs(1);
    outcome(pass, format!("max deviation {worst_dev:.2e}, max sweeps {worst_iters}, {:.3} s", elapsed.as_secs_f64()))
}

fn ac2_exact_recovery() -> Outcome {
    let start = Instant::now();
    let solver = SolverParams::default();
    let mut recovered = 0;
    for seed in 0..20 {
        let s = gen_er_pair(&SyntheticSpec { n_in: 20, n_out: 0, p_edge: 0.7, sigma: 0.0, rng_seed: seed, ..Default::default() })
            .unwrap();
        let aff = synthetic_affinity(&s, SYNTHETIC_SCALE).unwrap();
        if dpgm_solve(&aff, &solver).unwrap().matching == s.truth {
            recovered += 1;
        }
    }
    let elapsed = start.elapsed();
    // The planted permutation is a global optimum, checked exhaustively at n=6.
    let mut planted_optimal = 0;
    for seed in 0..5 {
        let s = gen_er_pair(&SyntheticSpec { n_in: 6, p_edge: 0.7, sigma: 0.0, rng_seed: seed, ..Default::default() }).unwrap();
        let aff = synthetic_affinity(&s, SYNTHETIC_SCALE).unwrap();
        let (_, best) = brute_force_qap(&aff).unwrap();
        if (qap_objective(&aff, &s.truth).unwrap() - best).abs() <= 1e-12 * best.abs().max(1.0) {
            planted_optimal += 1;
        }
    }
    let pass = recovered >= 19 && elapsed < Duration::from_secs(5) && planted_optimal == 5;
    outcome(
        pass,
        format!(
            "{recovered}/20 recovered in {:.2} s; planted optimum matches brute force on {planted_optimal}/5 n=6 instances",
            elapsed.as_secs_f64()
        ),
    )
}

fn ac3_oracle_ratio() -> Outcome {
    let solver = SolverParams::default();
    let mut ratios = Vec::new();
    for seed in 0..50 {
        let s = gen_er_pair(&SyntheticSpec { n_in: 5, n_out: 1, p_edge: 0.7, sigma: 0.5, rng_seed: seed, ..Default::default() })
            .unwrap();
        let aff = synthetic_affinity(&s, SYNTHETIC_SCALE).unwrap();
        let (_, best) = brute_force_qap(&aff).unwrap();
        let got = qap_objective(&aff, &dpgm_solve(&aff, &solver).unwrap().matching).unwrap();
        ratios.push(got / best);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(mean >= 0.90 && max <= 1.0, format!("mean ratio {mean:.4}, min {min:.4}, max 1{:+.1e} over 50 n=6 instances", max - 1.0))
}

fn ac4_ordering() -> Outcome {
    let cfg = ExperimentConfig {
        sweep_var: SweepVar::Sigma,
        values: vec![0.5, 1.0],
        methods: vec![Method::Dpgm, Method::Sm, Method::Gagm],
        trials: 20,
        synthetic: SyntheticSpec { n_in: 30, n_out: 0, p_edge: 0.7, ..SyntheticSpec::default() },
        record_timing: false,
        ..ExperimentConfig::default()
    };
    let records = run_sweep(&cfg).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for &sigma in &cfg.values {
        let at: Vec<_> = records.iter().filter(|r| r.sweep_value == sigma).cloned().collect();
        let means = mean_accuracy_by_method(&at);
        let get = |m: &str| means.iter().find(|(name, _)| name == m).map(|p| p.1).unwrap();
        let (d, sm, ga) = (get("dpgm"), get("sm"), get("gagm"));
        pass &= d >= sm && d >= ga;
        parts.push(format!("σ={sigma}: dpgm {d:.3}, sm {sm:.3}, gagm {ga:.3}"));
    }
    outcome(pass, parts.join("; "))
}

fn ac5_gradients() -> Outcome {
    let aff = random_affinity(4, 0.6, 0);
    let r: Vec<f64> = {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        (0..16).map(|_| rng.random::<f64>() - 0.5).collect()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for method in [DiffMethod::Dpgm, DiffMethod::Sm, DiffMethod::Rrwm, DiffMethod::Gagm] {
        let cfg = GradConfig {
            method,
            solver: SolverParams { lambda: 1.0, beta: 1.0, ..SolverParams::default() },
            unroll: UnrollConfig::fixed(5, 30),
            samples: 20,
            ..GradConfig::default()
        };
        let report = finite_diff_check(&aff, &cfg, &LossSpec::Linear(r.clone()), method.default_step()).unwrap();
        pass &= report.coordinates.len() >= 20 && report.max_rel_error <= 1e-4;
        parts.push(format!("{method:?} {:.2e} ({} coords)", report.max_rel_error, report.coordinates.len()));
    }
    outcome(pass, parts.join(", "))
}

fn ac6_convergence() -> Outcome {
    let solver = SolverParams { max_iters: 200, tol: 1e-8, ..SolverParams::default() };
    let mut ok = 0;
    let mut worst_slope = f64::NEG_INFINITY;
    let mut max_iters = 0;
    for seed in 0..10 {
        let s = gen_er_pair(&SyntheticSpec { n_in: 20, p_edge: 0.7, sigma: 0.0, rng_seed: seed, ..Default::default() }).unwrap();
        let aff = synthetic_affinity(&s, SYNTHETIC_SCALE).unwrap();
        let r = dpgm_solve(&aff, &solver).unwrap();
        let report = convergence_report(&r.trace);
        let final_inf = r.trace.delta_inf.last().copied().unwrap_or(0.0);
        worst_slope = worst_slope.max(report.slope);
        max_iters = max_iters.max(r.trace.iters_run);
        if report.non_increasing && final_inf < 1e-8 && r.trace.iters_run <= 200 && report.slope <= -0.5 {
            ok += 1;
        }
    }
    outcome(
        ok == 10,
        format!("{ok}/10 instances converge monotonically; max iterations {max_iters}, worst log-log slope {worst_slope:.3}"),
    )
}

fn ac7_learning() -> Outcome {
    let start = Instant::now();
    let spec = PlantedMetricSpec { n_in: 15, dim: 20, sigma: 0.5, ..PlantedMetricSpec::default() };
    let mut gains = Vec::new();
    for seed in 0..3u64 {
        let all = planted_metric_dataset(&spec, 250, seed).unwrap();
        let (train_set, test_set) = all.split_at(200);
        let cfg = TrainConfig { epochs: 10, rng_seed: seed, ..TrainConfig::default() };
        let identity = evaluate(test_set, &WeightMatrix::identity(spec.dim, cfg.init_scale), &cfg).unwrap();
        let (w, _) = train(train_set, &[], &cfg).unwrap();
        let trained = evaluate(test_set, &w, &cfg).unwrap();
        gains.push((identity, trained));
    }
    let elapsed = start.elapsed();
    let mean_gain = gains.iter().map(|(a, b)| b - a).sum::<f64>() / gains.len() as f64;
    let per_seed: Vec<String> = gains.iter().map(|(a, b)| format!("{a:.3}→{b:.3}")).collect();
    outcome(
        mean_gain >= 0.05 && elapsed < Duration::from_secs(600),
        format!("mean gain {:.1} points ({}), {:.1} s", 100.0 * mean_gain, per_seed.join(", "), elapsed.as_secs_f64()),
    )
}

fn ac8_equivalence() -> Outcome {
    let solver = SolverParams { lambda: 1.0, ..SolverParams::default() };
    let mut identical = 0;
    for seed in 0..20 {
        let n = 3 + (seed as usize % 6);
        let aff = random_affinity(n, 0.6, 100 + seed);
        let beta = 0.5 + 0.25 * (seed % 5) as f64;
        let cfg = SolverParams { beta, ..solver.clone() };
        let mut a = init_state(&aff, &cfg).unwrap();
        let mut b = a.clone();
        let mut same = true;
        for _ in 0..10 {
            a = proximal_step(&a, &aff, &cfg).unwrap();
            b = message_passing_step(&b, &aff, beta, &cfg).unwrap();
            same &= a.as_slice() == b.as_slice();
        }
        if same {
            identical += 1;
        }
    }
    outcome(identical == 20, format!("{identical}/20 instances bit-identical over 10 steps"))
}

fn ac9_ipfp() -> Outcome {
    let cfg = BaselineConfig::for_method(BaselineMethod::Ipfp);
    let mut violations = 0;
    let mut steps = 0;
    for seed in 0..50 {
        let aff = random_affinity(8, 0.5, 200 + seed);
        let (_, trace) = ipfp(&aff, &cfg, &MatchingState::uniform(8)).unwrap();
        steps += trace.best_discrete.len().saturating_sub(1);
        violations += trace.best_discrete.windows(2).filter(|w| w[1] < w[0]).count();
    }
    outcome(violations == 0, format!("{violations} decreases over {steps} outer iterations on 50 n=8 instances"))
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, fn() -> Outcome); 9] = [
        ("AC1", "doubly stochastic projection", ac1_sinkhorn),
        ("AC2", "exact recovery at zero noise", ac2_exact_recovery),
        ("AC3", "near-optimality against brute force", ac3_oracle_ratio),
        ("AC4", "accuracy ordering against SM and GAGM", ac4_ordering),
        ("AC5", "unrolled gradients match finite differences", ac5_gradients),
        ("AC6", "convergence trend of the proximal iteration", ac6_convergence),
        ("AC7", "learned metric improves matching", ac7_learning),
        ("AC8", "update forms agree bit for bit", ac8_equivalence),
        ("AC9", "IPFP objective never decreases", ac9_ipfp),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{id} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
