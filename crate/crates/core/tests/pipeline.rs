use dpgm::data::{gen_er_pair, read_pair, synthetic_affinity, write_pair, GraphPairJson, SyntheticSpec, SYNTHETIC_SCALE};
use dpgm::harness::{matching_accuracy, solve_with, Method};
use dpgm::{dpgm_solve, SolverParams};

fn sample(seed: u64, sigma: f64) -> dpgm::data::KeypointPairSample {
    gen_er_pair(&SyntheticSpec { n_in: 12, n_out: 2, sigma, rng_seed: seed, ..Default::default() }).unwrap()
}

#[test]
fn json_round_trip_solves_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pair.json");
    let s = sample(3, 0.2);
    write_pair(&GraphPairJson::from_sample(&s), &path).unwrap();
    let (back, has_truth) = read_pair(&path).unwrap().to_sample().unwrap();
    assert!(has_truth);
    assert_eq!(back.truth, s.truth);

    let params = SolverParams::default();
    let a = dpgm_solve(&synthetic_affinity(&s, SYNTHETIC_SCALE).unwrap(), &params).unwrap();
    let b = dpgm_solve(&synthetic_affinity(&back, SYNTHETIC_SCALE).unwrap(), &params).unwrap();
    assert_eq!(a.matching, b.matching);
    assert_eq!(a.trace.objective, b.trace.objective);
}

#[test]
fn noiseless_inliers_are_recovered() {
    for seed in 0..3 {
        let s = sample(seed, 0.0);
        let aff = synthetic_affinity(&s, SYNTHETIC_SCALE).unwrap();
        for method in [Method::Dpgm, Method::Rrwm] {
            let solved = solve_with(method, &aff, &SolverParams::default(), &Default::default()).unwrap();
            let acc = matching_accuracy(&solved.matching, &s.truth, &s.mask).unwrap();
            assert!(acc >= 0.9, "{method:?} seed {seed}: accuracy {acc}");
        }
    }
}
