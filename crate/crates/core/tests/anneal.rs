mod common;

use nalgebra::DVector;
use num_complex::Complex64;
use qjasim::anneal::{
    propagate_step, run_qa, run_qa_interpolated, run_qja, run_qja_with, uniform_initial_state, QjaOrdering, RunOptions,
    WaveVector,
};
use qjasim::model::{build_random_potential, gibbs_state, CostFunction, Schedule};
use qjasim::qmap::build_hq;

fn neighbors_of(cost: &CostFunction) -> Vec<Vec<usize>> {
    (0..cost.len()).map(|s| cost.neighbors(s).to_vec()).collect()
}

#[test]
fn qja_matches_the_explicit_operator_product() {
    for n_states in 2..=6 {
        for n_steps in 1..=8 {
            let cost = build_random_potential(n_states, 100 + n_steps as u64, 0.0, 1.0).unwrap();
            let schedule = Schedule::new(3.0, 2.0, n_steps).unwrap();
            let run = run_qja(&cost, &schedule).unwrap();
            let oracle = common::qja_product(cost.energies(), &neighbors_of(&cost), 3.0, 2.0, n_steps);
            let diff = common::max_abs_diff(run.final_state.amplitudes().as_slice(), oracle.as_slice());
            assert!(diff < 1e-10, "N={n_states}, n={n_steps}: {diff:e}");
        }
    }
}

#[test]
fn qa_matches_the_explicit_operator_product() {
    for n_states in [3, 5] {
        let cost = build_random_potential(n_states, 7, 0.0, 1.0).unwrap();
        let schedule = Schedule::new(5.0, 4.0, 6).unwrap();
        let run = run_qa(&cost, &schedule).unwrap();
        let oracle = common::qa_product(cost.energies(), &neighbors_of(&cost), 5.0, 4.0, 6);
        assert!(common::max_abs_diff(run.final_state.amplitudes().as_slice(), oracle.as_slice()) < 1e-10);
        assert!((run.final_state.norm_sq() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn single_step_matches_series_exponential() {
    let cost = build_random_potential(8, 3, 0.0, 1.0).unwrap();
    let psi = WaveVector::new(DVector::from_fn(8, |i, _| {
        Complex64::new(1.0 + i as f64, 0.5 - i as f64)
    }));
    for beta in [0.0, 2.0, 20.0] {
        let h = build_hq(&cost, beta).unwrap();
        let u = common::unitary(
            &common::mapped_hamiltonian(cost.energies(), &neighbors_of(&cost), beta),
            0.3,
        );
        let expected = u * psi.amplitudes();
        let got = propagate_step(&psi, &h, 0.3).unwrap();
        assert!(common::max_abs_diff(got.amplitudes().as_slice(), expected.as_slice()) < 1e-12);
    }
}

#[test]
fn qja_norm_is_the_partition_ratio() {
    let cost = build_random_potential(10, 11, 0.0, 1.0).unwrap();
    let schedule = Schedule::new(8.0, 1.0, 40).unwrap();
    let run = run_qja(&cost, &schedule).unwrap();
    for r in &run.records {
        let expected = common::partition_function(cost.energies(), r.beta) / 10.0;
        assert!((r.norm_sq - expected).abs() < 1e-12 * expected.max(1.0));
        assert!((r.fidelity - 1.0).abs() < 1e-10);
    }
}

#[test]
fn both_orderings_track_the_gibbs_state() {
    let cost = build_random_potential(50, 0, 0.0, 1.0).unwrap();
    let schedule = Schedule::new(100.0, 10.0, 2000).unwrap();
    for ordering in [QjaOrdering::WeightThenUnitary, QjaOrdering::UnitaryThenWeight] {
        let options = RunOptions {
            ordering,
            ..RunOptions::default()
        };
        let run = run_qja_with(&cost, &schedule, &options).unwrap();
        assert!(run.max_gibbs_deviation() < 1e-4);
        let gibbs = gibbs_state(&cost, 100.0).unwrap();
        let final_probs = run.final_state.probabilities().unwrap();
        let worst = final_probs
            .iter()
            .zip(&gibbs.probabilities)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-9);
    }
}

#[test]
fn qa_stays_normalized_and_lags_behind_gibbs() {
    let cost = build_random_potential(50, 0, 0.0, 1.0).unwrap();
    let schedule = Schedule::new(100.0, 1.0, 1000).unwrap();
    let run = run_qa(&cost, &schedule).unwrap();
    assert!(run.records.iter().all(|r| (r.norm_sq - 1.0).abs() < 1e-10));
    let last = run.final_record();
    assert!(last.p_ground < last.p_ground_gibbs);
}

#[test]
fn slow_qa_on_a_small_instance_follows_the_ground_state() {
    let cost = build_random_potential(4, 2, 0.0, 1.0).unwrap();
    let fast = run_qa(&cost, &Schedule::new(2.0, 0.1, 200).unwrap()).unwrap();
    let slow = run_qa(&cost, &Schedule::new(2.0, 2000.0, 20_000).unwrap()).unwrap();
    let gibbs = slow.final_record().p_ground_gibbs;
    assert!((slow.final_record().p_ground - gibbs).abs() < 1e-2);
    assert!((fast.final_record().p_ground - gibbs).abs() > (slow.final_record().p_ground - gibbs).abs());
}

#[test]
fn transverse_field_baseline_starts_uniform_and_stays_normalized() {
    let cost = build_random_potential(12, 4, 0.0, 1.0).unwrap();
    let run = run_qa_interpolated(&cost, &Schedule::new(10.0, 5.0, 200).unwrap(), 1.0).unwrap();
    assert!((run.records[0].p_ground - 1.0 / 12.0).abs() < 1e-14);
    assert!(run.records.iter().all(|r| (r.norm_sq - 1.0).abs() < 1e-10));
}

#[test]
fn uniform_state_is_normalized() {
    let psi = uniform_initial_state(37).unwrap();
    assert!((psi.norm_sq() - 1.0).abs() < 1e-15);
    assert!(uniform_initial_state(0).is_err());
}
