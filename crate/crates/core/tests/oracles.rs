use std::time::Instant;

use anneal_core::copositive::{is_copositive, CopositivityTester};
use anneal_core::hit_and_run::{
    parallel_walks, stream_rng, BoltzmannParam, DirectionSource, DEFAULT_CHORD_REL_TOL,
};
use anneal_core::linalg::{svec, SymMatrix, Vector};
use anneal_core::oracle::{
    ball_oracle, copositive_cap_oracle, cube_oracle, dnn_oracle, MembershipOracle, COPOSITIVE_TOL,
};
use rand::Rng;

mod common;
use common::simplex_grid_min;

fn random_sym(m: usize, seed: u64) -> SymMatrix {
    let mut rng = stream_rng(seed, m as u64);
    SymMatrix::from_fn(m, |_, _| rng.random_range(-1.0..1.0))
}

#[test]
fn enumeration_matches_simplex_grid() {
    for (m, steps, count) in [(2, 2000, 30), (3, 600, 20), (4, 300, 8)] {
        for k in 0..count {
            let a = random_sym(m, 100 + k);
            let exact = is_copositive(&a, 0.0).unwrap().min_value;
            let grid = simplex_grid_min(&a, steps);
            assert!(
                grid >= exact - 1e-12,
                "m = {m}, k = {k}: grid {grid} below {exact}"
            );
            assert!(
                grid - exact <= 1e-4,
                "m = {m}, k = {k}: grid {grid}, enumeration {exact}"
            );
        }
    }
}

#[test]
fn textbook_copositivity_cases() {
    let a = SymMatrix::from_rows(&[vec![1.0, -2.0], vec![-2.0, 1.0]]).unwrap();
    let cert = is_copositive(&a, 1e-12).unwrap();
    assert!((cert.min_value + 0.5).abs() < 1e-12);
    assert!(!cert.is_copositive);
    assert!((simplex_grid_min(&a, 1000) + 0.5).abs() < 1e-9);

    let horn = SymMatrix::from_rows(&[
        vec![1.0, -1.0, 1.0, 1.0, -1.0],
        vec![-1.0, 1.0, -1.0, 1.0, 1.0],
        vec![1.0, -1.0, 1.0, -1.0, 1.0],
        vec![1.0, 1.0, -1.0, 1.0, -1.0],
        vec![-1.0, 1.0, 1.0, -1.0, 1.0],
    ])
    .unwrap();
    let cert = is_copositive(&horn, 1e-10).unwrap();
    assert!(cert.min_value.abs() < 1e-12 && cert.is_copositive);
    assert!(simplex_grid_min(&horn, 60) >= -1e-6);
    assert!(CopositivityTester::new(5).unwrap().is_member(&horn, 1e-10));
}

#[test]
fn witness_separates_non_copositive_points() {
    let cap = copositive_cap_oracle(4, COPOSITIVE_TOL).unwrap();
    let mut seen = 0;
    for k in 0..50 {
        let a = random_sym(4, 900 + k).scaled(0.4);
        let cert = is_copositive(&a, COPOSITIVE_TOL).unwrap();
        let x = svec(&a);
        assert_eq!(
            cap.test(x.as_slice()),
            cert.is_copositive && x.norm() <= 1.0
        );
        if !cert.is_copositive {
            seen += 1;
            assert!(cert.witness_outer().trace_inner(&a) < 0.0);
            assert!((cert.witness.sum() - 1.0).abs() < 1e-12);
            assert!(cert.witness.iter().all(|&v| v >= 0.0));
        }
    }
    assert!(seen > 10);
}

fn time_queries(oracle: &dyn MembershipOracle, reps: usize) -> f64 {
    let x = oracle.interior_point();
    let start = Instant::now();
    let mut inside = 0;
    for _ in 0..reps {
        inside += oracle.test(std::hint::black_box(x.as_slice())) as usize;
    }
    assert_eq!(inside, reps);
    start.elapsed().as_secs_f64() / reps as f64
}

#[test]
fn dnn_query_cost_is_cubic() {
    let small = dnn_oracle(40, None).unwrap();
    let large = dnn_oracle(80, None).unwrap();
    time_queries(&small, 50);
    let best = |o: &dyn MembershipOracle, reps| {
        (0..3)
            .map(|_| time_queries(o, reps))
            .fold(f64::INFINITY, f64::min)
    };
    let ratio = best(&large, 100) / best(&small, 400);
    assert!((8.0 / 12.0..=8.0 * 12.0).contains(&ratio), "ratio {ratio}");
}

fn assert_midpoint_convex(oracle: &dyn MembershipOracle, seed: u64) {
    let n = oracle.dim();
    let src = DirectionSource::isotropic(n).unwrap();
    let tol = DEFAULT_CHORD_REL_TOL * oracle.enclosing_radius();
    let pts = parallel_walks(
        oracle,
        &oracle.interior_point(),
        &BoltzmannParam::uniform(n),
        &src,
        3 * n,
        tol,
        seed,
        60,
    )
    .unwrap();
    assert!(pts.iter().all(|p| oracle.test(p.as_slice())));
    for pair in pts.chunks(2) {
        let mid: Vector = (&pair[0] + &pair[1]) * 0.5;
        assert!(oracle.test(mid.as_slice()));
    }
}

#[test]
fn bodies_are_midpoint_convex() {
    assert_midpoint_convex(&ball_oracle(6, 1.0).unwrap(), 1);
    assert_midpoint_convex(&cube_oracle(6).unwrap(), 2);
    assert_midpoint_convex(&dnn_oracle(4, None).unwrap(), 3);
    assert_midpoint_convex(&copositive_cap_oracle(4, COPOSITIVE_TOL).unwrap(), 4);
}

#[test]
fn call_counters_track_queries() {
    let dnn = dnn_oracle(3, None).unwrap();
    let x = dnn.interior_point();
    for _ in 0..7 {
        assert!(dnn.contains(x.as_slice()));
    }
    assert!(dnn.test(x.as_slice()));
    assert_eq!(dnn.call_count(), 7);
}
