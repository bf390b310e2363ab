use anneal_core::hit_and_run::{
    chord, parallel_walks, sample_on_chord, stream_rng, BoltzmannParam, DirectionSource,
    LineSegment, DEFAULT_CHORD_REL_TOL,
};
use anneal_core::linalg::{dot, Vector};
use anneal_core::oracle::{
    ball_oracle, cube_oracle, dnn_oracle, dnn_start_point, MembershipOracle,
};
use anneal_core::stats::{covariance, mean, mean_and_stderr};
use rand::Rng;

mod common;
use common::{ks_statistic, naive_cdf};

#[test]
fn chord_draws_pass_kolmogorov_smirnov() {
    let seg = LineSegment {
        t_minus: -1.0,
        t_plus: 1.0,
    };
    for (k, s) in [-10.0, -1.0, 0.0, 1.0, 10.0].into_iter().enumerate() {
        let mut rng = stream_rng(2024, k as u64);
        let mut draws: Vec<f64> = (0..100_000)
            .map(|_| sample_on_chord(s, seg, rng.random()))
            .collect();
        draws.sort_by(|x, y| x.total_cmp(y));
        let d = ks_statistic(&draws, |t| naive_cdf(s, -1.0, 1.0, t));
        assert!(d < 0.01, "s = {s}: KS = {d}");
    }
}

#[test]
fn uniform_ball_walks_have_zero_mean_and_known_variance() {
    let n = 5;
    let ball = ball_oracle(n, 1.0).unwrap();
    let src = DirectionSource::isotropic(n).unwrap();
    let count = 4000;
    let ys = parallel_walks(
        &ball,
        &Vector::zeros(n),
        &BoltzmannParam::uniform(n),
        &src,
        20 * n,
        DEFAULT_CHORD_REL_TOL,
        77,
        count,
    )
    .unwrap();
    assert!(ys.iter().all(|y| ball.test(y.as_slice())));
    let mu = mean(&ys).unwrap();
    let var = 1.0 / (n as f64 + 2.0);
    let se = (var / count as f64).sqrt();
    for i in 0..n {
        assert!(mu[i].abs() < 4.0 * se, "coordinate {i}: {}", mu[i]);
    }
    let cov = covariance(&ys).unwrap();
    for i in 0..n {
        assert!(
            (cov[(i, i)] / var - 1.0).abs() < 0.05,
            "variance {i}: {}",
            cov[(i, i)]
        );
    }
}

#[test]
fn boltzmann_mean_on_cube_respects_temperature_bound() {
    let n = 6;
    let cube = cube_oracle(n).unwrap();
    let c = Vector::from_vec(vec![0.5, -0.3, 0.2, -0.6, 0.1, 0.4]).normalize();
    let min_h: f64 = c.iter().map(|&v| v.min(0.0)).sum();
    let src = DirectionSource::isotropic(n).unwrap();
    for (k, temperature) in [1.0, 0.1, 0.01].into_iter().enumerate() {
        let param = BoltzmannParam::for_objective(&c, temperature).unwrap();
        let ys = parallel_walks(
            &cube,
            &cube.interior_point(),
            &param,
            &src,
            3000,
            DEFAULT_CHORD_REL_TOL,
            k as u64,
            1000,
        )
        .unwrap();
        let h: Vec<f64> = ys.iter().map(|y| dot(c.as_slice(), y.as_slice())).collect();
        let (mu, se) = mean_and_stderr(&h);
        assert!(
            mu <= n as f64 * temperature + min_h + 3.0 * se,
            "T = {temperature}: mean {mu}, bound {}",
            n as f64 * temperature + min_h
        );
        assert!(mu >= min_h);
        // the cube factorizes, so the exact mean is a sum of 1-d terms
        let exact: f64 = c
            .iter()
            .map(|&ci| {
                let a = ci / temperature;
                ci * (1.0 / a - 1.0 / a.exp_m1())
            })
            .sum();
        assert!(
            (mu - exact).abs() < 4.0 * se,
            "T = {temperature}: mean {mu}, exact {exact}"
        );
    }
}

#[test]
fn dnn_chords_flip_membership_at_endpoints() {
    let m = 4;
    let dnn = dnn_oracle(m, None).unwrap();
    let n = dnn.dim();
    let tol = DEFAULT_CHORD_REL_TOL * dnn.enclosing_radius();
    let mut rng = stream_rng(5, 0);
    let x = dnn_start_point(m);
    for _ in 0..200 {
        let d = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let seg = chord(&dnn, &x, &d, tol).unwrap();
        let step = tol / d.norm();
        for (t, dir) in [(seg.t_plus, 1.0), (seg.t_minus, -1.0)] {
            assert!(dnn.test((&x + &d * t).as_slice()));
            assert!(!dnn.test((&x + &d * (t + dir * step)).as_slice()));
        }
    }
}
