//! Hit-and-run sampling of Boltzmann densities `∝ exp(⟨θ, x⟩)` on a body.
//!
//! One step draws a direction `d`, locates the chord of the body through the
//! current point along `d` with membership queries (doubling, then
//! bisection), and resamples on the chord from the density `∝ exp(s·t)` with
//! `s = ⟨θ, d⟩` by exact inverse-CDF sampling.
//!
//! Randomness comes from ChaCha8 streams. Walk `j` of a batch seeded with
//! `master` uses [`split_seed`]`(master, j)`, so batches are reproducible
//! regardless of how many threads run them.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Vector};
use crate::oracle::MembershipOracle;

/// Relative chord tolerance: bisection stops at `1e-8 · R`.
pub const DEFAULT_CHORD_REL_TOL: f64 = 1e-8;

/// Initial doubling step as a fraction of the guaranteed-exit distance.
const INITIAL_STEP_FRACTION: f64 = 1.0 / 64.0;

/// Boltzmann parameter `θ = −c/T`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoltzmannParam {
    theta: Vector,
    temperature: f64,
}

impl BoltzmannParam {
    /// `θ = 0`, `T = ∞`.
    pub fn uniform(n: usize) -> Self {
        Self {
            theta: Vector::zeros(n),
            temperature: f64::INFINITY,
        }
    }

    /// `θ = −c/T` for an objective `c` and temperature `T > 0`.
    pub fn for_objective(c: &Vector, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::Parameter("temperature must be positive".into()));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if temperature.is_infinite() {
            return Ok(Self::uniform(c.len()));
        }
        Ok(Self {
            theta: -c / temperature,
            temperature,
        })
    }

    pub fn theta(&self) -> &Vector {
        &self.theta
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn is_uniform(&self) -> bool {
        self.theta.iter().all(|&v| v == 0.0)
    }
}

/// `{x + t·d : t_minus ≤ t ≤ t_plus}` with the current point at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSegment {
    pub t_minus: f64,
    pub t_plus: f64,
}

impl LineSegment {
    pub fn width(&self) -> f64 {
        self.t_plus - self.t_minus
    }
}

/// Law of hit-and-run directions.
#[derive(Debug, Clone)]
pub enum DirectionSource {
    /// Standard Gaussian `𝒩(0, I)`.
    Isotropic { dim: usize },
    /// `L·z` with `z ~ 𝒩(0, I)`, i.e. `𝒩(0, LLᵀ)`.
    Factored { factor: DMatrix<f64> },
    /// Uniform choice among fixed vectors, zero vectors skipped.
    Empirical { directions: Vec<Vector> },
}

impl DirectionSource {
    pub fn isotropic(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("dimension must be >= 1".into()));
        }
        Ok(Self::Isotropic { dim })
    }

    /// Gaussian directions with covariance `LLᵀ`; `L` must be lower
    /// triangular with a nonzero diagonal.
    pub fn factored(factor: DMatrix<f64>) -> Result<Self> {
        let n = factor.nrows();
        if n == 0 || factor.ncols() != n {
            return Err(Error::Parameter(
                "factor must be square and nonempty".into(),
            ));
        }
        for j in 0..n {
            if !(factor[(j, j)].abs() > 0.0) || !factor[(j, j)].is_finite() {
                return Err(Error::DegenerateDirections("singular factor".into()));
            }
            for i in 0..j {
                if factor[(i, j)] != 0.0 {
                    return Err(Error::Parameter("factor must be lower triangular".into()));
                }
            }
        }
        Ok(Self::Factored { factor })
    }

    /// Uniform choice among `directions`; at least one must be nonzero.
    pub fn empirical(directions: Vec<Vector>) -> Result<Self> {
        let n = directions
            .first()
            .ok_or_else(|| Error::DegenerateDirections("no directions".into()))?
            .len();
        if directions.iter().any(|d| d.len() != n) {
            return Err(Error::Parameter("directions differ in length".into()));
        }
        if directions.iter().all(|d| d.iter().all(|&v| v == 0.0)) {
            return Err(Error::DegenerateDirections(
                "all directions are zero".into(),
            ));
        }
        Ok(Self::Empirical { directions })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Isotropic { dim } => *dim,
            Self::Factored { factor } => factor.nrows(),
            Self::Empirical { directions } => directions[0].len(),
        }
    }
}

/// Draws one nonzero direction.
pub fn draw_direction<R: Rng + ?Sized>(src: &DirectionSource, rng: &mut R) -> Vector {
    let mut out = Vector::zeros(src.dim());
    draw_direction_into(src, rng, &mut out);
    out
}

fn draw_direction_into<R: Rng + ?Sized>(src: &DirectionSource, rng: &mut R, out: &mut Vector) {
    loop {
        match src {
            DirectionSource::Isotropic { .. } => {
                for v in out.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
            }
            DirectionSource::Factored { factor } => {
                let z = Vector::from_fn(factor.nrows(), |_, _| rng.sample(StandardNormal));
                factor.mul_to(&z, out);
            }
            DirectionSource::Empirical { directions } => {
                let k = rng.random_range(0..directions.len());
                out.copy_from(&directions[k]);
            }
        }
        if out.iter().any(|&v| v != 0.0) {
            return;
        }
    }
}

/// Membership probe along a line with a reusable buffer.
struct Probe<'a, O: ?Sized> {
    oracle: &'a O,
    x: &'a [f64],
    d: &'a [f64],
    buf: &'a mut Vec<f64>,
}

impl<O: MembershipOracle + ?Sized> Probe<'_, O> {
    fn inside(&mut self, t: f64) -> bool {
        self.buf.clear();
        self.buf
            .extend(self.x.iter().zip(self.d).map(|(xi, di)| xi + t * di));
        self.oracle.contains(self.buf)
    }

    /// Largest certified-inside `t ≥ 0` along `sign·d`, to within `tol_t`.
    fn extent(&mut self, sign: f64, t_far: f64, tol_t: f64) -> f64 {
        let mut lo = 0.0;
        let mut hi = t_far;
        let mut t = t_far * INITIAL_STEP_FRACTION;
        while t < t_far {
            if self.inside(sign * t) {
                lo = t;
                t *= 2.0;
            } else {
                hi = t;
                break;
            }
        }
        while hi - lo > tol_t {
            let mid = 0.5 * (lo + hi);
            if self.inside(sign * mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

fn chord_unchecked<O: MembershipOracle + ?Sized>(
    oracle: &O,
    x: &[f64],
    d: &[f64],
    tol: f64,
    buf: &mut Vec<f64>,
) -> LineSegment {
    let dn = norm(d);
    // |x| ≤ R, so |x + t d| > R once t·|d| > 2R
    let t_far = (2.0 * oracle.enclosing_radius() + tol) / dn;
    let tol_t = tol / dn;
    let mut probe = Probe { oracle, x, d, buf };
    let t_plus = probe.extent(1.0, t_far, tol_t);
    let t_minus = -probe.extent(-1.0, t_far, tol_t);
    LineSegment { t_minus, t_plus }
}

/// Chord of the body through `x` along `d`.
///
/// `x + t_plus·d` is inside and `x + (t_plus + tol/‖d‖)·d` is outside, and
/// likewise for `t_minus`. Every query, including the initial check of `x`,
/// is counted.
pub fn chord<O: MembershipOracle + ?Sized>(
    oracle: &O,
    x: &Vector,
    d: &Vector,
    tol: f64,
) -> Result<LineSegment> {
    let n = oracle.dim();
    for v in [x, d] {
        if v.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: v.len(),
            });
        }
    }
    if !(tol > 0.0) {
        return Err(Error::Parameter("chord tolerance must be positive".into()));
    }
    let dn = norm(d.as_slice());
    if !(dn > 0.0) || !dn.is_finite() {
        return Err(Error::Parameter(
            "direction must be nonzero and finite".into(),
        ));
    }
    if !oracle.contains(x.as_slice()) {
        return Err(Error::Infeasible);
    }
    let mut buf = Vec::with_capacity(n);
    Ok(chord_unchecked(
        oracle,
        x.as_slice(),
        d.as_slice(),
        tol,
        &mut buf,
    ))
}

/// `ln(eᵃ + eᵇ)`.
fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Inverse-CDF draw from the density `∝ exp(s·t)` on `seg`.
///
/// Stable for all `s`: the closed form is rewritten around the favored
/// endpoint and evaluated in log space, so large `|s·width|` never
/// overflows.
pub fn sample_on_chord(s: f64, seg: LineSegment, u: f64) -> f64 {
    let (a, b) = (seg.t_minus, seg.t_plus);
    let w = b - a;
    if !(w > 0.0) {
        return a;
    }
    if s == 0.0 {
        return a + u * w;
    }
    let z = s * w;
    if z.is_infinite() || z.is_nan() {
        return if s > 0.0 { b } else { a };
    }
    let t = if z.abs() < 1.0 {
        a + (u * z.exp_m1()).ln_1p() / s
    } else if z > 0.0 {
        // F⁻¹(u) = b + ln(u + (1−u)e^{−z}) / s
        b + log_add_exp(u.ln(), (-u).ln_1p() - z) / s
    } else {
        // F⁻¹(u) = a + ln((1−u) + u·e^{z}) / s
        a + log_add_exp((-u).ln_1p(), u.ln() + z) / s
    };
    t.clamp(a, b)
}

/// Closed-form CDF of the density `∝ exp(s·t)` on `seg`.
pub fn chord_cdf(s: f64, seg: LineSegment, t: f64) -> f64 {
    let (a, b) = (seg.t_minus, seg.t_plus);
    if t <= a {
        return 0.0;
    }
    if t >= b {
        return 1.0;
    }
    let w = b - a;
    if s == 0.0 {
        return (t - a) / w;
    }
    let z = s * w;
    if z > 0.0 {
        // (e^{s(t−a)} − 1)/(e^{z} − 1) = e^{s(t−b)}·(1 − e^{−s(t−a)})/(1 − e^{−z})
        (s * (t - b)).exp() * (-(s * (t - a))).exp_m1() / (-z).exp_m1()
    } else {
        (s * (t - a)).exp_m1() / z.exp_m1()
    }
}

/// Steps and chord tolerance of a walk, plus the seed of its RNG stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    pub steps: usize,
    pub chord_tol: f64,
    pub rng_seed: u64,
}

impl WalkConfig {
    /// `chord_tol = 1e-8·R`.
    pub fn new(steps: usize, radius: f64, rng_seed: u64) -> Self {
        Self {
            steps,
            chord_tol: DEFAULT_CHORD_REL_TOL * radius,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chord_tol > 0.0) {
            return Err(Error::Parameter("chord tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Hit-and-run from `start` with the walk's own RNG stream.
///
/// `ℓ = 0` returns `start` without oracle queries.
pub fn hit_and_run_walk<O: MembershipOracle + ?Sized>(
    oracle: &O,
    start: &Vector,
    param: &BoltzmannParam,
    src: &DirectionSource,
    cfg: &WalkConfig,
) -> Result<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    walk_with_rng(
        oracle,
        start,
        param,
        src,
        cfg.steps,
        cfg.chord_tol,
        &mut rng,
    )
}

/// Hit-and-run drawing from a caller-owned RNG, for chained walks.
pub fn walk_with_rng<O: MembershipOracle + ?Sized, R: Rng + ?Sized>(
    oracle: &O,
    start: &Vector,
    param: &BoltzmannParam,
    src: &DirectionSource,
    steps: usize,
    chord_tol: f64,
    rng: &mut R,
) -> Result<Vector> {
    let n = oracle.dim();
    for len in [start.len(), param.dim(), src.dim()] {
        if len != n {
            return Err(Error::Dimension {
                expected: n,
                got: len,
            });
        }
    }
    if !(chord_tol > 0.0) {
        return Err(Error::Parameter("chord tolerance must be positive".into()));
    }
    let mut x = start.clone();
    if steps == 0 {
        return Ok(x);
    }
    debug_assert!(oracle.test(x.as_slice()), "walk started outside the body");
    let uniform = param.is_uniform();
    let mut d = Vector::zeros(n);
    let mut buf = Vec::with_capacity(n);
    for _ in 0..steps {
        draw_direction_into(src, rng, &mut d);
        let seg = chord_unchecked(oracle, x.as_slice(), d.as_slice(), chord_tol, &mut buf);
        let s = if uniform {
            0.0
        } else {
            dot(param.theta().as_slice(), d.as_slice())
        };
        let u: f64 = rng.random();
        let t = sample_on_chord(s, seg, u);
        x.axpy(t, &d, 1.0);
        debug_assert!(oracle.test(x.as_slice()), "walk left the body");
    }
    Ok(x)
}

/// Independent walks from a common start; walk `j` uses stream `j` of
/// `master_seed`. Results are in walk order.
pub fn parallel_walks<O: MembershipOracle + ?Sized>(
    oracle: &O,
    start: &Vector,
    param: &BoltzmannParam,
    src: &DirectionSource,
    steps: usize,
    chord_tol: f64,
    master_seed: u64,
    count: usize,
) -> Result<Vec<Vector>> {
    (0..count)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(master_seed, j as u64);
            walk_with_rng(oracle, start, param, src, steps, chord_tol, &mut rng)
        })
        .collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `j` under `master`.
pub fn split_seed(master: u64, j: u64) -> u64 {
    splitmix64(splitmix64(master).wrapping_add(splitmix64(j.wrapping_add(0x5851_F42D))))
}

pub fn stream_rng(master: u64, j: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(split_seed(master, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{ball_oracle, cube_oracle};
    use approx::assert_abs_diff_eq;

    fn seg(a: f64, b: f64) -> LineSegment {
        LineSegment {
            t_minus: a,
            t_plus: b,
        }
    }

    #[test]
    fn sample_on_chord_examples() {
        assert_eq!(sample_on_chord(0.0, seg(-1.0, 3.0), 0.5), 1.0);
        assert_eq!(sample_on_chord(f64::INFINITY, seg(-1.0, 3.0), 0.3), 3.0);
        assert_eq!(
            sample_on_chord(f64::NEG_INFINITY, seg(-1.0, 3.0), 0.3),
            -1.0
        );
        let expect = ((1.0 + std::f64::consts::E) / 2.0).ln();
        assert_abs_diff_eq!(
            sample_on_chord(1.0, seg(0.0, 1.0), 0.5),
            expect,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(expect, 0.62011, epsilon = 1e-5);
    }

    #[test]
    fn sample_on_chord_saturates_without_overflow() {
        let s = seg(0.0, 1.0);
        for &u in &[1e-300, 1e-10, 0.5, 1.0 - 1e-12] {
            let t = sample_on_chord(1e6, s, u);
            assert!(t.is_finite() && (0.0..=1.0).contains(&t));
            assert!(1.0 - t < 1e-3);
            let t = sample_on_chord(-1e6, s, u);
            assert!(t < 1e-3 && t >= 0.0);
        }
        // exponential tail near the favored endpoint: offset ≈ −ln(u)/s
        let t = sample_on_chord(1e4, s, 0.5);
        assert_abs_diff_eq!(1.0 - t, 2f64.ln() / 1e4, epsilon = 1e-12);
    }

    #[test]
    fn inverse_cdf_round_trips() {
        for &s in &[-50.0, -3.0, -0.5, 0.0, 0.2, 0.9, 4.0, 80.0] {
            for &u in &[0.01, 0.3, 0.5, 0.77, 0.999] {
                let g = seg(-0.4, 1.3);
                let t = sample_on_chord(s, g, u);
                assert_abs_diff_eq!(chord_cdf(s, g, t), u, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn chord_examples() {
        let ball = ball_oracle(3, 1.0).unwrap();
        let tol = 1e-8;
        let e1 = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let s = chord(&ball, &Vector::zeros(3), &e1, tol).unwrap();
        assert_abs_diff_eq!(s.t_minus, -1.0, epsilon = tol);
        assert_abs_diff_eq!(s.t_plus, 1.0, epsilon = tol);
        let s = chord(&ball, &(&e1 * 0.5), &e1, tol).unwrap();
        assert_abs_diff_eq!(s.t_minus, -1.5, epsilon = tol);
        assert_abs_diff_eq!(s.t_plus, 0.5, epsilon = tol);
        let cube = cube_oracle(4).unwrap();
        let d = Vector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let s = chord(&cube, &cube.interior_point(), &d, tol).unwrap();
        assert_abs_diff_eq!(s.t_minus, -0.5, epsilon = tol);
        assert_abs_diff_eq!(s.t_plus, 0.5, epsilon = tol);
        assert!(chord(&ball, &(&e1 * 2.0), &e1, tol).is_err());
    }

    #[test]
    fn chord_endpoints_flip_membership() {
        let ball = ball_oracle(5, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tol = 1e-8 * 2.0;
        for _ in 0..50 {
            let x = draw_direction(&DirectionSource::Isotropic { dim: 5 }, &mut rng) * 0.2;
            let d = draw_direction(&DirectionSource::Isotropic { dim: 5 }, &mut rng);
            let s = chord(&ball, &x, &d, tol).unwrap();
            let step = tol / d.norm();
            assert!(ball.test((&x + &d * s.t_plus).as_slice()));
            assert!(!ball.test((&x + &d * (s.t_plus + step)).as_slice()));
            assert!(ball.test((&x + &d * s.t_minus).as_slice()));
            assert!(!ball.test((&x + &d * (s.t_minus - step)).as_slice()));
        }
    }

    #[test]
    fn zero_step_walk_returns_start_without_queries() {
        let cube = cube_oracle(3).unwrap();
        let start = cube.interior_point();
        let cfg = WalkConfig::new(0, cube.enclosing_radius(), 1);
        let out = hit_and_run_walk(
            &cube,
            &start,
            &BoltzmannParam::uniform(3),
            &DirectionSource::isotropic(3).unwrap(),
            &cfg,
        )
        .unwrap();
        assert_eq!(out, start);
        assert_eq!(cube.call_count(), 0);
    }

    #[test]
    fn walks_are_reproducible() {
        let cube = cube_oracle(4).unwrap();
        let src = DirectionSource::isotropic(4).unwrap();
        let c = Vector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let param = BoltzmannParam::for_objective(&c, 0.1).unwrap();
        let cfg = WalkConfig::new(50, 2.0, 99);
        let a = hit_and_run_walk(&cube, &cube.interior_point(), &param, &src, &cfg).unwrap();
        let b = hit_and_run_walk(&cube, &cube.interior_point(), &param, &src, &cfg).unwrap();
        assert_eq!(a, b);
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(draw_direction(&src, &mut r1), draw_direction(&src, &mut r2));
    }

    #[test]
    fn parallel_batches_match_sequential_streams() {
        let ball = ball_oracle(3, 1.0).unwrap();
        let src = DirectionSource::isotropic(3).unwrap();
        let p = BoltzmannParam::uniform(3);
        let start = Vector::zeros(3);
        let batch = parallel_walks(&ball, &start, &p, &src, 20, 1e-8, 42, 6).unwrap();
        for (j, got) in batch.iter().enumerate() {
            let mut rng = stream_rng(42, j as u64);
            let want = walk_with_rng(&ball, &start, &p, &src, 20, 1e-8, &mut rng).unwrap();
            assert_eq!(got, &want);
        }
    }

    #[test]
    fn empirical_source_returns_only_its_vectors() {
        let xbar = Vector::from_vec(vec![0.5, 0.5]);
        let e1 = Vector::from_vec(vec![1.0, 0.0]) - &xbar;
        let e2 = Vector::from_vec(vec![0.0, 1.0]) - &xbar;
        let src = DirectionSource::empirical(vec![e1.clone(), e2.clone()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let d = draw_direction(&src, &mut rng);
            assert!(d == e1 || d == e2);
        }
        assert!(DirectionSource::empirical(vec![Vector::zeros(2)]).is_err());
        assert!(DirectionSource::empirical(vec![]).is_err());
    }

    #[test]
    fn factored_source_has_covariance_l_lt() {
        let l = DMatrix::<f64>::identity(3, 3) * 2.0;
        let src = DirectionSource::factored(l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let draws: Vec<Vector> = (0..100_000)
            .map(|_| draw_direction(&src, &mut rng))
            .collect();
        let cov = crate::stats::covariance(&draws).unwrap();
        let target = DMatrix::<f64>::identity(3, 3) * 4.0;
        assert!((cov - &target).norm() / target.norm() < 0.05);
        assert!(DirectionSource::factored(DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn split_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|j| split_seed(7, j)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(split_seed(7, 0), split_seed(8, 0));
    }
}
