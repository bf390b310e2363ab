//! The experiment drivers.
//!
//! Every driver derives per-cell RNG streams from its seed and the cell's
//! grid coordinates, so tables do not depend on thread count or grid order.
//! The `seconds` column is wall time and is the only non-reproducible one.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::anneal::{anneal_heuristic, anneal_kv, AnnealerConfig, RunReport, Tuning};
use crate::ellipsoid::{ellipsoid_minimize, CopositiveCapSeparator, DnnSeparator, EllipsoidConfig};
use crate::error::{param, Error, Result};
use crate::hit_and_run::{
    split_seed, stream_rng, walk_with_rng, BoltzmannParam, DirectionSource, DEFAULT_CHORD_REL_TOL,
};
use crate::linalg::{cholesky_lower, dot, spectral_relative_error, Vector};
use crate::oracle::{
    copositive_cap_oracle, cube_oracle, dnn_oracle, MembershipOracle, COPOSITIVE_TOL,
};
use crate::stats;
use crate::theory::heuristic_params;
use crate::DMatrix;

use super::fixtures::NamedMatrix;
use super::generators::gen_objective;
use super::table::{Cell, ExperimentTable};

/// Body sampled by the covariance and mean experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Body {
    /// Unit cube `[0, 1]ⁿ`.
    Cube(usize),
    /// DNN set of `m × m` matrices.
    Dnn(usize),
}

impl Body {
    pub fn label(&self) -> &'static str {
        match self {
            Body::Cube(_) => "cube",
            Body::Dnn(_) => "dnn",
        }
    }

    /// `n` for the cube, `m` for the DNN set.
    pub fn size(&self) -> usize {
        match *self {
            Body::Cube(n) | Body::Dnn(n) => n,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Body::Cube(n) => n,
            Body::Dnn(m) => m * (m + 1) / 2,
        }
    }

    fn oracle(&self) -> Result<Box<dyn MembershipOracle + Send>> {
        Ok(match *self {
            Body::Cube(n) => Box::new(cube_oracle(n)?),
            Body::Dnn(m) => Box::new(dnn_oracle(m, None)?),
        })
    }
}

/// Size of the reference sample behind `Σ̂₀` and `x̂₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReferenceScale {
    pub samples: usize,
    pub walk_length: usize,
}

impl ReferenceScale {
    /// 20 000 samples, walk length 5 000.
    pub const DESK: Self = Self {
        samples: 20_000,
        walk_length: 5_000,
    };
    /// 20 000 samples, walk length 50 000.
    pub const PAPER: Self = Self {
        samples: 20_000,
        walk_length: 50_000,
    };
}

/// `ℓ × N` grid; `ℓ = 0` stands for i.i.d. sampling (cube only).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SamplingGrid {
    pub walk_lengths: Vec<usize>,
    pub sample_sizes: Vec<usize>,
}

impl SamplingGrid {
    fn validate(&self) -> Result<()> {
        if self.walk_lengths.is_empty() || self.sample_sizes.is_empty() {
            return Err(param("sampling grid is empty"));
        }
        if self.sample_sizes.contains(&0) {
            return Err(param("sample sizes must be positive"));
        }
        Ok(())
    }

    fn sorted_sizes(&self) -> Vec<usize> {
        let mut s = self.sample_sizes.clone();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Samples `range` of a family of independent isotropic hit-and-run walks of
/// `steps` from the interior point; sample `j` uses stream `j` of `seed`.
pub fn walk_samples<O: MembershipOracle + ?Sized>(
    oracle: &O,
    steps: usize,
    seed: u64,
    range: std::ops::Range<usize>,
) -> Result<Vec<Vector>> {
    let n = oracle.dim();
    let start = oracle.interior_point();
    let src = DirectionSource::isotropic(n)?;
    let uniform = BoltzmannParam::uniform(n);
    let tol = DEFAULT_CHORD_REL_TOL * oracle.enclosing_radius();
    range
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, j as u64);
            walk_with_rng(oracle, &start, &uniform, &src, steps, tol, &mut rng)
        })
        .collect()
}

/// Exact uniform samples from `[0, 1]ⁿ`, indexed like [`walk_samples`].
pub fn iid_cube_samples(n: usize, seed: u64, range: std::ops::Range<usize>) -> Vec<Vector> {
    range
        .map(|j| {
            let mut rng = stream_rng(seed, j as u64);
            Vector::from_fn(n, |_, _| rng.random::<f64>())
        })
        .collect()
}

/// Growing sample set; `extend_to` adds the missing indices and reports
/// the cumulative generation time.
struct SampleSeries<'a> {
    body: Body,
    oracle: &'a (dyn MembershipOracle + Send),
    steps: usize,
    seed: u64,
    samples: Vec<Vector>,
    seconds: f64,
}

impl SampleSeries<'_> {
    fn extend_to(&mut self, count: usize) -> Result<()> {
        let have = self.samples.len();
        if count <= have {
            return Ok(());
        }
        let clock = Instant::now();
        let more = if self.steps == 0 {
            match self.body {
                Body::Cube(n) => iid_cube_samples(n, self.seed, have..count),
                Body::Dnn(_) => {
                    return Err(param(
                        "i.i.d. sampling (ell = 0) is only available for the cube",
                    ))
                }
            }
        } else {
            walk_samples(self.oracle, self.steps, self.seed, have..count)?
        };
        self.samples.extend(more);
        self.seconds += clock.elapsed().as_secs_f64();
        Ok(())
    }
}

/// Reference mean and covariance: analytic for the cube, sampled for DNN.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub mean: Vector,
    pub covariance: DMatrix<f64>,
}

pub fn reference_moments(body: Body, scale: ReferenceScale, seed: u64) -> Result<Reference> {
    match body {
        Body::Cube(n) => Ok(Reference {
            mean: Vector::from_element(n, 0.5),
            covariance: DMatrix::identity(n, n) / 12.0,
        }),
        Body::Dnn(_) => {
            let oracle = body.oracle()?;
            let ys = walk_samples(
                &*oracle,
                scale.walk_length,
                split_seed(seed, u64::MAX),
                0..scale.samples,
            )?;
            Ok(Reference {
                mean: stats::mean(&ys)?,
                covariance: stats::covariance(&ys)?,
            })
        }
    }
}

/// `‖d‖_{Σ⁻¹} = ‖L⁻¹d‖` with `Σ = LLᵀ`; `+∞` when `Σ` is singular.
pub fn mahalanobis(d: &Vector, sigma: &DMatrix<f64>) -> f64 {
    match cholesky_lower(sigma, 1e-13) {
        Some(l) => l
            .solve_lower_triangular(d)
            .map_or(f64::INFINITY, |w| w.norm()),
        None => f64::INFINITY,
    }
}

fn series_seed(seed: u64, ell: usize) -> u64 {
    split_seed(seed, ell as u64)
}

fn moment_experiment(
    body: Body,
    grid: &SamplingGrid,
    reference: &Reference,
    seed: u64,
    metric_name: &str,
    metric: impl Fn(&[Vector]) -> Result<f64> + Sync,
) -> Result<ExperimentTable> {
    grid.validate()?;
    let sizes = grid.sorted_sizes();
    let oracle = body.oracle()?;
    if reference.mean.len() != body.dim() {
        return Err(Error::Dimension {
            expected: body.dim(),
            got: reference.mean.len(),
        });
    }
    let per_ell: Vec<Vec<Vec<Cell>>> = grid
        .walk_lengths
        .par_iter()
        .map(|&ell| {
            let mut series = SampleSeries {
                body,
                oracle: &*oracle,
                steps: ell,
                seed: series_seed(seed, ell),
                samples: Vec::new(),
                seconds: 0.0,
            };
            let mut rows = Vec::new();
            for &n in &sizes {
                series.extend_to(n)?;
                let value = metric(&series.samples[..n])?;
                rows.push(vec![
                    body.label().into(),
                    body.size().into(),
                    ell.into(),
                    n.into(),
                    value.into(),
                    series.seconds.into(),
                ]);
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut t = ExperimentTable::new(&["body", "size", "ell", "N", metric_name, "seconds"]);
    for rows in per_ell {
        for r in rows {
            t.push(r)?;
        }
    }
    Ok(t)
}

/// `ρ(Σ̂_{ℓ,N}⁻¹Σ₀ − I)` over the grid. Columns
/// `body,size,ell,N,rho,seconds`; `rho = inf` for a singular estimate.
pub fn covariance_experiment(
    body: Body,
    grid: &SamplingGrid,
    reference: &Reference,
    seed: u64,
) -> Result<ExperimentTable> {
    moment_experiment(body, grid, reference, seed, "rho", |ys| {
        Ok(spectral_relative_error(
            &stats::covariance(ys)?,
            &reference.covariance,
        ))
    })
}

/// `‖x̂₀ − x̂_{ℓ,N}‖_{Σ̂₀⁻¹}` over the grid. Columns
/// `body,size,ell,N,norm,seconds`.
pub fn mean_experiment(
    body: Body,
    grid: &SamplingGrid,
    reference: &Reference,
    seed: u64,
) -> Result<ExperimentTable> {
    moment_experiment(body, grid, reference, seed, "norm", |ys| {
        let d = &reference.mean - stats::mean(ys)?;
        Ok(mahalanobis(&d, &reference.covariance))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnealMethod {
    CovarianceAdaptive,
    Heuristic,
}

impl std::str::FromStr for AnnealMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "alg2" | "kv" | "covariance" | "covariance_adaptive" => Ok(Self::CovarianceAdaptive),
            "alg3" | "heuristic" => Ok(Self::Heuristic),
            other => Err(param(format!("unknown annealing method '{other}'"))),
        }
    }
}

pub fn run_annealer<O: MembershipOracle + ?Sized>(
    method: AnnealMethod,
    oracle: &O,
    cfg: &AnnealerConfig,
) -> Result<RunReport> {
    match method {
        AnnealMethod::CovarianceAdaptive => anneal_kv(oracle, cfg),
        AnnealMethod::Heuristic => anneal_heuristic(oracle, cfg),
    }
}

/// Tolerance of the internal reference solve.
pub const REFERENCE_TOL: f64 = 1e-6;

/// `min ⟨c, x⟩` over the DNN set with a reference optimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapProblem {
    pub m: usize,
    pub objective_seed: u64,
    #[serde(with = "crate::linalg::vector_serde")]
    pub c: Vector,
    #[serde(with = "crate::linalg::vector_serde")]
    pub reference_point: Vector,
    pub reference_value: f64,
    pub reference_calls: u64,
}

impl GapProblem {
    /// Random objective from `objective_seed` and an ellipsoid reference
    /// solve at tolerance `1e-6`.
    pub fn new(m: usize, objective_seed: u64) -> Result<Self> {
        let c = gen_objective(m, objective_seed)?.c;
        let sep = DnnSeparator::new(m)?;
        let r = ellipsoid_minimize(&c, &sep, &EllipsoidConfig::new(1.0, REFERENCE_TOL))
            .map_err(|e| Error::Numerical(format!("reference solve failed: {e}")))?;
        if !r.converged {
            return Err(Error::Numerical(
                "reference solve hit its iteration cap".into(),
            ));
        }
        Ok(Self {
            m,
            objective_seed,
            c,
            reference_point: r.point,
            reference_value: r.value,
            reference_calls: r.oracle_calls,
        })
    }

    /// `⟨c, x − x*⟩`.
    pub fn gap(&self, x: &Vector) -> f64 {
        dot(self.c.as_slice(), x.as_slice()) - self.reference_value
    }

    /// One annealing run with `N`, `ℓ` and the given tuning.
    pub fn run(
        &self,
        method: AnnealMethod,
        tuning: &Tuning,
        n_samples: usize,
        ell: usize,
        seed: u64,
    ) -> Result<(f64, RunReport)> {
        let oracle = dnn_oracle(self.m, None)?;
        let cfg = AnnealerConfig::new(self.c.clone(), n_samples, ell, seed).with_tuning(tuning);
        let report = run_annealer(method, &oracle, &cfg)?;
        Ok((self.gap(&report.final_point), report))
    }
}

/// Final gap over an `ℓ × N` grid. Columns
/// `m,ell,N,gap,oracle_calls,seconds`.
pub fn gap_experiment(
    problem: &GapProblem,
    method: AnnealMethod,
    tuning: &Tuning,
    grid: &SamplingGrid,
    seed: u64,
) -> Result<ExperimentTable> {
    grid.validate()?;
    if grid.walk_lengths.contains(&0) {
        return Err(param("annealing needs ell >= 1"));
    }
    let cells: Vec<(usize, usize)> = grid
        .walk_lengths
        .iter()
        .flat_map(|&l| grid.sample_sizes.iter().map(move |&n| (l, n)))
        .collect();
    let rows: Vec<Vec<Cell>> = cells
        .par_iter()
        .map(|&(ell, n)| {
            let cell_seed = split_seed(series_seed(seed, ell), n as u64);
            let clock = Instant::now();
            let (gap, report) = problem.run(method, tuning, n, ell, cell_seed)?;
            Ok(vec![
                problem.m.into(),
                ell.into(),
                n.into(),
                gap.into(),
                report.total_calls().into(),
                clock.elapsed().as_secs_f64().into(),
            ])
        })
        .collect::<Result<_>>()?;
    let mut t = ExperimentTable::new(&["m", "ell", "N", "gap", "oracle_calls", "seconds"]);
    for r in rows {
        t.push(r)?;
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationMethod {
    Heuristic,
    Ellipsoid,
}

impl std::str::FromStr for SeparationMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "alg3" | "heuristic" => Ok(Self::Heuristic),
            "ellipsoid" => Ok(Self::Ellipsoid),
            other => Err(param(format!("unknown separation method '{other}'"))),
        }
    }
}

/// Ellipsoid tolerance for the separation problem.
pub const SEPARATION_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationOutcome {
    pub name: String,
    /// `⟨Y/‖Y‖, X*⟩`.
    pub objective: f64,
    pub oracle_calls: u64,
    pub seconds: f64,
    #[serde(with = "crate::linalg::vector_serde")]
    pub point: Vector,
}

/// `min ⟨Y/‖Y‖, X⟩` over copositive `X` with `‖X‖ ≤ 1`.
///
/// The heuristic annealer runs with `ε̄ = 1e-3`, `p = 0.1` and
/// `N = ℓ = ⌈n√n⌉`; its calls include the burn-in. The ellipsoid method runs
/// to tolerance `1e-4` and counts separation calls.
pub fn solve_separation(
    y: &NamedMatrix,
    method: SeparationMethod,
    seed: u64,
) -> Result<SeparationOutcome> {
    let m = y.matrix.order();
    let c = y.normalized_objective();
    let clock = Instant::now();
    let (point, calls) = match method {
        SeparationMethod::Heuristic => {
            let oracle = copositive_cap_oracle(m, COPOSITIVE_TOL)?;
            let (n_samples, ell) = heuristic_params(oracle.dim() as u64)?;
            let cfg = AnnealerConfig::new(c.clone(), n_samples as usize, ell as usize, seed);
            let r = anneal_heuristic(&oracle, &cfg)?;
            let calls = r.total_calls();
            (r.final_point, calls)
        }
        SeparationMethod::Ellipsoid => {
            let sep = CopositiveCapSeparator::new(m, COPOSITIVE_TOL)?;
            let r = ellipsoid_minimize(&c, &sep, &EllipsoidConfig::new(1.0, SEPARATION_TOL))?;
            (r.point, r.oracle_calls)
        }
    };
    Ok(SeparationOutcome {
        name: y.name.clone(),
        objective: dot(c.as_slice(), point.as_slice()),
        oracle_calls: calls,
        seconds: clock.elapsed().as_secs_f64(),
        point,
    })
}

/// Columns `name,objective,oracle_calls,seconds`.
pub fn separation_table(outcomes: &[SeparationOutcome]) -> Result<ExperimentTable> {
    let mut t = ExperimentTable::new(&["name", "objective", "oracle_calls", "seconds"]);
    for o in outcomes {
        t.push(vec![
            o.name.as_str().into(),
            o.objective.into(),
            o.oracle_calls.into(),
            o.seconds.into(),
        ])?;
    }
    Ok(t)
}

/// Runs `method` on every fixture; fixture `i` uses stream `i` of `seed`.
pub fn separation_experiment(
    fixtures: &[NamedMatrix],
    method: SeparationMethod,
    seed: u64,
) -> Result<(ExperimentTable, Vec<SeparationOutcome>)> {
    let outcomes: Vec<SeparationOutcome> = fixtures
        .par_iter()
        .enumerate()
        .map(|(i, y)| solve_separation(y, method, split_seed(seed, i as u64)))
        .collect::<Result<_>>()?;
    Ok((separation_table(&outcomes)?, outcomes))
}

/// A fresh `ChaCha8` stream, for drivers outside the crate.
pub fn experiment_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(split_seed(seed, stream))
}
