//! Simulated annealing with hit-and-run sampling.
//!
//! [`anneal_kv`] is the covariance-adaptive method: each phase moves one
//! iterate and draws `N` further walks from the previous iterate to
//! re-estimate the covariance used for the next phase's directions.
//! [`anneal_heuristic`] chains the `N` walks, draws directions from the
//! previous phase's centered samples and moves the iterate to the sample
//! mean.
//!
//! Both start from a burn-in: chained isotropic walks of `10n` steps from the
//! oracle's interior point stand in for exact uniform samples.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::hit_and_run::{
    parallel_walks, split_seed, stream_rng, walk_with_rng, BoltzmannParam, DirectionSource,
    DEFAULT_CHORD_REL_TOL,
};
use crate::linalg::{cholesky_lower, dot, spectral_relative_error, Vector};
use crate::oracle::MembershipOracle;
use crate::schedule::{ScheduleKind, TemperatureSchedule};
use crate::stats;
use crate::theory::{theoretical_params, TheoreticalParams};
use crate::DMatrix;

/// Pivot floor, relative to the largest variance, below which a covariance
/// estimate counts as singular.
pub const COVARIANCE_PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    CovarianceAdaptive,
    Heuristic,
}

/// Schedule and accuracy settings shared by every run of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tuning {
    pub schedule: Option<ScheduleKind>,
    pub alpha: f64,
    pub vartheta: Option<f64>,
    pub epsilon_bar: f64,
    pub failure_prob: f64,
}

impl Default for Tuning {
    fn default() -> Self {
        Self {
            schedule: None,
            alpha: 4.0,
            vartheta: None,
            epsilon_bar: 1e-3,
            failure_prob: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealerConfig {
    /// Unit objective `c`; the annealer minimizes `⟨c, x⟩`.
    pub objective: Vector,
    /// `None` picks the barrier-based schedule for the covariance-adaptive
    /// method and the combined schedule for the heuristic.
    pub schedule: Option<ScheduleKind>,
    pub alpha: f64,
    /// `None` means `ϑ = n`.
    pub vartheta: Option<f64>,
    pub epsilon_bar: f64,
    pub failure_prob: f64,
    pub n_samples: usize,
    pub walk_length: usize,
    pub seed: u64,
    /// Fixed phase count; `None` runs until `n·T ≤ ε̄p`.
    pub phases: Option<usize>,
    /// Steps per burn-in sample; `None` means `10n`.
    pub burn_in_steps: Option<usize>,
    /// Inner ball radius `r`, used only to report the theoretical parameters.
    pub inner_radius: Option<f64>,
}

impl AnnealerConfig {
    /// Defaults `α = 4`, `ϑ = n`, `ε̄ = 1e-3`, `p = 0.1`.
    pub fn new(objective: Vector, n_samples: usize, walk_length: usize, seed: u64) -> Self {
        Self {
            objective,
            schedule: None,
            alpha: 4.0,
            vartheta: None,
            epsilon_bar: 1e-3,
            failure_prob: 0.1,
            n_samples,
            walk_length,
            seed,
            phases: None,
            burn_in_steps: None,
            inner_radius: None,
        }
    }

    pub fn with_tuning(mut self, t: &Tuning) -> Self {
        self.schedule = t.schedule;
        self.alpha = t.alpha;
        self.vartheta = t.vartheta;
        self.epsilon_bar = t.epsilon_bar;
        self.failure_prob = t.failure_prob;
        self
    }

    pub fn vartheta_for(&self, n: usize) -> f64 {
        self.vartheta.unwrap_or(n as f64)
    }

    pub fn validate(&self, n: usize, radius: f64) -> Result<()> {
        if self.objective.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.objective.len(),
            });
        }
        let norm = self.objective.norm();
        if !((norm - 1.0).abs() <= 1e-10) {
            return Err(param(format!(
                "objective must be a unit vector, has norm {norm}"
            )));
        }
        if !(self.epsilon_bar > 0.0 && self.epsilon_bar <= 2.0 * radius) {
            return Err(param(format!(
                "epsilon_bar must lie in (0, 2R], got {}",
                self.epsilon_bar
            )));
        }
        if !(self.failure_prob > 0.0 && self.failure_prob < 1.0) {
            return Err(param("failure probability must lie in (0, 1)"));
        }
        if self.n_samples == 0 || self.walk_length == 0 {
            return Err(param("N and ell must be positive"));
        }
        if let Some(r) = self.inner_radius {
            if !(r > 0.0) {
                return Err(param("inner radius must be positive"));
            }
        }
        Ok(())
    }

    fn schedule_for(&self, algo: Algorithm, n: usize, radius: f64) -> Result<TemperatureSchedule> {
        let kind = self.schedule.unwrap_or(match algo {
            Algorithm::CovarianceAdaptive => ScheduleKind::AhType,
            Algorithm::Heuristic => ScheduleKind::CombinedMin,
        });
        TemperatureSchedule::new(kind, n, radius, self.alpha, self.vartheta_for(n))
    }
}

/// One annealing phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRecord {
    pub k: usize,
    pub temperature: f64,
    /// Mean of the phase's `N` samples.
    #[serde(with = "crate::linalg::vector_serde")]
    pub sample_mean: Vector,
    /// `⟨c, sample mean⟩`.
    pub mean_objective: f64,
    /// `⟨c, X_k⟩`.
    pub objective: f64,
    pub phase_calls: u64,
    /// Cumulative annealing calls after this phase.
    pub oracle_calls: u64,
    /// Spectral relative change of the covariance estimate in this phase.
    pub covariance_change: Option<f64>,
    /// Wall time of the phase.
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub schedule: ScheduleKind,
    pub n: usize,
    pub n_samples: usize,
    pub walk_length: usize,
    pub seed: u64,
    pub phases: Vec<PhaseRecord>,
    #[serde(with = "crate::linalg::vector_serde")]
    pub initial_point: Vector,
    #[serde(with = "crate::linalg::vector_serde")]
    pub final_point: Vector,
    pub final_objective: f64,
    pub burn_in_calls: u64,
    /// Calls made by the annealing phases, burn-in excluded.
    pub oracle_calls: u64,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
    pub theoretical: Option<TheoreticalParams>,
    pub seconds: Option<f64>,
}

impl RunReport {
    /// Drops every wall-clock field, leaving a reproducible report.
    pub fn strip_timing(&mut self) {
        self.seconds = None;
        for p in &mut self.phases {
            p.seconds = None;
        }
    }

    pub fn total_calls(&self) -> u64 {
        self.burn_in_calls + self.oracle_calls
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per phase. The `seconds` column appears only with `timing`.
    pub fn write_csv<W: Write>(&self, w: W, timing: bool) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec![
            "k",
            "temperature",
            "objective",
            "mean_objective",
            "phase_calls",
            "oracle_calls",
            "covariance_change",
        ];
        if timing {
            header.push("seconds");
        }
        wr.write_record(&header)?;
        for p in &self.phases {
            let mut row = vec![
                p.k.to_string(),
                format!("{:e}", p.temperature),
                format!("{:e}", p.objective),
                format!("{:e}", p.mean_objective),
                p.phase_calls.to_string(),
                p.oracle_calls.to_string(),
                p.covariance_change
                    .map(|v| format!("{v:e}"))
                    .unwrap_or_default(),
            ];
            if timing {
                row.push(p.seconds.map(|s| format!("{s:.3}")).unwrap_or_default());
            }
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

const BURN_IN_NOTE: &str =
    "initial samples come from an isotropic hit-and-run burn-in, not exact uniform draws";

/// `count` chained isotropic walks of `steps` each from the interior point.
pub fn burn_in<O: MembershipOracle + ?Sized>(
    oracle: &O,
    count: usize,
    steps: usize,
    seed: u64,
) -> Result<Vec<Vector>> {
    let n = oracle.dim();
    let x0 = oracle.interior_point();
    if !oracle.query(x0.as_slice())? {
        return Err(Error::Infeasible);
    }
    let tol = DEFAULT_CHORD_REL_TOL * oracle.enclosing_radius();
    let src = DirectionSource::isotropic(n)?;
    let uniform = BoltzmannParam::uniform(n);
    let mut rng = stream_rng(seed, u64::MAX);
    let mut out = Vec::with_capacity(count);
    let mut x = x0;
    for _ in 0..count {
        x = walk_with_rng(oracle, &x, &uniform, &src, steps, tol, &mut rng)?;
        out.push(x.clone());
    }
    Ok(out)
}

struct Setup {
    schedule: TemperatureSchedule,
    bound: f64,
    tol: f64,
    start_calls: u64,
    clock: Instant,
}

fn setup<O: MembershipOracle + ?Sized>(
    oracle: &O,
    cfg: &AnnealerConfig,
    algo: Algorithm,
) -> Result<Setup> {
    let n = oracle.dim();
    let radius = oracle.enclosing_radius();
    cfg.validate(n, radius)?;
    Ok(Setup {
        schedule: cfg.schedule_for(algo, n, radius)?,
        bound: cfg.epsilon_bar * cfg.failure_prob / n as f64,
        tol: DEFAULT_CHORD_REL_TOL * radius,
        start_calls: oracle.call_count(),
        clock: Instant::now(),
    })
}

fn theory_for(cfg: &AnnealerConfig, n: usize, radius: f64) -> Option<TheoreticalParams> {
    let r = cfg.inner_radius?;
    theoretical_params(
        n as u64,
        radius,
        r,
        cfg.epsilon_bar,
        cfg.failure_prob,
        cfg.alpha,
        cfg.vartheta_for(n),
    )
    .ok()
}

fn keep_going(cfg: &AnnealerConfig, k: usize, temperature: f64, bound: f64) -> bool {
    match cfg.phases {
        Some(m) => k < m,
        None => temperature > bound,
    }
}

/// Covariance-adaptive annealing.
///
/// Phase `k` runs at `T_k = β·T_{k−1}` with `T_0 = R`, moves `X_{k−1}` by
/// one walk of `ℓ` steps and draws `N` walks from `X_{k−1}` in parallel, all
/// with directions `𝒩(0, Σ̂_{k−1})`. The new estimate `Σ̂_k` is the `1/N`
/// covariance of those walks. If `Σ̂` loses positive definiteness the run
/// switches for good to directions drawn from the centered samples.
pub fn anneal_kv<O: MembershipOracle + ?Sized>(
    oracle: &O,
    cfg: &AnnealerConfig,
) -> Result<RunReport> {
    let st = setup(oracle, cfg, Algorithm::CovarianceAdaptive)?;
    let n = oracle.dim();
    let burn_steps = cfg.burn_in_steps.unwrap_or(10 * n);
    let initial = burn_in(oracle, cfg.n_samples, burn_steps, cfg.seed)?;
    let burn_in_calls = oracle.call_count() - st.start_calls;
    let mut warnings = Vec::new();

    let mut x = initial.last().expect("N >= 1").clone();
    let x_start = x.clone();
    let mut samples = initial;
    let mut sigma = stats::covariance(&samples)?;
    let mut empirical = false;
    let mut records = Vec::new();
    let mut calls = 0u64;
    let mut k = 0;
    let mut temperature = st.schedule.temperature(1);
    while cfg.phases.map_or(true, |m| m > 0)
        && (k == 0 || keep_going(cfg, k, temperature, st.bound))
    {
        k += 1;
        temperature = st.schedule.temperature(k + 1);
        let before = oracle.call_count();
        let phase_clock = Instant::now();
        let theta = BoltzmannParam::for_objective(&cfg.objective, temperature)?;
        if !empirical && cholesky_lower(&sigma, COVARIANCE_PIVOT_TOL).is_none() {
            empirical = true;
            warnings.push(format!(
                "phase {k}: covariance estimate is singular, switching to empirical directions"
            ));
        }
        let src = if empirical {
            DirectionSource::empirical(stats::centered(&samples)?)?
        } else {
            let l = cholesky_lower(&sigma, COVARIANCE_PIVOT_TOL).expect("checked above");
            DirectionSource::factored(l)?
        };
        let phase_seed = split_seed(cfg.seed, k as u64);
        let mut rng = stream_rng(phase_seed, u64::MAX);
        let x_next = walk_with_rng(oracle, &x, &theta, &src, cfg.walk_length, st.tol, &mut rng)?;
        let ys = parallel_walks(
            oracle,
            &x,
            &theta,
            &src,
            cfg.walk_length,
            st.tol,
            phase_seed,
            cfg.n_samples,
        )?;
        let sigma_next = stats::covariance(&ys)?;
        let change = spectral_relative_error(&sigma, &sigma_next);
        let mean = stats::mean(&ys)?;
        x = x_next;
        sigma = sigma_next;
        samples = ys;
        let phase_calls = oracle.call_count() - before;
        calls += phase_calls;
        records.push(PhaseRecord {
            k,
            temperature,
            mean_objective: dot(cfg.objective.as_slice(), mean.as_slice()),
            sample_mean: mean,
            objective: dot(cfg.objective.as_slice(), x.as_slice()),
            phase_calls,
            oracle_calls: calls,
            covariance_change: Some(change),
            seconds: Some(phase_clock.elapsed().as_secs_f64()),
        });
    }
    Ok(RunReport {
        algorithm: Algorithm::CovarianceAdaptive,
        schedule: st.schedule.kind,
        n,
        n_samples: cfg.n_samples,
        walk_length: cfg.walk_length,
        seed: cfg.seed,
        phases: records,
        initial_point: x_start,
        final_objective: dot(cfg.objective.as_slice(), x.as_slice()),
        final_point: x,
        burn_in_calls,
        oracle_calls: calls,
        warnings,
        notes: vec![BURN_IN_NOTE.to_string()],
        theoretical: theory_for(cfg, n, oracle.enclosing_radius()),
        seconds: Some(st.clock.elapsed().as_secs_f64()),
    })
}

/// Heuristic annealing.
///
/// Phase `k` runs at `T_k`; walk `j` starts where walk `j−1` ended (walk 1
/// starts at `X_{k−1}`), directions are drawn uniformly from the previous
/// phase's samples centered at `X_{k−1}`, and `X_k` is the sample mean. The
/// loop continues while `n·T_{k−1} > ε̄p` and returns the last mean.
pub fn anneal_heuristic<O: MembershipOracle + ?Sized>(
    oracle: &O,
    cfg: &AnnealerConfig,
) -> Result<RunReport> {
    let st = setup(oracle, cfg, Algorithm::Heuristic)?;
    let n = oracle.dim();
    let burn_steps = cfg.burn_in_steps.unwrap_or(10 * n);
    let mut samples = burn_in(oracle, cfg.n_samples, burn_steps, cfg.seed)?;
    let burn_in_calls = oracle.call_count() - st.start_calls;

    let mut x = stats::mean(&samples)?;
    let x_start = x.clone();
    let mut records = Vec::new();
    let mut calls = 0u64;
    let mut k = 0;
    let mut temperature = f64::INFINITY;
    while cfg.phases.map_or(true, |m| m > 0)
        && (k == 0 || keep_going(cfg, k, temperature, st.bound))
    {
        k += 1;
        temperature = st.schedule.temperature(k);
        let before = oracle.call_count();
        let phase_clock = Instant::now();
        let theta = BoltzmannParam::for_objective(&cfg.objective, temperature)?;
        let dirs: Vec<Vector> = samples.iter().map(|y| y - &x).collect();
        let src = DirectionSource::empirical(dirs)?;
        let mut rng = stream_rng(cfg.seed, k as u64);
        let mut y = x.clone();
        let mut next = Vec::with_capacity(cfg.n_samples);
        for _ in 0..cfg.n_samples {
            y = walk_with_rng(oracle, &y, &theta, &src, cfg.walk_length, st.tol, &mut rng)?;
            next.push(y.clone());
        }
        x = stats::mean(&next)?;
        samples = next;
        let phase_calls = oracle.call_count() - before;
        calls += phase_calls;
        let obj = dot(cfg.objective.as_slice(), x.as_slice());
        records.push(PhaseRecord {
            k,
            temperature,
            sample_mean: x.clone(),
            mean_objective: obj,
            objective: obj,
            phase_calls,
            oracle_calls: calls,
            covariance_change: None,
            seconds: Some(phase_clock.elapsed().as_secs_f64()),
        });
    }
    Ok(RunReport {
        algorithm: Algorithm::Heuristic,
        schedule: st.schedule.kind,
        n,
        n_samples: cfg.n_samples,
        walk_length: cfg.walk_length,
        seed: cfg.seed,
        phases: records,
        initial_point: x_start,
        final_objective: dot(cfg.objective.as_slice(), x.as_slice()),
        final_point: x,
        burn_in_calls,
        oracle_calls: calls,
        warnings: Vec::new(),
        notes: vec![BURN_IN_NOTE.to_string()],
        theoretical: theory_for(cfg, n, oracle.enclosing_radius()),
        seconds: Some(st.clock.elapsed().as_secs_f64()),
    })
}

/// Covariance of `samples`, exposed for the experiment drivers.
pub fn sample_covariance(samples: &[Vector]) -> Result<DMatrix<f64>> {
    stats::covariance(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{ball_oracle, cube_oracle};

    fn unit(n: usize, i: usize) -> Vector {
        let mut c = Vector::zeros(n);
        c[i] = 1.0;
        c
    }

    #[test]
    fn zero_phases_returns_start_without_annealing_calls() {
        let o = ball_oracle(3, 1.0).unwrap();
        let mut cfg = AnnealerConfig::new(unit(3, 0), 4, 3, 7);
        cfg.phases = Some(0);
        let r = anneal_kv(&o, &cfg).unwrap();
        assert!(r.phases.is_empty());
        assert_eq!(r.oracle_calls, 0);
        assert!(r.burn_in_calls > 0);
        assert_eq!(r.final_point, r.initial_point);
        let h = anneal_heuristic(&o, &cfg).unwrap();
        assert_eq!(h.oracle_calls, 0);
        assert_eq!(h.final_point, h.initial_point);
    }

    #[test]
    fn heuristic_phase_count_matches_schedule() {
        let o = ball_oracle(4, 1.0).unwrap();
        let cfg = AnnealerConfig::new(unit(4, 1), 8, 8, 3);
        let r = anneal_heuristic(&o, &cfg).unwrap();
        let s = TemperatureSchedule::new(ScheduleKind::CombinedMin, 4, 1.0, 4.0, 4.0).unwrap();
        let last = s.first_phase_below(1e-3 * 0.1 / 4.0).unwrap();
        assert_eq!(r.phases.len(), last);
        for p in &r.phases {
            assert_eq!(p.temperature, s.temperature(p.k));
        }
        assert_eq!(r.final_objective, r.phases.last().unwrap().objective);
        assert!(r.final_objective < -0.99);
    }

    #[test]
    fn kv_runs_shifted_schedule_and_accounts_calls() {
        let o = ball_oracle(3, 1.0).unwrap();
        let mut cfg = AnnealerConfig::new(unit(3, 2), 6, 5, 11);
        cfg.phases = Some(4);
        let r = anneal_kv(&o, &cfg).unwrap();
        let s = TemperatureSchedule::new(ScheduleKind::AhType, 3, 1.0, 4.0, 3.0).unwrap();
        assert_eq!(r.phases.len(), 4);
        let mut prev = 0;
        for p in &r.phases {
            assert_eq!(p.temperature, s.temperature(p.k + 1));
            assert!(p.oracle_calls >= prev);
            assert_eq!(p.oracle_calls, prev + p.phase_calls);
            prev = p.oracle_calls;
            // (1 + N) walks of ℓ steps, each step costing two chord searches
            assert!(p.phase_calls >= 7 * 5 * 2);
        }
        assert_eq!(r.oracle_calls, prev);
        assert!(r
            .phases
            .iter()
            .all(|p| p.covariance_change.unwrap().is_finite()));
    }

    #[test]
    fn identical_seed_identical_report() {
        let o = cube_oracle(3).unwrap();
        let c = Vector::from_vec(vec![0.6, -0.8, 0.0]);
        let mut cfg = AnnealerConfig::new(c, 5, 4, 99);
        cfg.phases = Some(3);
        for f in [anneal_kv::<crate::oracle::CubeOracle>, anneal_heuristic] {
            let mut a = f(&o, &cfg).unwrap();
            let mut b = f(&o, &cfg).unwrap();
            a.strip_timing();
            b.strip_timing();
            assert_eq!(a, b);
            let (mut ca, mut cb) = (Vec::new(), Vec::new());
            a.write_csv(&mut ca, false).unwrap();
            b.write_csv(&mut cb, false).unwrap();
            assert_eq!(ca, cb);
        }
    }

    #[test]
    fn singular_covariance_falls_back_to_empirical() {
        // a single sample has zero covariance
        let o = ball_oracle(2, 1.0).unwrap();
        let mut cfg = AnnealerConfig::new(unit(2, 0), 1, 3, 5);
        cfg.phases = Some(1);
        let r = anneal_kv(&o, &cfg);
        // one centered sample is the zero vector, so no direction is left
        assert!(matches!(r, Err(Error::DegenerateDirections(_))));
        // two samples in three dimensions give a rank-one estimate
        let o = ball_oracle(3, 1.0).unwrap();
        let mut cfg = AnnealerConfig::new(unit(3, 0), 2, 3, 5);
        cfg.phases = Some(2);
        let r = anneal_kv(&o, &cfg).unwrap();
        assert_eq!(r.warnings.len(), 1);
        assert!(r.warnings[0].starts_with("phase 1:"));
        assert!(r.phases.iter().all(|p| o.test(p.sample_mean.as_slice())));
    }

    #[test]
    fn rejects_invalid_config() {
        let o = ball_oracle(2, 1.0).unwrap();
        let bad_norm = AnnealerConfig::new(Vector::from_vec(vec![1.0, 1.0]), 2, 2, 0);
        assert!(anneal_heuristic(&o, &bad_norm).is_err());
        let mut cfg = AnnealerConfig::new(unit(2, 0), 2, 2, 0);
        cfg.epsilon_bar = 3.0;
        assert!(anneal_kv(&o, &cfg).is_err());
        cfg.epsilon_bar = 1e-3;
        cfg.failure_prob = 1.0;
        assert!(anneal_kv(&o, &cfg).is_err());
        cfg.failure_prob = 0.1;
        cfg.n_samples = 0;
        assert!(anneal_kv(&o, &cfg).is_err());
        let wrong_dim = AnnealerConfig::new(unit(3, 0), 2, 2, 0);
        assert!(anneal_kv(&o, &wrong_dim).is_err());
    }

    #[test]
    fn report_serializes() {
        let o = ball_oracle(2, 1.0).unwrap();
        let mut cfg = AnnealerConfig::new(unit(2, 0), 3, 2, 1);
        cfg.phases = Some(2);
        cfg.inner_radius = Some(1.0);
        let r = anneal_heuristic(&o, &cfg).unwrap();
        let js: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(js["algorithm"], "heuristic");
        assert_eq!(js["phases"].as_array().unwrap().len(), 2);
        assert!(js["theoretical"]["ell"].is_string());
        let mut buf = Vec::new();
        r.write_csv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,temperature,objective,mean_objective,phase_calls,oracle_calls,covariance_change,seconds\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
