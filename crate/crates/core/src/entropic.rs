//! Directional moments of the Boltzmann family on the Euclidean unit ball
//! and the quadratic form `⟨θ, H(θ)θ⟩` that governs the entropic barrier
//! parameter.
//!
//! By rotational symmetry only `s = ‖θ‖` matters. With `y = cos φ` the
//! density of the first coordinate becomes `sinⁿφ · e^{s(cos φ − 1)}` on
//! `[0, π]`; the factor `e^{−s}` keeps every integrand in `[0, 1]`.
//! Centered quantities are computed in `u = 1 − cos φ = 2sin²(φ/2)`, which
//! avoids cancellation when the mass sits near `y = 1`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadConfig};

/// Default relative tolerance for every integral.
pub const DEFAULT_REL_TOL: f64 = 1e-12;
/// Default grid: this many log-spaced points on `[1e-2, s_max]`.
pub const DEFAULT_GRID_SIZE: usize = 200;
pub const DEFAULT_S_MIN: f64 = 1e-2;
pub const DEFAULT_S_MAX: f64 = 1e3;

fn check(n: usize, s: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::Parameter("dimension must be >= 1".into()));
    }
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::Parameter(format!("s = {s} must be finite and >= 0")));
    }
    Ok(())
}

fn cfg_with(rel_tol: f64) -> QuadConfig {
    QuadConfig {
        abs_tol: 0.0,
        rel_tol,
        max_intervals: 4000,
    }
}

/// `∫₀^π g(u(φ)) sinⁿφ e^{−s·u(φ)} dφ`, split where the weight concentrates.
fn weighted(n: usize, s: f64, g: impl Fn(f64) -> f64, cfg: &QuadConfig) -> Result<f64> {
    let f = |phi: f64| {
        let h = (0.5 * phi).sin();
        let u = 2.0 * h * h;
        g(u) * phi.sin().powi(n as i32) * (-s * u).exp()
    };
    let mut cuts = vec![0.0];
    if s > 1.0 {
        let w = ((n as f64) / s).sqrt();
        for k in [1.0, 4.0, 16.0] {
            let c = k * w;
            if c < std::f64::consts::PI {
                cuts.push(c);
            }
        }
    }
    cuts.push(std::f64::consts::PI);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integrate(f, w[0], w[1], cfg)?.value;
    }
    Ok(total)
}

/// Mean and variance of `u = 1 − y₁`.
fn u_mean_var(n: usize, s: f64, rel_tol: f64) -> Result<(f64, f64)> {
    let cfg = cfg_with(rel_tol);
    let z = weighted(n, s, |_| 1.0, &cfg)?;
    if !(z > 0.0) {
        return Err(Error::Numerical(format!(
            "normalizer vanished at n={n}, s={s}"
        )));
    }
    let mu = weighted(n, s, |u| u, &cfg)? / z;
    let var = weighted(n, s, |u| (u - mu) * (u - mu), &cfg)? / z;
    Ok((mu, var))
}

/// Unscaled moment `E[y₁ᵏ]` under the density `∝ e^{s y₁}` on the ball.
pub fn directional_moment(n: usize, s: f64, k: u32) -> Result<f64> {
    check(n, s)?;
    let cfg = cfg_with(DEFAULT_REL_TOL);
    let z = weighted(n, s, |_| 1.0, &cfg)?;
    // odd moments vanish at s = 0, so the numerator needs an absolute floor
    let num_cfg = QuadConfig {
        abs_tol: 1e-15 * z,
        ..cfg
    };
    let num = weighted(n, s, |u| (1.0 - u).powi(k as i32), &num_cfg)?;
    Ok(num / z)
}

/// `E[(s y₁)^power]` for `power ∈ {1, 2}`.
pub fn ball_moment(n: usize, s: f64, power: u32) -> Result<f64> {
    check(n, s)?;
    let (mu, var) = u_mean_var(n, s, DEFAULT_REL_TOL)?;
    let m1 = 1.0 - mu;
    match power {
        1 => Ok(s * m1),
        2 => Ok(s * s * (var + m1 * m1)),
        _ => Err(Error::Parameter(format!(
            "power must be 1 or 2, got {power}"
        ))),
    }
}

/// `⟨θ, H(θ)θ⟩ = Var(⟨θ, X⟩)` at `‖θ‖ = s`.
pub fn theta_quadratic_form(n: usize, s: f64) -> Result<f64> {
    theta_quadratic_form_tol(n, s, DEFAULT_REL_TOL)
}

/// As [`theta_quadratic_form`] with an explicit relative quadrature tolerance.
pub fn theta_quadratic_form_tol(n: usize, s: f64, rel_tol: f64) -> Result<f64> {
    check(n, s)?;
    if s == 0.0 {
        return Ok(0.0);
    }
    let (_, var) = u_mean_var(n, s, rel_tol)?;
    Ok(s * s * var)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaProfile {
    pub n: usize,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub sup: f64,
}

impl ThetaProfile {
    /// Grid point attaining the sup.
    pub fn argmax(&self) -> f64 {
        self.grid
            .iter()
            .zip(&self.values)
            .fold((f64::NAN, f64::NEG_INFINITY), |acc, (&s, &v)| {
                if v > acc.1 {
                    (s, v)
                } else {
                    acc
                }
            })
            .0
    }

    /// `(n, s, value)` rows with a header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "s", "value"])?;
        for (s, v) in self.grid.iter().zip(&self.values) {
            wr.write_record([self.n.to_string(), format!("{s:e}"), format!("{v:e}")])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `grid_size` log-spaced points on `[min(1e-2, s_max), s_max]`.
pub fn log_grid(s_max: f64, grid_size: usize) -> Result<Vec<f64>> {
    if !(s_max > 0.0) || !s_max.is_finite() {
        return Err(Error::Parameter("s_max must be positive".into()));
    }
    if grid_size == 0 {
        return Err(Error::Parameter("grid needs at least one point".into()));
    }
    if grid_size == 1 {
        return Ok(vec![s_max]);
    }
    let lo = DEFAULT_S_MIN.min(s_max);
    let (a, b) = (lo.ln(), s_max.ln());
    Ok((0..grid_size)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == grid_size {
                s_max
            } else {
                (a + (b - a) * i as f64 / (grid_size - 1) as f64).exp()
            }
        })
        .collect())
}

pub fn theta_profile(n: usize, s_max: f64, grid_size: usize) -> Result<ThetaProfile> {
    theta_profile_on(n, &log_grid(s_max, grid_size)?)
}

/// Profile on an explicit grid; points are evaluated in parallel.
pub fn theta_profile_on(n: usize, grid: &[f64]) -> Result<ThetaProfile> {
    if grid.is_empty() {
        return Err(Error::Parameter("grid needs at least one point".into()));
    }
    let values = grid
        .par_iter()
        .map(|&s| theta_quadratic_form(n, s))
        .collect::<Result<Vec<_>>>()?;
    let sup = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ThetaProfile {
        n,
        grid: grid.to_vec(),
        values,
        sup,
    })
}
