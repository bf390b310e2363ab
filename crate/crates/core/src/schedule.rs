//! Temperature schedules.
//!
//! All schedules start at `T₁ = R` and decay geometrically,
//! `T_k = R·βᵏ⁻¹`:
//!
//! * dimension-based: `β = 1 − 1/√n`;
//! * barrier-based: `β = 1 − 1/(α√ϑ)` with `α > 1 + 1/√ϑ`;
//! * combined: the smaller of the two temperatures at every `k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    KalaiVempala,
    AhType,
    CombinedMin,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "kalai_vempala" | "kv" => Ok(Self::KalaiVempala),
            "ah_type" | "ah" => Ok(Self::AhType),
            "combined_min" | "combined" => Ok(Self::CombinedMin),
            other => Err(Error::Parameter(format!("unknown schedule kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    pub kind: ScheduleKind,
    pub alpha: f64,
    pub vartheta: f64,
    pub n: usize,
    /// Starting temperature `T₁ = R`.
    pub t0: f64,
}

impl TemperatureSchedule {
    pub fn new(
        kind: ScheduleKind,
        n: usize,
        radius: f64,
        alpha: f64,
        vartheta: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("dimension must be >= 1".into()));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Parameter(
                "starting temperature must be positive".into(),
            ));
        }
        if kind != ScheduleKind::KalaiVempala {
            if !(vartheta > 0.0) || !vartheta.is_finite() {
                return Err(Error::Parameter("vartheta must be positive".into()));
            }
            let bound = 1.0 + 1.0 / vartheta.sqrt();
            if !(alpha > bound) || !alpha.is_finite() {
                return Err(Error::Parameter(format!(
                    "alpha = {alpha} must exceed 1 + 1/sqrt(vartheta) = {bound}"
                )));
            }
        }
        if kind != ScheduleKind::AhType && n < 2 {
            return Err(Error::Parameter(
                "the dimension-based rate 1 - 1/sqrt(n) needs n >= 2".into(),
            ));
        }
        Ok(Self {
            kind,
            alpha,
            vartheta,
            n,
            t0: radius,
        })
    }

    /// `1 − 1/√n`.
    pub fn kv_rate(&self) -> f64 {
        1.0 - 1.0 / (self.n as f64).sqrt()
    }

    /// `1 − 1/(α√ϑ)`.
    pub fn ah_rate(&self) -> f64 {
        1.0 - 1.0 / (self.alpha * self.vartheta.sqrt())
    }

    /// Per-phase decay factor; for the combined schedule, the faster one.
    pub fn rate(&self) -> f64 {
        match self.kind {
            ScheduleKind::KalaiVempala => self.kv_rate(),
            ScheduleKind::AhType => self.ah_rate(),
            ScheduleKind::CombinedMin => self.kv_rate().min(self.ah_rate()),
        }
    }

    /// `T_k = R·βᵏ⁻¹` for `k ≥ 1`.
    pub fn temperature(&self, k: usize) -> f64 {
        assert!(k >= 1, "temperatures are indexed from 1");
        let e = (k - 1) as i32;
        match self.kind {
            ScheduleKind::KalaiVempala => self.t0 * self.kv_rate().powi(e),
            ScheduleKind::AhType => self.t0 * self.ah_rate().powi(e),
            ScheduleKind::CombinedMin => {
                (self.t0 * self.kv_rate().powi(e)).min(self.t0 * self.ah_rate().powi(e))
            }
        }
    }

    /// Smallest `k ≥ 1` with `T_k ≤ bound`.
    pub fn first_phase_below(&self, bound: f64) -> Result<usize> {
        if !(bound > 0.0) {
            return Err(Error::Parameter(
                "temperature bound must be positive".into(),
            ));
        }
        let mut k = 1;
        while self.temperature(k) > bound {
            k += 1;
            if k > i32::MAX as usize {
                return Err(Error::Numerical("temperature bound unreachable".into()));
            }
        }
        Ok(k)
    }
}

/// `T_k` of `schedule`; `k ≥ 1`.
pub fn next_temperature(schedule: &TemperatureSchedule, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Parameter("phase index starts at 1".into()));
    }
    Ok(schedule.temperature(k))
}
