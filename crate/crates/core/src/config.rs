//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are case
//! sensitive; `N` and `samples` are synonyms, as are `eps_bar` and
//! `epsilon_bar`. Unknown or repeated keys are errors.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ellipsoid::{
    BallSeparator, CopositiveCapSeparator, CubeSeparator, DnnSeparator, Separator,
};
use crate::error::{Error, Result};
use crate::oracle::{
    ball_oracle, copositive_cap_oracle, cube_oracle, dnn_oracle, MembershipOracle, COPOSITIVE_TOL,
};
use crate::schedule::ScheduleKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    /// Unit ball in `ℝⁿ`.
    Ball,
    /// `[0,1]ⁿ`.
    Cube,
    /// Doubly nonnegative `m×m` matrices in the unit ball.
    Dnn,
    /// Copositive `m×m` matrices in the unit ball.
    CopositiveCap,
}

impl FromStr for OracleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "ball" => Ok(Self::Ball),
            "cube" => Ok(Self::Cube),
            "dnn" => Ok(Self::Dnn),
            "copositive_cap" | "copositive" | "cop" => Ok(Self::CopositiveCap),
            other => Err(Error::Parse(format!("unknown oracle kind '{other}'"))),
        }
    }
}

impl OracleKind {
    /// Whether `size` is a matrix order `m` (otherwise a dimension `n`).
    pub fn is_matrix(self) -> bool {
        matches!(self, Self::Dnn | Self::CopositiveCap)
    }

    /// Builds the oracle; `size` is `n` for vector bodies and `m` for matrix
    /// bodies.
    pub fn build(self, size: usize) -> Result<Box<dyn MembershipOracle + Send>> {
        Ok(match self {
            Self::Ball => Box::new(ball_oracle(size, 1.0)?),
            Self::Cube => Box::new(cube_oracle(size)?),
            Self::Dnn => Box::new(dnn_oracle(size, None)?),
            Self::CopositiveCap => Box::new(copositive_cap_oracle(size, COPOSITIVE_TOL)?),
        })
    }

    /// Separation oracle for the same body, with its enclosing radius.
    pub fn separator(self, size: usize) -> Result<(Box<dyn Separator>, f64)> {
        Ok(match self {
            Self::Ball => (
                Box::new(BallSeparator {
                    n: size,
                    radius: 1.0,
                }),
                1.0,
            ),
            Self::Cube => (Box::new(CubeSeparator { n: size }), (size as f64).sqrt()),
            Self::Dnn => (Box::new(DnnSeparator::new(size)?), 1.0),
            Self::CopositiveCap => (
                Box::new(CopositiveCapSeparator::new(size, COPOSITIVE_TOL)?),
                1.0,
            ),
        })
    }
}

/// Every field is optional; command-line flags fill or override them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Matrix file whose first block is the objective `Y` (normalized).
    pub objective: Option<PathBuf>,
    pub oracle: Option<OracleKind>,
    pub schedule: Option<ScheduleKind>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub vartheta: Option<f64>,
    pub epsilon_bar: Option<f64>,
    pub p: Option<f64>,
    pub samples: Option<usize>,
    pub ell: Option<usize>,
    pub seed: Option<u64>,
    pub phases: Option<usize>,
}

fn parse_value<T: FromStr>(key: &str, raw: &str, lineno: usize) -> Result<T> {
    raw.parse::<T>()
        .map_err(|_| Error::Parse(format!("line {lineno}: bad value '{raw}' for '{key}'")))
}

fn set_once<T>(slot: &mut Option<T>, value: T, key: &str, lineno: usize) -> Result<()> {
    if slot.is_some() {
        return Err(Error::Parse(format!("line {lineno}: '{key}' given twice")));
    }
    *slot = Some(value);
    Ok(())
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (key, raw) = t
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {lineno}: expected 'key = value'")))?;
            let (key, raw) = (key.trim(), raw.trim());
            match key {
                "objective" => set_once(&mut cfg.objective, PathBuf::from(raw), key, lineno)?,
                "oracle" => set_once(&mut cfg.oracle, parse_value(key, raw, lineno)?, key, lineno)?,
                "schedule" => set_once(
                    &mut cfg.schedule,
                    parse_value(key, raw, lineno)?,
                    key,
                    lineno,
                )?,
                "m" => set_once(&mut cfg.m, parse_value(key, raw, lineno)?, key, lineno)?,
                "n" => set_once(&mut cfg.n, parse_value(key, raw, lineno)?, key, lineno)?,
                "alpha" => set_once(&mut cfg.alpha, parse_value(key, raw, lineno)?, key, lineno)?,
                "vartheta" => set_once(
                    &mut cfg.vartheta,
                    parse_value(key, raw, lineno)?,
                    key,
                    lineno,
                )?,
                "eps_bar" | "epsilon_bar" => set_once(
                    &mut cfg.epsilon_bar,
                    parse_value(key, raw, lineno)?,
                    key,
                    lineno,
                )?,
                "p" => set_once(&mut cfg.p, parse_value(key, raw, lineno)?, key, lineno)?,
                "N" | "samples" => set_once(
                    &mut cfg.samples,
                    parse_value(key, raw, lineno)?,
                    key,
                    lineno,
                )?,
                "ell" => set_once(&mut cfg.ell, parse_value(key, raw, lineno)?, key, lineno)?,
                "seed" => set_once(&mut cfg.seed, parse_value(key, raw, lineno)?, key, lineno)?,
                "phases" => set_once(&mut cfg.phases, parse_value(key, raw, lineno)?, key, lineno)?,
                other => {
                    return Err(Error::Parse(format!(
                        "line {lineno}: unknown key '{other}'"
                    )))
                }
            }
        }
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(&self, over: &RunConfig) -> RunConfig {
        fn pick<T: Clone>(base: &Option<T>, over: &Option<T>) -> Option<T> {
            over.clone().or_else(|| base.clone())
        }
        RunConfig {
            objective: pick(&self.objective, &over.objective),
            oracle: pick(&self.oracle, &over.oracle),
            schedule: pick(&self.schedule, &over.schedule),
            m: pick(&self.m, &over.m),
            n: pick(&self.n, &over.n),
            alpha: pick(&self.alpha, &over.alpha),
            vartheta: pick(&self.vartheta, &over.vartheta),
            epsilon_bar: pick(&self.epsilon_bar, &over.epsilon_bar),
            p: pick(&self.p, &over.p),
            samples: pick(&self.samples, &over.samples),
            ell: pick(&self.ell, &over.ell),
            seed: pick(&self.seed, &over.seed),
            phases: pick(&self.phases, &over.phases),
        }
    }
}
