//! Simulated annealing for linear optimization over convex bodies that are
//! only accessible through a membership oracle.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: packed symmetric matrices, the `svec`/`smat` isometry and
//!   PSD tests.
//! * [`oracle`] and [`copositive`]: membership oracles (ball, cube,
//!   doubly-nonnegative set, copositive cap) and an exact copositivity test
//!   that returns a separating witness.
//! * [`hit_and_run`]: hit-and-run sampling of Boltzmann densities
//!   `x ↦ exp(⟨θ, x⟩)` restricted to a body.
//! * [`schedule`] and [`theory`]: temperature schedules and the
//!   extended-precision calculators for the theoretical phase count, sample
//!   size, total-variation budget and walk length.
//! * [`anneal`]: the covariance-adaptive annealer and the heuristic annealer
//!   that reuses centered samples as directions.
//! * [`ellipsoid`]: central-cut ellipsoid baseline with separation oracles.
//! * [`entropic`]: quadrature of `⟨θ, H(θ)θ⟩` for the Euclidean ball.
//! * [`experiments`]: instance generators, fixtures and the experiment
//!   drivers behind the CLI.

pub mod anneal;
pub mod config;
pub mod copositive;
pub mod ellipsoid;
pub mod entropic;
pub mod error;
pub mod experiments;
pub mod hit_and_run;
pub mod linalg;
pub mod oracle;
pub mod quadrature;
pub mod schedule;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};
