//! Membership oracles for convex bodies.
//!
//! Every oracle knows its dimension, a radius `R` such that the body lies in
//! the Euclidean ball of radius `R` about the origin, and a point strictly
//! inside the body. Queries through [`MembershipOracle::contains`] are counted
//! with an atomic counter so many walks can share one oracle.
//!
//! Bodies are closed: boundary points count as inside.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::copositive::CopositivityTester;
use crate::error::{Error, Result};
use crate::linalg::{self, smat_unchecked, svec, svec_len, SymMatrix, Vector};

/// Thread-safe query counter.
#[derive(Debug, Default)]
pub struct CallCounter(AtomicU64);

impl CallCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}

impl Clone for CallCounter {
    fn clone(&self) -> Self {
        Self(AtomicU64::new(self.get()))
    }
}

/// A convex body given by a membership test.
pub trait MembershipOracle: Sync {
    fn dim(&self) -> usize;

    /// Radius of a Euclidean ball about the origin containing the body.
    fn enclosing_radius(&self) -> f64;

    /// A point strictly inside the body.
    fn interior_point(&self) -> Vector;

    /// Geometric test without accounting; `x.len()` must equal `dim()`.
    fn test(&self, x: &[f64]) -> bool;

    fn counter(&self) -> &CallCounter;

    /// Counted membership query.
    #[inline]
    fn contains(&self, x: &[f64]) -> bool {
        self.counter().bump();
        self.test(x)
    }

    /// Counted query with a dimension check.
    fn query(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.contains(x))
    }

    fn call_count(&self) -> u64 {
        self.counter().get()
    }
}

/// Euclidean ball of radius `R` about the origin.
#[derive(Debug, Clone)]
pub struct BallOracle {
    dim: usize,
    radius: f64,
    calls: CallCounter,
}

/// `{x : ‖x‖ ≤ R}`.
pub fn ball_oracle(n: usize, radius: f64) -> Result<BallOracle> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Parameter("ball radius must be positive".into()));
    }
    if n == 0 {
        return Err(Error::Parameter("dimension must be >= 1".into()));
    }
    Ok(BallOracle {
        dim: n,
        radius,
        calls: CallCounter::new(),
    })
}

impl MembershipOracle for BallOracle {
    fn dim(&self) -> usize {
        self.dim
    }
    fn enclosing_radius(&self) -> f64 {
        self.radius
    }
    fn interior_point(&self) -> Vector {
        Vector::zeros(self.dim)
    }
    fn test(&self, x: &[f64]) -> bool {
        linalg::dot(x, x) <= self.radius * self.radius
    }
    fn counter(&self) -> &CallCounter {
        &self.calls
    }
}

/// Unit hypercube `[0, 1]ⁿ`.
#[derive(Debug, Clone)]
pub struct CubeOracle {
    dim: usize,
    calls: CallCounter,
}

pub fn cube_oracle(n: usize) -> Result<CubeOracle> {
    if n == 0 {
        return Err(Error::Parameter("dimension must be >= 1".into()));
    }
    Ok(CubeOracle {
        dim: n,
        calls: CallCounter::new(),
    })
}

impl MembershipOracle for CubeOracle {
    fn dim(&self) -> usize {
        self.dim
    }
    fn enclosing_radius(&self) -> f64 {
        (self.dim as f64).sqrt()
    }
    fn interior_point(&self) -> Vector {
        Vector::from_element(self.dim, 0.5)
    }
    fn test(&self, x: &[f64]) -> bool {
        x.iter().all(|&v| (0.0..=1.0).contains(&v))
    }
    fn counter(&self) -> &CallCounter {
        &self.calls
    }
}

/// Doubly-nonnegative feasible set in `svec` coordinates:
/// `x ≥ 0`, `Σᵢⱼ smat(x)ᵢⱼ ≤ 1`, `smat(x) ⪰ 0`.
///
/// The set lies in the unit ball: for `x ≥ 0`,
/// `‖x‖₂ ≤ ‖x‖₁ ≤ Σᵢ xᵢᵢ + √2·Σ_{i<j} xᵢⱼ = Σᵢⱼ smat(x)ᵢⱼ ≤ 1`,
/// so `R = 1`. A query costs one `O(m³)` shifted Cholesky factorization.
#[derive(Debug, Clone)]
pub struct DnnOracle {
    order: usize,
    /// PSD tolerance; `None` selects `1e-9·(1 + ‖smat x‖_F)` per query.
    psd_tol: Option<f64>,
    sum_weights: Vec<f64>,
    calls: CallCounter,
}

pub fn dnn_oracle(m: usize, psd_tol: Option<f64>) -> Result<DnnOracle> {
    if m == 0 {
        return Err(Error::Parameter("matrix order must be >= 1".into()));
    }
    if let Some(t) = psd_tol {
        if !(t >= 0.0) {
            return Err(Error::Parameter("PSD tolerance must be >= 0".into()));
        }
    }
    Ok(DnnOracle {
        order: m,
        psd_tol,
        sum_weights: svec(&SymMatrix::ones(m)).iter().copied().collect(),
        calls: CallCounter::new(),
    })
}

impl DnnOracle {
    pub fn order(&self) -> usize {
        self.order
    }

    /// `w` with `⟨w, x⟩ = Σᵢⱼ smat(x)ᵢⱼ`, i.e. `svec(J)`.
    pub fn sum_weights(&self) -> &[f64] {
        &self.sum_weights
    }

    pub fn psd_tol_for(&self, a: &SymMatrix) -> f64 {
        self.psd_tol.unwrap_or_else(|| linalg::default_psd_tol(a))
    }
}

/// `svec(mI + J) / (2 eᵀ svec(mI + J))`.
pub fn dnn_start_point(m: usize) -> Vector {
    let base = SymMatrix::identity(m)
        .scaled(m as f64)
        .add(&SymMatrix::ones(m));
    let v = svec(&base);
    let total = v.sum();
    v / (2.0 * total)
}

impl MembershipOracle for DnnOracle {
    fn dim(&self) -> usize {
        svec_len(self.order)
    }
    fn enclosing_radius(&self) -> f64 {
        1.0
    }
    fn interior_point(&self) -> Vector {
        dnn_start_point(self.order)
    }
    fn test(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        if x.iter().any(|&v| !(v >= 0.0)) {
            return false;
        }
        if linalg::dot(&self.sum_weights, x) > 1.0 {
            return false;
        }
        let a = smat_unchecked(x, self.order);
        let tol = self.psd_tol_for(&a);
        linalg::is_psd_shifted_cholesky(&a, tol)
    }
    fn counter(&self) -> &CallCounter {
        &self.calls
    }
}

/// Default tolerance of the copositivity test inside membership oracles.
pub const COPOSITIVE_TOL: f64 = 1e-10;

/// `{x : ‖x‖ ≤ 1, smat(x) copositive}`.
#[derive(Debug, Clone)]
pub struct CopositiveCapOracle {
    tester: CopositivityTester,
    tol: f64,
    calls: CallCounter,
}

pub fn copositive_cap_oracle(m: usize, tol: f64) -> Result<CopositiveCapOracle> {
    if !(tol >= 0.0) {
        return Err(Error::Parameter(
            "copositivity tolerance must be >= 0".into(),
        ));
    }
    Ok(CopositiveCapOracle {
        tester: CopositivityTester::new(m)?,
        tol,
        calls: CallCounter::new(),
    })
}

impl CopositiveCapOracle {
    pub fn order(&self) -> usize {
        self.tester.order()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }
}

impl MembershipOracle for CopositiveCapOracle {
    fn dim(&self) -> usize {
        svec_len(self.order())
    }
    fn enclosing_radius(&self) -> f64 {
        1.0
    }
    /// `svec(I)/(m+1)`: strictly copositive with norm `√m/(m+1) < 1`.
    fn interior_point(&self) -> Vector {
        let m = self.order();
        svec(&SymMatrix::identity(m)) / (m as f64 + 1.0)
    }
    fn test(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        if linalg::dot(x, x) > 1.0 {
            return false;
        }
        let a = smat_unchecked(x, self.order());
        self.tester.is_member(&a, self.tol)
    }
    fn counter(&self) -> &CallCounter {
        &self.calls
    }
}
