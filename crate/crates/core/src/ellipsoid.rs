//! Central-cut ellipsoid method for `min ⟨c, x⟩` over a body given by a
//! separation oracle.
//!
//! The ellipsoid is `{y : (y − x)ᵀE⁻¹(y − x) ≤ 1}`. A cut `g` keeps the half
//! `⟨g, y⟩ ≤ ⟨g, x⟩`; with `b = Eg/√(gᵀEg)` the update is
//! `x' = x − b/(n+1)`, `E' = n²/(n²−1)·(E − 2/(n+1)·bbᵀ)`.

use std::io::Write;

use serde::Serialize;

use crate::copositive::is_copositive;
use crate::error::{param, Error, Result};
use crate::linalg::{self, smat_unchecked, svec, svec_len, SymMatrix, Vector};
use crate::DMatrix;

/// Answer of a separation oracle at a query point `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum Separation {
    Feasible,
    /// Every feasible `y` satisfies `⟨g, y⟩ ≤ ⟨g, x⟩`.
    Violated(Vector),
}

pub trait Separator {
    fn dim(&self) -> usize;
    fn separate(&self, x: &[f64]) -> Separation;
}

/// Euclidean ball of radius `radius` about the origin.
#[derive(Debug, Clone)]
pub struct BallSeparator {
    pub n: usize,
    pub radius: f64,
}

impl Separator for BallSeparator {
    fn dim(&self) -> usize {
        self.n
    }
    fn separate(&self, x: &[f64]) -> Separation {
        if linalg::norm(x) > self.radius {
            Separation::Violated(Vector::from_column_slice(x))
        } else {
            Separation::Feasible
        }
    }
}

/// Unit cube `[0, 1]ⁿ`.
#[derive(Debug, Clone)]
pub struct CubeSeparator {
    pub n: usize,
}

impl Separator for CubeSeparator {
    fn dim(&self) -> usize {
        self.n
    }
    fn separate(&self, x: &[f64]) -> Separation {
        for (i, &v) in x.iter().enumerate() {
            if v < 0.0 || v > 1.0 {
                let mut g = Vector::zeros(self.n);
                g[i] = if v < 0.0 { -1.0 } else { 1.0 };
                return Separation::Violated(g);
            }
        }
        Separation::Feasible
    }
}

/// `{x : ‖x‖ ≤ 1, smat(x) copositive}`.
#[derive(Debug, Clone)]
pub struct CopositiveCapSeparator {
    order: usize,
    tol: f64,
}

impl CopositiveCapSeparator {
    pub fn new(order: usize, tol: f64) -> Result<Self> {
        if order == 0 || order > crate::copositive::MAX_ORDER {
            return Err(param(format!("unsupported matrix order {order}")));
        }
        if !(tol >= 0.0) {
            return Err(param("copositivity tolerance must be >= 0"));
        }
        Ok(Self { order, tol })
    }
}

impl Separator for CopositiveCapSeparator {
    fn dim(&self) -> usize {
        svec_len(self.order)
    }
    fn separate(&self, x: &[f64]) -> Separation {
        if linalg::dot(x, x) > 1.0 {
            return Separation::Violated(Vector::from_column_slice(x));
        }
        let a = smat_unchecked(x, self.order);
        match is_copositive(&a, self.tol) {
            Ok(cert) if !cert.is_copositive => Separation::Violated(-svec(&cert.witness_outer())),
            Ok(_) => Separation::Feasible,
            // non-finite entries cannot occur for a finite center
            Err(_) => Separation::Violated(Vector::from_column_slice(x)),
        }
    }
}

/// `{x : x ≥ 0, ⟨J, smat x⟩ ≤ 1, smat(x) ⪰ 0}`.
#[derive(Debug, Clone)]
pub struct DnnSeparator {
    order: usize,
    sum_weights: Vector,
}

impl DnnSeparator {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(param("matrix order must be >= 1"));
        }
        Ok(Self {
            order,
            sum_weights: svec(&SymMatrix::ones(order)),
        })
    }
}

impl Separator for DnnSeparator {
    fn dim(&self) -> usize {
        svec_len(self.order)
    }
    fn separate(&self, x: &[f64]) -> Separation {
        let n = self.dim();
        if let Some((i, _)) = x
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < 0.0)
            .min_by(|a, b| a.1.total_cmp(b.1))
        {
            let mut g = Vector::zeros(n);
            g[i] = -1.0;
            return Separation::Violated(g);
        }
        if linalg::dot(self.sum_weights.as_slice(), x) > 1.0 {
            return Separation::Violated(self.sum_weights.clone());
        }
        let a = smat_unchecked(x, self.order).to_dense();
        let eig = a.symmetric_eigen();
        let (imin, &lmin) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("order >= 1");
        if lmin < 0.0 {
            let v: Vec<f64> = eig.eigenvectors.column(imin).iter().copied().collect();
            return Separation::Violated(-svec(&SymMatrix::outer(&v)));
        }
        Separation::Feasible
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CutKind {
    Feasibility,
    Objective,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub cut: CutKind,
    /// Best feasible value so far; `+∞` before the first feasible center.
    pub best_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipsoidConfig {
    pub radius: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub trace: bool,
}

impl EllipsoidConfig {
    pub fn new(radius: f64, tol: f64) -> Self {
        Self {
            radius,
            tol,
            max_iters: 1_000_000,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipsoidResult {
    #[serde(with = "crate::linalg::vector_serde")]
    pub point: Vector,
    pub value: f64,
    /// Separation-oracle invocations.
    pub oracle_calls: u64,
    pub iterations: usize,
    pub converged: bool,
    /// `√(cᵀEc)` at termination.
    pub gap_bound: f64,
    pub repairs: usize,
    pub trace: Vec<TraceRow>,
}

impl EllipsoidResult {
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["iteration", "cut", "best_value"])?;
        for t in &self.trace {
            let cut = match t.cut {
                CutKind::Feasibility => "feasibility",
                CutKind::Objective => "objective",
            };
            wr.write_record([
                t.iteration.to_string(),
                cut.to_string(),
                format!("{:e}", t.best_value),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Symmetrizes `e` and lifts its eigenvalues to `1e-14·λ_max`.
pub fn repair_shape(e: &mut DMatrix<f64>) {
    let sym = (&*e + e.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let floor = 1e-14 * top.max(f64::MIN_POSITIVE);
    let lam = eig.eigenvalues.map(|v| v.max(floor));
    let q = &eig.eigenvectors;
    *e = q * DMatrix::from_diagonal(&lam) * q.transpose();
}

/// One central cut. Returns `false` (leaving the state untouched) when
/// `gᵀEg` is not positive.
pub fn central_cut(x: &mut Vector, e: &mut DMatrix<f64>, g: &Vector) -> bool {
    let n = x.len() as f64;
    let eg = &*e * g;
    let geg = g.dot(&eg);
    if !(geg > 0.0) || !geg.is_finite() {
        return false;
    }
    let b = eg / geg.sqrt();
    x.axpy(-1.0 / (n + 1.0), &b, 1.0);
    let scale = n * n / (n * n - 1.0);
    e.ger(-2.0 / (n + 1.0), &b, &b, 1.0);
    *e *= scale;
    true
}

/// `min ⟨c, x⟩` over the body described by `sep`, starting from the ball of
/// radius `R`. Stops when `√(cᵀEc) ≤ tol` after a feasible center has been
/// seen, or after `max_iters` cuts.
pub fn ellipsoid_minimize<S: Separator + ?Sized>(
    c: &Vector,
    sep: &S,
    cfg: &EllipsoidConfig,
) -> Result<EllipsoidResult> {
    let n = sep.dim();
    if c.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: c.len(),
        });
    }
    if n < 2 {
        return Err(param("the central-cut update needs dimension >= 2"));
    }
    if !(cfg.radius > 0.0) || !(cfg.tol > 0.0) {
        return Err(param("radius and tolerance must be positive"));
    }
    if c.norm() == 0.0 {
        return Err(param("objective must be nonzero"));
    }
    let mut x = Vector::zeros(n);
    let mut e = DMatrix::<f64>::identity(n, n) * (cfg.radius * cfg.radius);
    let mut best: Option<(Vector, f64)> = None;
    let mut calls = 0u64;
    let mut repairs = 0;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let repair_every = 50 * n;
    loop {
        let gap = c.dot(&(&e * c)).max(0.0).sqrt();
        if best.is_some() && gap <= cfg.tol {
            // the last center has not been examined yet
            calls += 1;
            if sep.separate(x.as_slice()) == Separation::Feasible {
                let v = c.dot(&x);
                if best.as_ref().map_or(true, |(_, b)| v < *b) {
                    best = Some((x.clone(), v));
                }
            }
            converged = true;
            break;
        }
        if iterations >= cfg.max_iters {
            break;
        }
        iterations += 1;
        calls += 1;
        let (g, kind) = match sep.separate(x.as_slice()) {
            Separation::Violated(g) => (g, CutKind::Feasibility),
            Separation::Feasible => {
                let v = c.dot(&x);
                if best.as_ref().map_or(true, |(_, b)| v < *b) {
                    best = Some((x.clone(), v));
                }
                (c.clone(), CutKind::Objective)
            }
        };
        if !central_cut(&mut x, &mut e, &g) {
            repair_shape(&mut e);
            repairs += 1;
            if !central_cut(&mut x, &mut e, &g) {
                return Err(Error::Numerical(format!(
                    "ellipsoid degenerated at iteration {iterations}"
                )));
            }
        }
        if iterations % repair_every == 0 {
            repair_shape(&mut e);
            repairs += 1;
        }
        if cfg.trace {
            trace.push(TraceRow {
                iteration: iterations,
                cut: kind,
                best_value: best.as_ref().map_or(f64::INFINITY, |b| b.1),
            });
        }
    }
    let (point, value) = best.ok_or(Error::Infeasible)?;
    let gap_bound = c.dot(&(&e * c)).max(0.0).sqrt();
    Ok(EllipsoidResult {
        point,
        value,
        oracle_calls: calls,
        iterations,
        converged,
        gap_bound,
        repairs,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{copositive_cap_oracle, MembershipOracle, COPOSITIVE_TOL};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn minimizes_over_ball() {
        let c = Vector::from_vec(vec![1.0, 0.0]);
        let sep = BallSeparator { n: 2, radius: 1.0 };
        let r = ellipsoid_minimize(&c, &sep, &EllipsoidConfig::new(1.0, 1e-4)).unwrap();
        assert!(r.converged);
        assert!((r.value + 1.0).abs() <= 1e-4, "{r:?}");
        assert!(r.point.norm() <= 1.0);
    }

    #[test]
    fn minimizes_over_cube() {
        let c = Vector::from_vec(vec![1.0, 1.0]);
        let sep = CubeSeparator { n: 2 };
        let cfg = EllipsoidConfig::new(2f64.sqrt(), 1e-4);
        let r = ellipsoid_minimize(&c, &sep, &cfg).unwrap();
        assert!(r.value >= 0.0 && r.value <= 1e-4);
    }

    #[test]
    fn copositive_cap_cuts() {
        let m = 3;
        let sep = CopositiveCapSeparator::new(m, COPOSITIVE_TOL).unwrap();
        let inner = svec(&SymMatrix::identity(m)) / (m as f64 + 1.0);
        assert_eq!(sep.separate(inner.as_slice()), Separation::Feasible);
        let outer = svec(&SymMatrix::identity(m)) * (2.0 / (m as f64).sqrt());
        assert_eq!(
            sep.separate(outer.as_slice()),
            Separation::Violated(outer.clone())
        );

        let sep2 = CopositiveCapSeparator::new(2, COPOSITIVE_TOL).unwrap();
        let a = SymMatrix::from_rows(&[vec![1.0, -2.0], vec![-2.0, 1.0]]).unwrap();
        // ‖svec(a)‖ = √10, so a/3 would trip the norm cut first
        let x = svec(&a) / 3.0;
        assert_eq!(sep2.separate(x.as_slice()), Separation::Violated(x.clone()));
        let x = svec(&a) / 4.0;
        let Separation::Violated(g) = sep2.separate(x.as_slice()) else {
            panic!("expected a copositivity cut");
        };
        let expect = -svec(&SymMatrix::outer(&[0.5, 0.5]));
        assert!((&g - &expect).norm() < 1e-12, "{g} vs {expect}");
    }

    #[test]
    fn feasibility_cuts_are_valid() {
        let m = 3;
        let n = svec_len(m);
        let sep = CopositiveCapSeparator::new(m, COPOSITIVE_TOL).unwrap();
        let oracle = copositive_cap_oracle(m, COPOSITIVE_TOL).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // feasible points: scaled nonnegative or PSD matrices
        let mut feasible = Vec::new();
        while feasible.len() < 200 {
            let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let x = Vector::from_vec(v) * rng.random::<f64>();
            if oracle.test(x.as_slice()) {
                feasible.push(x);
            }
        }
        let mut cuts = 0;
        for _ in 0..300 {
            let x = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.5);
            if let Separation::Violated(g) = sep.separate(x.as_slice()) {
                cuts += 1;
                let gx = g.dot(&x);
                for y in &feasible {
                    assert!(g.dot(y) <= gx + 1e-12);
                }
            }
        }
        assert!(cuts > 100);
    }

    #[test]
    fn volume_contraction_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in [2usize, 5, 12] {
            let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let mut e = &a * a.transpose() + DMatrix::identity(n, n);
            let mut x = Vector::zeros(n);
            for _ in 0..5 {
                let g = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let before = e.determinant();
                assert!(central_cut(&mut x, &mut e, &g));
                let nf = n as f64;
                let ratio = (nf * nf / (nf * nf - 1.0)).powi(n as i32) * (nf - 1.0) / (nf + 1.0);
                assert!((e.determinant() / before - ratio).abs() < 1e-8 * ratio);
            }
        }
    }

    #[test]
    fn dnn_separator_cuts() {
        let sep = DnnSeparator::new(2).unwrap();
        assert_eq!(sep.separate(&[0.2, 0.05, 0.2]), Separation::Feasible);
        let Separation::Violated(g) = sep.separate(&[0.2, -0.05, 0.2]) else {
            panic!()
        };
        assert_eq!(g.as_slice(), &[0.0, -1.0, 0.0]);
        let Separation::Violated(g) = sep.separate(&[0.5, 0.3, 0.5]) else {
            panic!()
        };
        assert!((g - svec(&SymMatrix::ones(2))).norm() < 1e-15);
        // nonnegative, small sum, indefinite
        let x = svec(&SymMatrix::from_rows(&[vec![0.05, 0.2], vec![0.2, 0.05]]).unwrap());
        let Separation::Violated(g) = sep.separate(x.as_slice()) else {
            panic!()
        };
        assert!(g.dot(&x) > 0.0);
    }

    #[test]
    fn trace_records_every_cut() {
        let c = Vector::from_vec(vec![0.0, 1.0, 0.0]);
        let sep = BallSeparator { n: 3, radius: 1.0 };
        let mut cfg = EllipsoidConfig::new(1.0, 1e-3);
        cfg.trace = true;
        let r = ellipsoid_minimize(&c, &sep, &cfg).unwrap();
        assert_eq!(r.trace.len(), r.iterations);
        assert_eq!(r.oracle_calls as usize, r.iterations + 1);
        for w in r.trace.windows(2) {
            assert!(w[1].best_value <= w[0].best_value);
        }
        let mut buf = Vec::new();
        r.write_trace_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("iteration,cut,best_value\n1,objective,0e0\n"));
    }

    #[test]
    fn reports_budget_exhaustion() {
        let c = Vector::from_vec(vec![1.0, 0.0]);
        let sep = BallSeparator { n: 2, radius: 1.0 };
        let mut cfg = EllipsoidConfig::new(1.0, 1e-12);
        cfg.max_iters = 10;
        let r = ellipsoid_minimize(&c, &sep, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 10);
        // a separator that rejects everything never yields a feasible center
        struct Empty;
        impl Separator for Empty {
            fn dim(&self) -> usize {
                2
            }
            fn separate(&self, _: &[f64]) -> Separation {
                Separation::Violated(Vector::from_vec(vec![1.0, 0.0]))
            }
        }
        assert_eq!(ellipsoid_minimize(&c, &Empty, &cfg), Err(Error::Infeasible));
    }
}
