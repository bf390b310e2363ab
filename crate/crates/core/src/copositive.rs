//! Exact copositivity test by support enumeration.
//!
//! `A` is copositive iff `min { aᵀAa : eᵀa = 1, a ≥ 0 }` is nonnegative. A
//! minimizer `a` with support `S` satisfies the reduced KKT system
//!
//! ```text
//!     A_SS a_S = λ e,   eᵀ a_S = 1,
//! ```
//!
//! and then `aᵀAa = λ`. The binary vector `b` of the big-M mixed-integer
//! reformulation selects exactly such a support, so enumerating all
//! `2^m − 1` nonempty supports and solving each bordered system solves the
//! mixed-integer program without a branch-and-bound solver. Every kept
//! candidate is a feasible point of the simplex, so the minimum over
//! candidates is an upper bound that is attained by the global minimizer's
//! support. Supports whose reduced system is singular are skipped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_psd_shifted_cholesky, SymMatrix, Vector};

/// Largest order handled by the enumeration.
pub const MAX_ORDER: usize = 24;

/// Result of the copositivity test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopositivityCertificate {
    /// `min aᵀAa` over the standard simplex.
    pub min_value: f64,
    /// A simplex point attaining `min_value`.
    #[serde(with = "crate::linalg::vector_serde")]
    pub witness: Vector,
    pub is_copositive: bool,
}

impl CopositivityCertificate {
    /// The separating matrix `a aᵀ`: copositive `X` satisfy `⟨aaᵀ, X⟩ ≥ 0`.
    pub fn witness_outer(&self) -> SymMatrix {
        SymMatrix::outer(self.witness.as_slice())
    }
}

/// The big-M constant `2m·maxᵢⱼ|Aᵢⱼ|` of the mixed-integer formulation.
///
/// The enumeration never needs it; it is exposed for reference.
pub fn big_m(a: &SymMatrix) -> f64 {
    2.0 * a.order() as f64 * a.packed().iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn check_order(a: &SymMatrix, tol: f64) -> Result<()> {
    if a.order() == 0 {
        return Err(Error::Parameter("copositivity of an empty matrix".into()));
    }
    if a.order() > MAX_ORDER {
        return Err(Error::Parameter(format!(
            "copositivity enumeration supports m <= {MAX_ORDER}, got {}",
            a.order()
        )));
    }
    if !(tol >= 0.0) {
        return Err(Error::Parameter(
            "copositivity tolerance must be >= 0".into(),
        ));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Full copositivity certificate with the minimizing simplex point.
pub fn is_copositive(a: &SymMatrix, tol: f64) -> Result<CopositivityCertificate> {
    check_order(a, tol)?;
    let mut solver = SupportSolver::new(a.order());
    solver.load(a, inverse_scale(a));
    let mut best = f64::INFINITY;
    let mut witness = vec![0.0; a.order()];
    let mut candidate = vec![0.0; a.order()];
    for mask in 1u32..(1u32 << a.order()) {
        if let Some(value) = solver.candidate(a, mask, &mut candidate) {
            if value < best {
                best = value;
                witness.copy_from_slice(&candidate);
            }
        }
    }
    // vertices always solve their 1×1 system, so `best` is finite
    debug_assert!(best.is_finite());
    Ok(CopositivityCertificate {
        min_value: best,
        witness: Vector::from_vec(witness),
        is_copositive: best >= -tol,
    })
}

/// Membership-only variant: stops at the first support with value `< −tol`.
///
/// Masks are visited by increasing support size, so violations on small
/// faces (negative diagonal entries, negative 2×2 minors) exit early.
#[derive(Debug, Clone)]
pub struct CopositivityTester {
    order: usize,
    masks: Vec<u32>,
}

impl CopositivityTester {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::Parameter(format!(
                "copositivity enumeration supports 1 <= m <= {MAX_ORDER}, got {order}"
            )));
        }
        let mut masks: Vec<u32> = (1u32..(1u32 << order)).collect();
        masks.sort_by_key(|m| (m.count_ones(), *m));
        Ok(Self { order, masks })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `min aᵀAa ≥ −tol` over the simplex.
    ///
    /// Supports whose principal submatrix has no negative entry are skipped:
    /// their candidates are nonnegative.
    pub fn is_member(&self, a: &SymMatrix, tol: f64) -> bool {
        debug_assert_eq!(a.order(), self.order);
        // entrywise nonnegative matrices are copositive
        if a.min_entry() >= 0.0 {
            return true;
        }
        let m = self.order;
        // PD plus nonnegative off-diagonal part is copositive
        let mut p = a.clone();
        for i in 0..m {
            for j in (i + 1)..m {
                if p.get(i, j) > 0.0 {
                    p.set(i, j, 0.0);
                }
            }
        }
        if is_psd_shifted_cholesky(&p, 0.0) {
            return true;
        }
        let mut neg = [0u32; MAX_ORDER];
        for i in 0..m {
            for j in i..m {
                if a.get(i, j) < 0.0 {
                    neg[i] |= 1 << j;
                    neg[j] |= 1 << i;
                }
            }
        }
        let mut solver = SupportSolver::new(m);
        solver.load(a, inverse_scale(a));
        let mut candidate = vec![0.0; m];
        for &mask in &self.masks {
            let mut bits = mask;
            let mut has_negative = false;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                if neg[i] & mask != 0 {
                    has_negative = true;
                    break;
                }
                bits &= bits - 1;
            }
            if !has_negative {
                continue;
            }
            if let Some(value) = solver.candidate(a, mask, &mut candidate) {
                if value < -tol {
                    return false;
                }
            }
        }
        true
    }
}

fn inverse_scale(a: &SymMatrix) -> f64 {
    let s = a.packed().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if s > 0.0 {
        1.0 / s
    } else {
        1.0
    }
}

/// Scratch space for the bordered KKT solves.
struct SupportSolver {
    /// `A·inv_scale`, dense row-major.
    dense: Vec<f64>,
    idx: Vec<usize>,
    mat: Vec<f64>,
    rhs: Vec<f64>,
}

const PIVOT_REL_TOL: f64 = 1e-12;
const NEG_SLACK: f64 = 1e-12;

impl SupportSolver {
    fn new(order: usize) -> Self {
        let k = order + 1;
        Self {
            dense: vec![0.0; order * order],
            idx: Vec::with_capacity(order),
            mat: vec![0.0; k * k],
            rhs: vec![0.0; k],
        }
    }

    /// `inv_scale` normalizes `A` so the singularity test is scale-free.
    fn load(&mut self, a: &SymMatrix, inv_scale: f64) {
        let m = a.order();
        for i in 0..m {
            for j in 0..m {
                self.dense[i * m + j] = a.get(i, j) * inv_scale;
            }
        }
    }

    /// Solves the reduced system on `mask` for the loaded matrix `a`; returns
    /// `aᵀAa` and writes the simplex point into `out` when the solution is
    /// nonnegative.
    fn candidate(&mut self, a: &SymMatrix, mask: u32, out: &mut [f64]) -> Option<f64> {
        let m = a.order();
        self.idx.clear();
        let mut bits = mask;
        while bits != 0 {
            self.idx.push(bits.trailing_zeros() as usize);
            bits &= bits - 1;
        }
        let k = self.idx.len();
        if k == 1 {
            let i = self.idx[0];
            out.iter_mut().for_each(|v| *v = 0.0);
            out[i] = 1.0;
            return Some(a.get(i, i));
        }
        let dim = k + 1;
        let mat = &mut self.mat[..dim * dim];
        let rhs = &mut self.rhs[..dim];
        // [ A_SS  -e ] [a_S]   [0]
        // [ eᵀ     0 ] [ λ ] = [1]
        for (r, &i) in self.idx.iter().enumerate() {
            let src = &self.dense[i * m..(i + 1) * m];
            let row = &mut mat[r * dim..(r + 1) * dim];
            for (dst, &j) in row.iter_mut().zip(&self.idx) {
                *dst = src[j];
            }
            row[k] = -1.0;
            rhs[r] = 0.0;
        }
        let last = &mut mat[k * dim..];
        last[..k].fill(1.0);
        last[k] = 0.0;
        rhs[k] = 1.0;

        // Gaussian elimination with partial pivoting
        for col in 0..dim {
            let mut piv = col;
            let mut best = mat[col * dim + col].abs();
            for r in (col + 1)..dim {
                let v = mat[r * dim + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best <= PIVOT_REL_TOL {
                return None;
            }
            if piv != col {
                let (head, tail) = mat.split_at_mut(piv * dim);
                head[col * dim..(col + 1) * dim].swap_with_slice(&mut tail[..dim]);
                rhs.swap(col, piv);
            }
            let (head, tail) = mat.split_at_mut((col + 1) * dim);
            let prow = &head[col * dim + col..];
            let p = prow[0];
            for (r, row) in tail.chunks_exact_mut(dim).enumerate() {
                let f = row[col] / p;
                if f != 0.0 {
                    for (x, &y) in row[col..].iter_mut().zip(prow) {
                        *x -= f * y;
                    }
                    rhs[col + 1 + r] -= f * rhs[col];
                }
            }
        }
        for r in (0..dim).rev() {
            let row = &mat[r * dim..(r + 1) * dim];
            let mut s = rhs[r];
            for c in (r + 1)..dim {
                s -= row[c] * rhs[c];
            }
            rhs[r] = s / row[r];
        }

        let mut sum = 0.0;
        for &v in &rhs[..k] {
            if v < -NEG_SLACK {
                return None;
            }
            sum += v.max(0.0);
        }
        if !(sum > 0.0) {
            return None;
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, &i) in self.idx.iter().enumerate() {
            out[i] = rhs[r].max(0.0) / sum;
        }
        // evaluate on the exact simplex point rather than trusting λ
        Some(a.quad_form(out))
    }
}
