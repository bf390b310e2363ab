//! Dense symmetric matrices, the `svec`/`smat` isometry and PSD testing.
//!
//! [`SymMatrix`] stores each unordered pair `(i, j)` once, in row-major
//! upper-triangle order. That is the same order `svec` enumerates, so the
//! two maps are a scaling of the packed storage by `√2` on off-diagonals.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real vector.
pub type Vector = DVector<f64>;

/// Number of `svec` coordinates for matrices of order `m`.
pub fn svec_len(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Inverse of [`svec_len`]; `None` if `n` is not triangular.
pub fn order_from_svec_len(n: usize) -> Option<usize> {
    let mut m = ((2.0 * n as f64).sqrt()) as usize;
    while svec_len(m) < n {
        m += 1;
    }
    while m > 0 && svec_len(m) > n {
        m -= 1;
    }
    (svec_len(m) == n && m > 0).then_some(m)
}

/// Offset of `(i, j)` in row-major upper-triangle storage of order `m`.
#[inline]
fn packed_index(m: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // rows 0..i hold m + (m-1) + ... + (m-i+1) entries
    i * m - i * i.saturating_sub(1) / 2 + (j - i)
}

/// Real symmetric matrix of order `m`, stored as its upper triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    order: usize,
    packed: Vec<f64>,
}

impl SymMatrix {
    /// Zero matrix.
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            packed: vec![0.0; svec_len(order)],
        }
    }

    pub fn identity(order: usize) -> Self {
        Self::from_fn(order, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// The all-ones matrix `J`.
    pub fn ones(order: usize) -> Self {
        Self::from_fn(order, |_, _| 1.0)
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), |i, j| if i == j { diag[i] } else { 0.0 })
    }

    /// Builds the matrix from `f(i, j)` evaluated on `i <= j`.
    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut packed = Vec::with_capacity(svec_len(order));
        for i in 0..order {
            for j in i..order {
                packed.push(f(i, j));
            }
        }
        Self { order, packed }
    }

    /// Outer product `v vᵀ`.
    pub fn outer(v: &[f64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j])
    }

    /// Copies a dense matrix, requiring exact symmetry and finite entries.
    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        let m = a.nrows();
        for i in 0..m {
            for j in 0..m {
                if !a[(i, j)].is_finite() {
                    return Err(Error::NonFinite);
                }
                if a[(i, j)] != a[(j, i)] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self::from_fn(m, |i, j| a[(i, j)]))
    }

    /// Builds from row-major dense data of an `m × m` matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let dense = DMatrix::from_fn(m, m, |i, j| rows[i].get(j).copied().unwrap_or(f64::NAN));
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension {
                expected: m,
                got: rows.iter().map(Vec::len).find(|&l| l != m).unwrap_or(m),
            });
        }
        Self::from_dense(&dense)
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[self.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let idx = self.index(i, j);
        self.packed[idx] = value;
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        packed_index(self.order, i, j)
    }

    /// Upper-triangle entries in row-major order.
    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.order, self.order, |i, j| self.get(i, j))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.trace_inner(self).sqrt()
    }

    /// Trace inner product `⟨A, B⟩ = Σᵢⱼ AᵢⱼBᵢⱼ`.
    pub fn trace_inner(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.order, other.order, "order mismatch");
        let mut acc = 0.0;
        let mut k = 0;
        for i in 0..self.order {
            acc += self.packed[k] * other.packed[k];
            k += 1;
            for _ in (i + 1)..self.order {
                acc += 2.0 * self.packed[k] * other.packed[k];
                k += 1;
            }
        }
        acc
    }

    /// `aᵀ A a`.
    pub fn quad_form(&self, a: &[f64]) -> f64 {
        let m = self.order;
        let mut acc = 0.0;
        let mut k = 0;
        for i in 0..m {
            acc += self.packed[k] * a[i] * a[i];
            k += 1;
            for j in (i + 1)..m {
                acc += 2.0 * self.packed[k] * a[i] * a[j];
                k += 1;
            }
        }
        acc
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, a: &[f64]) -> Vec<f64> {
        let m = self.order;
        let mut out = vec![0.0; m];
        for i in 0..m {
            out[i] = (0..m).map(|j| self.get(i, j) * a[j]).sum();
        }
        out
    }

    /// Sum of all entries, `eᵀ A e`.
    pub fn entry_sum(&self) -> f64 {
        let mut acc = 0.0;
        let mut k = 0;
        for i in 0..self.order {
            acc += self.packed[k];
            k += 1;
            for _ in (i + 1)..self.order {
                acc += 2.0 * self.packed[k];
                k += 1;
            }
        }
        acc
    }

    pub fn scaled(&self, factor: f64) -> SymMatrix {
        SymMatrix {
            order: self.order,
            packed: self.packed.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.order, other.order, "order mismatch");
        SymMatrix {
            order: self.order,
            packed: self
                .packed
                .iter()
                .zip(&other.packed)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// `P A Pᵀ` where `perm[i]` is the source index of row `i`.
    pub fn permuted(&self, perm: &[usize]) -> SymMatrix {
        assert_eq!(perm.len(), self.order);
        SymMatrix::from_fn(self.order, |i, j| self.get(perm[i], perm[j]))
    }

    pub fn is_finite(&self) -> bool {
        self.packed.iter().all(|v| v.is_finite())
    }

    pub fn min_entry(&self) -> f64 {
        self.packed.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Serde adapter writing a [`Vector`] as a flat number array.
pub mod vector_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Vector;

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vector, D::Error> {
        Ok(Vector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

/// Symmetric vectorization: `(A₁₁, √2·A₁₂, …, √2·A₁ₘ, A₂₂, …, Aₘₘ)`.
pub fn svec(a: &SymMatrix) -> Vector {
    let m = a.order();
    let mut out = Vec::with_capacity(svec_len(m));
    let mut k = 0;
    for i in 0..m {
        out.push(a.packed[k]);
        k += 1;
        for _ in (i + 1)..m {
            out.push(std::f64::consts::SQRT_2 * a.packed[k]);
            k += 1;
        }
    }
    Vector::from_vec(out)
}

/// Adjoint (and inverse) of [`svec`].
pub fn smat(a: &[f64]) -> Result<SymMatrix> {
    let m = order_from_svec_len(a.len()).ok_or(Error::NotTriangular(a.len()))?;
    Ok(smat_unchecked(a, m))
}

/// [`smat`] for a caller that already knows the order.
pub(crate) fn smat_unchecked(a: &[f64], m: usize) -> SymMatrix {
    debug_assert_eq!(a.len(), svec_len(m));
    let mut packed = Vec::with_capacity(a.len());
    let mut k = 0;
    for i in 0..m {
        packed.push(a[k]);
        k += 1;
        for _ in (i + 1)..m {
            packed.push(a[k] * std::f64::consts::FRAC_1_SQRT_2);
            k += 1;
        }
    }
    SymMatrix { order: m, packed }
}

/// Extreme eigenvalue information of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub min_eigenvalue: f64,
    /// Spectral radius `max |λᵢ|`.
    pub max_abs_eigenvalue: f64,
}

const EIGEN_MAX_ITERS: usize = 10_000;

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>, tol: f64) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(a.clone(), tol.max(f64::EPSILON), EIGEN_MAX_ITERS)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|x, y| x.total_cmp(y));
    Ok(values)
}

/// Smallest eigenvalue and spectral radius.
pub fn spectral_summary(a: &SymMatrix, tol: f64) -> Result<SpectralSummary> {
    if tol <= 0.0 {
        return Err(Error::Parameter(
            "spectral tolerance must be positive".into(),
        ));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    if a.order() == 0 {
        return Ok(SpectralSummary {
            min_eigenvalue: 0.0,
            max_abs_eigenvalue: 0.0,
        });
    }
    let values = symmetric_eigenvalues(&a.to_dense(), tol)?;
    let min = values[0];
    let max_abs = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    Ok(SpectralSummary {
        min_eigenvalue: min,
        max_abs_eigenvalue: max_abs,
    })
}

/// Tolerance used by PSD membership tests: `1e-9 · (1 + ‖A‖_F)`.
pub fn default_psd_tol(a: &SymMatrix) -> f64 {
    1e-9 * (1.0 + a.frobenius_norm())
}

/// `λ_min(A) ≥ −tol`, decided from the eigenvalues.
pub fn is_psd(a: &SymMatrix, tol: f64) -> Result<bool> {
    if tol < 0.0 {
        return Err(Error::Parameter("PSD tolerance must be nonnegative".into()));
    }
    let summary = spectral_summary(a, 1e-14)?;
    Ok(summary.min_eigenvalue >= -tol)
}

/// Fast PSD test: attempts a Cholesky factorization of `A + tol·I`.
///
/// Agrees with [`is_psd`] except on the measure-zero boundary
/// `λ_min(A) = −tol`. Used on the hot path of membership oracles.
pub fn is_psd_shifted_cholesky(a: &SymMatrix, tol: f64) -> bool {
    let m = a.order();
    // row-major dense lower factor in a small scratch buffer
    let mut l = vec![0.0; m * m];
    for j in 0..m {
        let mut d = a.get(j, j) + tol;
        for k in 0..j {
            d -= l[j * m + k] * l[j * m + k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        l[j * m + j] = d;
        for i in (j + 1)..m {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            l[i * m + j] = s / d;
        }
    }
    true
}

/// Lower Cholesky factor of a dense symmetric matrix, or `None` if a pivot
/// falls below `rel_tol · max_i Aᵢᵢ`.
pub fn cholesky_lower(a: &DMatrix<f64>, rel_tol: f64) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 || n != a.ncols() {
        return None;
    }
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let floor = rel_tol * scale;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > floor) {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// Spectral radius of `B⁻¹A − I` for symmetric `A` and symmetric positive
/// definite `B`; `+∞` when `B` is not numerically positive definite.
pub fn spectral_relative_error(estimate: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    let Some(l) = cholesky_lower(estimate, 1e-13) else {
        return f64::INFINITY;
    };
    let n = l.nrows();
    // M = L⁻¹ A L⁻ᵀ has the spectrum of B⁻¹A
    let Some(y) = l.solve_lower_triangular(reference) else {
        return f64::INFINITY;
    };
    let Some(mt) = l.solve_lower_triangular(&y.transpose()) else {
        return f64::INFINITY;
    };
    let sym = (&mt + mt.transpose()) * 0.5;
    match symmetric_eigenvalues(&sym, 1e-14) {
        Ok(values) => values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max),
        Err(_) => {
            debug_assert!(n > 0);
            f64::INFINITY
        }
    }
}

/// Euclidean dot product of slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
