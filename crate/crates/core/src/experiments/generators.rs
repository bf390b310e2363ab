//! Random instances: objectives for the DNN experiments and extremal 6×6
//! doubly nonnegative matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::linalg::{svec, SymMatrix, Vector};
use crate::DMatrix;

use super::fixtures::validate_extremal;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomObjective {
    pub seed: u64,
    pub m: usize,
    #[serde(with = "crate::linalg::vector_serde")]
    pub c: Vector,
}

/// `C + Cᵀ + (√2 − 2)·Diag(C)`: off-diagonal entries `Cᵢⱼ + Cⱼᵢ` and
/// diagonal entries `√2·Cᵢᵢ`, all of variance 2 for standard normal `C`.
pub fn symmetrize_objective(c: &DMatrix<f64>) -> Result<SymMatrix> {
    let m = c.nrows();
    if m != c.ncols() {
        return Err(param("objective seed matrix must be square"));
    }
    Ok(SymMatrix::from_fn(m, |i, j| {
        if i == j {
            2f64.sqrt() * c[(i, i)]
        } else {
            c[(i, j)] + c[(j, i)]
        }
    }))
}

/// `svec(C + Cᵀ + (√2 − 2)Diag C)` normalized to unit length.
pub fn objective_from_matrix(c: &DMatrix<f64>) -> Result<Vector> {
    let v = svec(&symmetrize_objective(c)?);
    let norm = v.norm();
    if !(norm > 0.0) {
        return Err(param("objective seed matrix is zero"));
    }
    Ok(v / norm)
}

/// Unit objective of length `m(m+1)/2` from a standard normal `C`.
pub fn gen_objective(m: usize, seed: u64) -> Result<RandomObjective> {
    if m < 2 {
        return Err(param("objective generation needs m >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(RandomObjective {
        seed,
        m,
        c: objective_from_matrix(&c)?,
    })
}

/// Uniformly random unit vector in `ℝⁿ`.
pub fn gen_unit_vector(n: usize, seed: u64) -> Result<Vector> {
    if n == 0 {
        return Err(param("dimension must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 0.0 {
            return Ok(v / norm);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedInstance {
    pub matrix: SymMatrix,
    pub attempts: usize,
    /// Whether candidates were screened for an easy completely positive
    /// factorization. Always `false`: no such screening is done here.
    pub cp_screened: bool,
}

pub const EXTREMAL_RETRY_BUDGET: usize = 100_000;

fn signed_poisson<R: Rng>(rng: &mut R, pois: &Poisson<f64>) -> f64 {
    let v = pois.sample(rng);
    if rng.random::<bool>() {
        -v
    } else {
        v
    }
}

/// `Y = v₁v₁ᵀ + v₂v₂ᵀ + v₃v₃ᵀ` with `Y_{i,i+1} = 0`.
///
/// `v₁`, `v₂` and `(v₃)₁` are Poisson(1) with random signs; the rest of `v₃`
/// solves `(v₃)_{i+1} = −((v₁)ᵢ(v₁)_{i+1} + (v₂)ᵢ(v₂)_{i+1})/(v₃)ᵢ`.
/// Candidates that divide by zero, have a zero diagonal entry or fail
/// validation are redrawn.
pub fn gen_extremal_dnn(seed: u64) -> Result<GeneratedInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pois = Poisson::new(1.0).expect("rate 1 is valid");
    for attempt in 1..=EXTREMAL_RETRY_BUDGET {
        let v1: Vec<f64> = (0..6).map(|_| signed_poisson(&mut rng, &pois)).collect();
        let v2: Vec<f64> = (0..6).map(|_| signed_poisson(&mut rng, &pois)).collect();
        let mut v3 = vec![signed_poisson(&mut rng, &pois); 1];
        let mut ok = true;
        for i in 0..5 {
            if v3[i] == 0.0 {
                ok = false;
                break;
            }
            v3.push(-(v1[i] * v1[i + 1] + v2[i] * v2[i + 1]) / v3[i]);
        }
        if !ok {
            continue;
        }
        let y = SymMatrix::from_fn(6, |i, j| v1[i] * v1[j] + v2[i] * v2[j] + v3[i] * v3[j]);
        // rounding in the v₃ recursion leaves tiny superdiagonal residues
        let mut y = y;
        for i in 0..5 {
            if y.get(i, i + 1).abs() <= 1e-12 * (1.0 + y.get(i, i).max(y.get(i + 1, i + 1))) {
                y.set(i, i + 1, 0.0);
            }
        }
        // a zero row leaves a 5×5 matrix in disguise
        if (0..6).any(|i| y.get(i, i) <= 0.0) {
            continue;
        }
        if validate_extremal(&y).is_ok() {
            return Ok(GeneratedInstance {
                matrix: y,
                attempts: attempt,
                cp_screened: false,
            });
        }
    }
    Err(Error::Generation(format!(
        "no valid matrix within {EXTREMAL_RETRY_BUDGET} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::smat;

    #[test]
    fn objective_is_unit_and_reproducible() {
        for seed in 0..50 {
            let a = gen_objective(5, seed).unwrap();
            assert!((a.c.norm() - 1.0).abs() < 1e-12);
            assert_eq!(a.c.len(), 15);
            assert_eq!(a, gen_objective(5, seed).unwrap());
        }
        assert_ne!(
            gen_objective(5, 1).unwrap().c,
            gen_objective(5, 2).unwrap().c
        );
        assert!(gen_objective(1, 0).is_err());
    }

    #[test]
    fn unit_vectors() {
        let v = gen_unit_vector(7, 3).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-15);
        assert_eq!(v, gen_unit_vector(7, 3).unwrap());
        assert!(gen_unit_vector(0, 3).is_err());
    }

    #[test]
    fn identity_injection() {
        let c = objective_from_matrix(&DMatrix::identity(4, 4)).unwrap();
        let expect = svec(&SymMatrix::identity(4).scaled(2f64.sqrt()));
        let expect = &expect / expect.norm();
        assert!((c - expect).norm() < 1e-15);
    }

    #[test]
    fn symmetrized_entries_have_variance_two() {
        let m = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (mut s, mut s2, mut k) = (0.0, 0.0, 0.0);
        for _ in 0..10_000 {
            let c = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let y = symmetrize_objective(&c).unwrap();
            for i in 0..m {
                for j in i..m {
                    let v = y.get(i, j);
                    s += v;
                    s2 += v * v;
                    k += 1.0;
                }
            }
        }
        let var = s2 / k - (s / k).powi(2);
        assert!((var - 2.0).abs() < 0.1, "{var}");
    }

    #[test]
    fn generated_matrices_are_valid() {
        for seed in 0..20 {
            let g = gen_extremal_dnn(seed).unwrap();
            assert!(!g.cp_screened);
            validate_extremal(&g.matrix).unwrap();
            for i in 0..5 {
                assert_eq!(g.matrix.get(i, i + 1), 0.0);
            }
            assert!((0..6).all(|i| g.matrix.get(i, i) > 0.0));
            assert_eq!(g, gen_extremal_dnn(seed).unwrap());
            assert!(smat(svec(&g.matrix).as_slice()).is_ok());
        }
    }
}
