//! Empirical moments of sample clouds.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::Vector;

fn check_samples(samples: &[Vector]) -> Result<usize> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Parameter("empty sample set".into()))?;
    let n = first.len();
    if let Some(bad) = samples.iter().find(|s| s.len() != n) {
        return Err(Error::Dimension {
            expected: n,
            got: bad.len(),
        });
    }
    Ok(n)
}

/// Sample mean.
pub fn mean(samples: &[Vector]) -> Result<Vector> {
    let n = check_samples(samples)?;
    let mut acc = Vector::zeros(n);
    for s in samples {
        acc += s;
    }
    Ok(acc / samples.len() as f64)
}

/// `(1/N) Σ yⱼyⱼᵀ − ȳȳᵀ`, evaluated on centered samples.
pub fn covariance(samples: &[Vector]) -> Result<DMatrix<f64>> {
    let mu = mean(samples)?;
    Ok(covariance_about(samples, &mu))
}

/// `(1/N) Σ (yⱼ − μ)(yⱼ − μ)ᵀ` for a given center.
pub fn covariance_about(samples: &[Vector], center: &Vector) -> DMatrix<f64> {
    let n = center.len();
    let count = samples.len();
    let mut centered = DMatrix::<f64>::zeros(n, count);
    for (j, s) in samples.iter().enumerate() {
        centered.set_column(j, &(s - center));
    }
    let mut cov = &centered * centered.transpose() / count as f64;
    // exact symmetry for downstream Cholesky
    for i in 0..n {
        for j in (i + 1)..n {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    cov
}

/// `yⱼ − ȳ` for every sample.
pub fn centered(samples: &[Vector]) -> Result<Vec<Vector>> {
    let mu = mean(samples)?;
    Ok(samples.iter().map(|s| s - &mu).collect())
}

/// Mean and standard error of a scalar series.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mu = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mu, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0);
    (mu, (var / n).sqrt())
}
