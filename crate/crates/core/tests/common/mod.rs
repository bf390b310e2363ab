#![allow(dead_code)]

use anneal_core::linalg::SymMatrix;

/// `(e^{s(t−a)} − 1)/(e^{s(b−a)} − 1)`, written out directly.
pub fn naive_cdf(s: f64, a: f64, b: f64, t: f64) -> f64 {
    if s == 0.0 {
        (t - a) / (b - a)
    } else {
        ((s * (t - a)).exp() - 1.0) / ((s * (b - a)).exp() - 1.0)
    }
}

/// Two-sided KS statistic of sorted draws against `cdf`.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = cdf(t);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// `min aᵀAa` over simplex points with coordinates in `(1/steps)ℤ`.
pub fn simplex_grid_min(a: &SymMatrix, steps: usize) -> f64 {
    let m = a.order();
    let dense: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| a.get(i, j)).collect())
        .collect();
    let h = 1.0 / steps as f64;
    let mut counts = vec![0usize; m];
    let mut best = f64::INFINITY;
    fn rec(
        k: usize,
        left: usize,
        counts: &mut [usize],
        dense: &[Vec<f64>],
        h: f64,
        best: &mut f64,
    ) {
        let m = counts.len();
        if k == m - 1 {
            counts[k] = left;
            let x: Vec<f64> = counts.iter().map(|&c| c as f64 * h).collect();
            let mut v = 0.0;
            for i in 0..m {
                let row: f64 = (0..m).map(|j| dense[i][j] * x[j]).sum();
                v += x[i] * row;
            }
            *best = best.min(v);
            return;
        }
        for c in 0..=left {
            counts[k] = c;
            rec(k + 1, left - c, counts, dense, h, best);
        }
    }
    rec(0, steps, &mut counts, &dense, h, &mut best);
    best
}
