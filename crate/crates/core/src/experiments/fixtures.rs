//! Plain-text matrix files and the shipped 6×6 extremal DNN fixtures.
//!
//! A file holds one matrix per block of whitespace-separated numbers; blocks
//! are separated by blank lines. Lines starting with `#` are comments, and a
//! comment directly above a block names it.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{self, svec, SymMatrix, Vector};

const EXTREMAL_SOURCE: &str = include_str!("../../data/extremal_rand.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct NamedMatrix {
    pub name: String,
    pub matrix: SymMatrix,
}

impl NamedMatrix {
    /// `svec(Y)/‖svec(Y)‖`.
    pub fn normalized_objective(&self) -> Vector {
        let v = svec(&self.matrix);
        let norm = v.norm();
        v / norm
    }
}

/// Parses the block format. Unnamed blocks get `matrix_<k>` (1-based).
pub fn parse_matrix_blocks(text: &str) -> Result<Vec<NamedMatrix>> {
    let mut out = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut pending_name: Option<String> = None;
    let mut block_name: Option<String> = None;
    let flush = |rows: &mut Vec<Vec<f64>>,
                 name: &mut Option<String>,
                 out: &mut Vec<NamedMatrix>|
     -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        let matrix = SymMatrix::from_rows(rows)?;
        let name = name
            .take()
            .unwrap_or_else(|| format!("matrix_{}", out.len() + 1));
        out.push(NamedMatrix { name, matrix });
        rows.clear();
        Ok(())
    };
    for (lineno, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            flush(&mut rows, &mut block_name, &mut out)?;
            pending_name = None;
            continue;
        }
        if let Some(c) = t.strip_prefix('#') {
            if rows.is_empty() {
                pending_name = Some(c.trim().to_string());
            }
            continue;
        }
        if rows.is_empty() {
            block_name = pending_name.take().filter(|n| !n.contains(' '));
        }
        let row = t
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad number '{tok}'", lineno + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    flush(&mut rows, &mut block_name, &mut out)?;
    Ok(out)
}

pub fn read_matrix_file(path: impl AsRef<Path>) -> Result<Vec<NamedMatrix>> {
    parse_matrix_blocks(&std::fs::read_to_string(path)?)
}

/// Writes matrices in the block format; integral entries print without a
/// fractional part.
pub fn format_matrix_blocks(mats: &[NamedMatrix]) -> String {
    let mut s = String::new();
    for (i, nm) in mats.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        s.push_str(&format!("# {}\n", nm.name));
        let m = nm.matrix.order();
        for r in 0..m {
            let row: Vec<String> = (0..m).map(|c| fmt_entry(nm.matrix.get(r, c))).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
    }
    s
}

fn fmt_entry(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

/// The ten shipped fixtures `extremal_rand_1 … extremal_rand_10`.
pub fn extremal_fixtures() -> Vec<NamedMatrix> {
    parse_matrix_blocks(EXTREMAL_SOURCE).expect("shipped fixture file parses")
}

/// Tolerances of [`validate_extremal`].
pub const DNN_PSD_TOL: f64 = 1e-8;
pub const RANK_TOL: f64 = 1e-6;

/// Checks the fixture invariants: entrywise nonnegative, PSD within
/// `1e-8·λ_max`, rank 3 within `1e-6·λ_max`, and some ordering of the indices
/// with `Y_{π(i),π(i+1)} = 0` for consecutive positions.
pub fn validate_extremal(y: &SymMatrix) -> Result<()> {
    if y.order() != 6 {
        return Err(Error::Dimension {
            expected: 6,
            got: y.order(),
        });
    }
    if y.min_entry() < 0.0 {
        return Err(Error::Parameter("matrix has a negative entry".into()));
    }
    let mut eig = linalg::symmetric_eigenvalues(&y.to_dense(), 1e-14)?;
    eig.sort_by(|a, b| b.total_cmp(a));
    let top = eig[0].max(0.0);
    if eig[5] < -DNN_PSD_TOL * top.max(1.0) {
        return Err(Error::Parameter(format!(
            "matrix is not PSD, λ_min = {}",
            eig[5]
        )));
    }
    let rank = eig.iter().filter(|&&l| l > RANK_TOL * top).count();
    if rank != 3 {
        return Err(Error::Parameter(format!("rank is {rank}, expected 3")));
    }
    if zero_path_order(y).is_none() {
        return Err(Error::Parameter(
            "no index order puts zeros on the superdiagonal".into(),
        ));
    }
    Ok(())
}

/// An index order `π` with `Y_{π(i),π(i+1)} = 0` for all consecutive
/// positions, if one exists.
pub fn zero_path_order(y: &SymMatrix) -> Option<Vec<usize>> {
    let m = y.order();
    fn extend(y: &SymMatrix, path: &mut Vec<usize>, used: &mut [bool]) -> bool {
        let m = used.len();
        if path.len() == m {
            return true;
        }
        let last = *path.last().expect("nonempty");
        for j in 0..m {
            if !used[j] && y.get(last, j) == 0.0 {
                used[j] = true;
                path.push(j);
                if extend(y, path, used) {
                    return true;
                }
                path.pop();
                used[j] = false;
            }
        }
        false
    }
    for start in 0..m {
        let mut used = vec![false; m];
        used[start] = true;
        let mut path = vec![start];
        if extend(y, &mut path, &mut used) {
            return Some(path);
        }
    }
    None
}
