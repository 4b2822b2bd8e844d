//! Structural observability of a sparsity pattern `(Ā, H̄)`.
//!
//! Graph convention: state vertices `x_1..x_m`, output vertices `y_1..y_p`.
//! There is an edge `x_j → x_i` when `ā_ji = ★` and an edge `y_j → x_i`
//! when `h̄_ji = ★`, i.e. the graph of `Āᵀ` and `H̄ᵀ`. The pattern is
//! structurally observable when every state vertex is reached from some
//! output vertex and the stacked pattern `[Ā; H̄]` admits a matching that
//! covers every state column (no dilation).

use std::collections::VecDeque;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const STRUCTURE_TOL: f64 = 1e-12;

/// Zero / free-parameter pattern of a matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuralMatrix {
    rows: usize,
    cols: usize,
    pattern: Vec<bool>,
}

impl StructuralMatrix {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut pattern = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                pattern.push(f(i, j));
            }
        }
        StructuralMatrix { rows, cols, pattern }
    }

    /// Parses rows like `"** / *0"`: `*` is a free entry, `0` a fixed zero,
    /// rows separated by `/`.
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<Vec<bool>> = text
            .split('/')
            .map(|r| {
                r.chars()
                    .filter(|c| !c.is_whitespace())
                    .map(|c| match c {
                        '*' => Ok(true),
                        '0' => Ok(false),
                        other => Err(Error::Parameter(format!("bad pattern character {other:?}"))),
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) || cols == 0 {
            return Err(Error::Dimension(format!("ragged or empty pattern {text:?}")));
        }
        Ok(StructuralMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.pattern[i * self.cols + j]
    }

    pub fn count(&self) -> usize {
        self.pattern.iter().filter(|&&b| b).count()
    }
}

impl fmt::Display for StructuralMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            if i > 0 {
                write!(f, " / ")?;
            }
            for j in 0..self.cols {
                write!(f, "{}", if self.get(i, j) { '*' } else { '0' })?;
            }
        }
        Ok(())
    }
}

/// Entry is free iff `|a_ij| > tol`.
pub fn structure_of(a: &DMatrix<f64>, tol: f64) -> StructuralMatrix {
    StructuralMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].abs() > tol)
}

/// Entry-wise OR of same-size patterns (free if free at any step).
pub fn union_structure(patterns: &[StructuralMatrix]) -> Result<StructuralMatrix> {
    let first = patterns
        .first()
        .ok_or_else(|| Error::Parameter("union of no patterns".into()))?;
    if patterns.iter().any(|p| p.rows != first.rows || p.cols != first.cols) {
        return Err(Error::Dimension("patterns differ in size".into()));
    }
    Ok(StructuralMatrix::from_fn(first.rows, first.cols, |i, j| {
        patterns.iter().any(|p| p.get(i, j))
    }))
}

/// Why a pattern failed, or `Observable`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certificate {
    Observable,
    NoOutputs,
    /// States (0-based) not reachable from any output vertex.
    Unreachable(Vec<usize>),
    /// States (0-based) whose columns in `[Ā; H̄]` have fewer distinct
    /// nonzero rows than there are states in the set.
    Dilation(Vec<usize>),
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[usize]| v.iter().map(|i| format!("x{}", i + 1)).collect::<Vec<_>>().join(", ");
        match self {
            Certificate::Observable => write!(f, "every state reached from an output; no dilation"),
            Certificate::NoOutputs => write!(f, "no output rows"),
            Certificate::Unreachable(v) => write!(f, "unreachable from every output: {}", list(v)),
            Certificate::Dilation(v) => write!(f, "dilation on {{{}}}", list(v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservabilityVerdict {
    pub observable: bool,
    pub certificate: Certificate,
}

/// Structural observability of `Ā` with the outputs `h_bars` stacked.
pub fn is_structurally_observable(
    a_bar: &StructuralMatrix,
    h_bars: &[StructuralMatrix],
) -> Result<ObservabilityVerdict> {
    let m = a_bar.rows;
    if a_bar.cols != m || m == 0 {
        return Err(Error::Dimension("state pattern must be square and non-empty".into()));
    }
    if let Some(h) = h_bars.iter().find(|h| h.cols != m) {
        return Err(Error::Dimension(format!("output pattern has {} columns, expected {m}", h.cols)));
    }
    let outputs: Vec<&[bool]> = h_bars
        .iter()
        .flat_map(|h| (0..h.rows).map(move |i| &h.pattern[i * m..(i + 1) * m]))
        .collect();
    if outputs.is_empty() {
        return Ok(ObservabilityVerdict { observable: false, certificate: Certificate::NoOutputs });
    }

    // Reachability from the output vertices.
    let mut reached = vec![false; m];
    let mut queue = VecDeque::new();
    for row in &outputs {
        for (i, &star) in row.iter().enumerate() {
            if star && !reached[i] {
                reached[i] = true;
                queue.push_back(i);
            }
        }
    }
    while let Some(j) = queue.pop_front() {
        for i in 0..m {
            if a_bar.get(j, i) && !reached[i] {
                reached[i] = true;
                queue.push_back(i);
            }
        }
    }
    let unreachable: Vec<usize> = (0..m).filter(|&i| !reached[i]).collect();
    if !unreachable.is_empty() {
        return Ok(ObservabilityVerdict { observable: false, certificate: Certificate::Unreachable(unreachable) });
    }

    // Dilation: every state column of [Ā; H̄] must be matched to its own row.
    let mut rows: Vec<Vec<usize>> = (0..m).map(|i| (0..m).filter(|&j| a_bar.get(i, j)).collect()).collect();
    rows.extend(outputs.iter().map(|r| (0..m).filter(|&j| r[j]).collect()));
    let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (r, cols) in rows.iter().enumerate() {
        for &c in cols {
            col_rows[c].push(r);
        }
    }
    let matching = max_matching(&col_rows, rows.len());
    if let Some(free) = (0..m).find(|&c| matching.col_to_row[c].is_none()) {
        return Ok(ObservabilityVerdict {
            observable: false,
            certificate: Certificate::Dilation(hall_violator(free, &col_rows, &matching)),
        });
    }
    Ok(ObservabilityVerdict { observable: true, certificate: Certificate::Observable })
}

struct Matching {
    col_to_row: Vec<Option<usize>>,
    row_to_col: Vec<Option<usize>>,
}

/// Maximum bipartite matching of columns to rows by augmenting paths.
fn max_matching(col_rows: &[Vec<usize>], n_rows: usize) -> Matching {
    let mut mt = Matching { col_to_row: vec![None; col_rows.len()], row_to_col: vec![None; n_rows] };
    for c in 0..col_rows.len() {
        let mut seen = vec![false; n_rows];
        augment(c, col_rows, &mut mt, &mut seen);
    }
    mt
}

fn augment(c: usize, col_rows: &[Vec<usize>], mt: &mut Matching, seen: &mut [bool]) -> bool {
    for &r in &col_rows[c] {
        if seen[r] {
            continue;
        }
        seen[r] = true;
        let free = match mt.row_to_col[r] {
            None => true,
            Some(other) => augment(other, col_rows, mt, seen),
        };
        if free {
            mt.row_to_col[r] = Some(c);
            mt.col_to_row[c] = Some(r);
            return true;
        }
    }
    false
}

/// Columns reachable from an unmatched column by alternating paths: their
/// neighbouring rows are all matched inside the set, so the set has more
/// columns than neighbours.
fn hall_violator(start: usize, col_rows: &[Vec<usize>], mt: &Matching) -> Vec<usize> {
    let mut in_set = vec![false; col_rows.len()];
    in_set[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        for &r in &col_rows[c] {
            if let Some(next) = mt.row_to_col[r] {
                if !in_set[next] {
                    in_set[next] = true;
                    queue.push_back(next);
                }
            }
        }
    }
    (0..col_rows.len()).filter(|&c| in_set[c]).collect()
}

/// Rank of the observability matrix `[H; HA; …; HA^{m−1}]` for constant
/// numerical `(A, H)`, with relative singular-value tolerance `tol`.
pub fn observability_rank(a: &DMatrix<f64>, h: &DMatrix<f64>, tol: f64) -> usize {
    let m = a.nrows();
    let p = h.nrows();
    let mut obs = DMatrix::zeros(p * m, m);
    let mut block = h.clone();
    for i in 0..m {
        obs.view_mut((i * p, 0), (p, m)).copy_from(&block);
        block = &block * a;
    }
    let sv = obs.svd(false, false).singular_values;
    let smax = sv.max();
    sv.iter().filter(|&&s| s > tol * smax).count()
}
