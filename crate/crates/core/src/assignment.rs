//! Exact maximum-weight bipartite matching (Hungarian method).

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignmentError {
    #[error("score matrix must have at least one row and one column")]
    Empty,
    #[error("expected {expected} scores, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("score at ({0}, {1}) is out of range")]
    OutOfRange(usize, usize),
}

/// Dense row-major matrix of non-negative pair scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    /// Scores restricted to `[0, 1]`.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AssignmentError> {
        let m = Self::weights(rows, cols, data)?;
        if let Some(k) = m.data.iter().position(|&x| x > 1.0) {
            return Err(AssignmentError::OutOfRange(k / cols, k % cols));
        }
        Ok(m)
    }

    /// Arbitrary finite non-negative weights.
    pub fn weights(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AssignmentError> {
        if rows == 0 || cols == 0 {
            return Err(AssignmentError::Empty);
        }
        if data.len() != rows * cols {
            return Err(AssignmentError::Shape {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(AssignmentError::OutOfRange(k / cols, k % cols));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, AssignmentError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(AssignmentError::Shape {
                expected: rows.len() * cols,
                got: rows.iter().map(Vec::len).sum(),
            });
        }
        Self::weights(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn transpose(&self) -> ScoreMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        ScoreMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

/// A set of (row, col) pairs with each row and each column used at most once.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Sorted ascending.
    pub pairs: Vec<(usize, usize)>,
    pub total_score: f64,
}

/// Maximum-weight matching of size `min(rows, cols)`.
///
/// Since scores are non-negative, a maximum-weight matching that covers the
/// smaller side always exists; zero-score pairs may therefore appear. Among
/// all optimal matchings the lexicographically smallest sorted pair list is
/// returned.
pub fn max_weight_matching(m: &ScoreMatrix) -> Matching {
    let all_rows: Vec<usize> = (0..m.rows).collect();
    let all_cols: Vec<usize> = (0..m.cols).collect();
    let best = optimum(m, &all_rows, &all_cols);
    let tol = 1e-9 * (1.0 + best.abs());

    let mut free_rows = all_rows;
    let mut free_cols = all_cols;
    let mut fixed = 0.0;
    let mut pairs = Vec::new();
    for i in 0..m.rows {
        free_rows.retain(|&r| r != i);
        let mut chosen = None;
        for (pos, &j) in free_cols.iter().enumerate() {
            let mut rest_cols = free_cols.clone();
            rest_cols.remove(pos);
            if fixed + m.get(i, j) + optimum(m, &free_rows, &rest_cols) >= best - tol {
                chosen = Some(pos);
                break;
            }
        }
        if let Some(pos) = chosen {
            let j = free_cols.remove(pos);
            fixed += m.get(i, j);
            pairs.push((i, j));
        }
        if free_cols.is_empty() {
            break;
        }
    }
    let total_score = pairs.iter().map(|&(i, j)| m.get(i, j)).sum();
    Matching { pairs, total_score }
}

/// Optimal value over the submatrix selected by `rows` x `cols`.
fn optimum(m: &ScoreMatrix, rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() || cols.is_empty() {
        return 0.0;
    }
    let (short, long, transposed) = if rows.len() <= cols.len() {
        (rows, cols, false)
    } else {
        (cols, rows, true)
    };
    let cost = |a: usize, b: usize| {
        let (i, j) = if transposed {
            (long[b], short[a])
        } else {
            (short[a], long[b])
        };
        -m.get(i, j)
    };
    let assign = hungarian_min(short.len(), long.len(), cost);
    assign.iter().enumerate().map(|(a, &b)| -cost(a, b)).sum()
}

/// Minimum-cost assignment of `n` rows into `k >= n` columns using
/// shortest augmenting paths with potentials. Returns the column of each row.
fn hungarian_min(n: usize, k: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    debug_assert!(n <= k);
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; k + 1];
    // p[j]: 1-based row matched to 1-based column j (0 = none).
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=k {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=k {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}
