//! Rectangular linear assignment with infeasible entries.

use crate::scalar::Real;

/// Dense cost matrix; `None` marks a pair that may not be matched.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T> {
    rows: usize,
    cols: usize,
    entries: Vec<Option<T>>,
}

impl<T: Real> CostMatrix<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![None; rows * cols],
        }
    }

    /// Builds a fully feasible matrix from row vectors.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::new(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "ragged cost matrix");
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, Some(v));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Option<T> {
        self.entries[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Option<T>) {
        self.entries[row * self.cols + col] = value;
    }

    pub fn feasible(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(k, v)| v.map(|v| (k / self.cols, k % self.cols, v)))
    }
}

/// A one-to-one matching between rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<T> {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
    pub total_cost: T,
}

/// Maximum-cardinality, minimum-cost matching over the feasible entries.
///
/// Infeasible entries are priced above the sum of all feasible costs, so a
/// matching with more feasible pairs always wins; among equal cardinalities
/// the cheapest one is returned. Ties resolve toward lower indices.
pub fn solve_assignment<T: Real>(c: &CostMatrix<T>) -> Assignment<T> {
    let (r, k) = (c.rows(), c.cols());
    if r == 0 || k == 0 || c.feasible().next().is_none() {
        return Assignment {
            pairs: Vec::new(),
            unmatched_rows: (0..r).collect(),
            unmatched_cols: (0..k).collect(),
            total_cost: T::zero(),
        };
    }
    let big = c.feasible().map(|(_, _, v)| v.abs()).sum::<T>() + T::one();
    let transpose = r > k;
    let (n, m) = if transpose { (k, r) } else { (r, k) };
    let cost = |i: usize, j: usize| -> T {
        let v = if transpose { c.get(j, i) } else { c.get(i, j) };
        v.unwrap_or(big)
    };
    let row_to_col = hungarian(n, m, cost);

    let mut pairs = Vec::new();
    for (i, j) in row_to_col.into_iter().enumerate() {
        let (row, col) = if transpose { (j, i) } else { (i, j) };
        if c.get(row, col).is_some() {
            pairs.push((row, col));
        }
    }
    pairs.sort_unstable();
    let mut row_used = vec![false; r];
    let mut col_used = vec![false; k];
    let mut total_cost = T::zero();
    for &(i, j) in &pairs {
        row_used[i] = true;
        col_used[j] = true;
        total_cost = total_cost + c.get(i, j).unwrap_or_else(T::zero);
    }
    Assignment {
        pairs,
        unmatched_rows: (0..r).filter(|&i| !row_used[i]).collect(),
        unmatched_cols: (0..k).filter(|&j| !col_used[j]).collect(),
        total_cost,
    }
}

/// Shortest augmenting path Hungarian method for `n <= m`; returns the
/// column assigned to each row.
fn hungarian<T: Real>(n: usize, m: usize, cost: impl Fn(usize, usize) -> T) -> Vec<usize> {
    debug_assert!(n <= m);
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); m + 1];
    // p[j]: row (1-based) matched to column j; column 0 is the virtual root.
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
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
            for j in 0..=m {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
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
    let mut out = vec![0usize; n];
    for j in 1..=m {
        if p[j] > 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}
