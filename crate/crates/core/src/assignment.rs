//! Exact rectangular minimum-cost assignment.
//!
//! Shortest augmenting path solver in the Jonker-Volgenant family: one
//! Dijkstra-style search per row of the narrower side with dual potentials
//! kept reduced costs non-negative. `O(n^2 m)` for an `n x m` matrix with
//! `n <= m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of non-negative finite costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { left: data.len(), right: rows * cols });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch { expected: cols, found: r.len() });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.get(r, c));
            }
        }
        Self { rows: self.cols, cols: self.rows, data }
    }
}

/// Matched `(previous, current)` index pairs sorted by previous index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMapping {
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl NodeMapping {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_dims(prev: &[Vec<f64>], curr: &[Vec<f64>]) -> Result<usize> {
    if prev.is_empty() || curr.is_empty() {
        return Err(Error::EmptyInput("point list"));
    }
    let dim = prev[0].len();
    if let Some(p) = prev.iter().chain(curr).find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
    }
    Ok(dim)
}

/// Euclidean distances between every `prev[g]` (rows) and `curr[g']` (columns).
pub fn pairwise_distances_sequential(prev: &[Vec<f64>], curr: &[Vec<f64>]) -> Result<CostMatrix> {
    check_dims(prev, curr)?;
    let cols = curr.len();
    let mut data = vec![0.0; prev.len() * cols];
    for (row, p) in data.chunks_mut(cols).zip(prev) {
        for (cell, q) in row.iter_mut().zip(curr) {
            *cell = euclid(p, q);
        }
    }
    CostMatrix::new(prev.len(), cols, data)
}

/// [`pairwise_distances_sequential`] with rows spread over the rayon pool.
#[cfg(feature = "parallel")]
pub fn pairwise_distances_parallel(prev: &[Vec<f64>], curr: &[Vec<f64>]) -> Result<CostMatrix> {
    use rayon::prelude::*;
    check_dims(prev, curr)?;
    let cols = curr.len();
    let mut data = vec![0.0; prev.len() * cols];
    data.par_chunks_mut(cols).zip(prev.par_iter()).for_each(|(row, p)| {
        for (cell, q) in row.iter_mut().zip(curr) {
            *cell = euclid(p, q);
        }
    });
    CostMatrix::new(prev.len(), cols, data)
}

/// Distance matrix; parallel when the `parallel` feature is on.
pub fn pairwise_distances(prev: &[Vec<f64>], curr: &[Vec<f64>]) -> Result<CostMatrix> {
    #[cfg(feature = "parallel")]
    {
        pairwise_distances_parallel(prev, curr)
    }
    #[cfg(not(feature = "parallel"))]
    {
        pairwise_distances_sequential(prev, curr)
    }
}

/// Minimum-cost matching of `min(rows, cols)` pairs.
pub fn solve_assignment(cost: &CostMatrix) -> NodeMapping {
    if cost.rows == 0 || cost.cols == 0 {
        return NodeMapping { pairs: Vec::new(), total_cost: 0.0 };
    }
    let mut pairs = if cost.rows <= cost.cols {
        solve_wide(cost).into_iter().enumerate().collect::<Vec<_>>()
    } else {
        let t = cost.transpose();
        let mut pairs: Vec<(usize, usize)> =
            solve_wide(&t).into_iter().enumerate().map(|(c, r)| (r, c)).collect();
        pairs.sort_unstable();
        pairs
    };
    pairs.sort_unstable();
    let total_cost = pairs.iter().map(|&(r, c)| cost.get(r, c)).sum();
    NodeMapping { pairs, total_cost }
}

/// Column assigned to each row, for `rows <= cols`.
fn solve_wide(cost: &CostMatrix) -> Vec<usize> {
    let (nr, nc) = (cost.rows, cost.cols);
    debug_assert!(nr <= nc);

    let mut u = vec![0.0; nr];
    let mut v = vec![0.0; nc];
    let mut col4row: Vec<Option<usize>> = vec![None; nr];
    let mut row4col: Vec<Option<usize>> = vec![None; nc];

    let mut path = vec![0usize; nc];
    let mut spc = vec![f64::INFINITY; nc];
    let mut in_sr = vec![false; nr];
    let mut in_sc = vec![false; nc];
    let mut remaining: Vec<usize> = Vec::with_capacity(nc);

    for cur_row in 0..nr {
        spc.fill(f64::INFINITY);
        in_sr.fill(false);
        in_sc.fill(false);
        remaining.clear();
        remaining.extend((0..nc).rev());

        let mut min_val = 0.0;
        let mut i = cur_row;
        let sink = loop {
            in_sr[i] = true;
            let mut lowest = f64::INFINITY;
            let mut pick = 0usize;
            for (slot, &j) in remaining.iter().enumerate() {
                let reduced = min_val + cost.get(i, j) - u[i] - v[j];
                if reduced < spc[j] {
                    path[j] = i;
                    spc[j] = reduced;
                }
                if spc[j] < lowest || (spc[j] == lowest && row4col[j].is_none()) {
                    lowest = spc[j];
                    pick = slot;
                }
            }
            min_val = lowest;
            let j = remaining.swap_remove(pick);
            in_sc[j] = true;
            match row4col[j] {
                None => break j,
                Some(r) => i = r,
            }
        };

        u[cur_row] += min_val;
        for r in 0..nr {
            if in_sr[r] && r != cur_row {
                let c = col4row[r].expect("scanned rows are assigned");
                u[r] += min_val - spc[c];
            }
        }
        for c in 0..nc {
            if in_sc[c] {
                v[c] -= min_val - spc[c];
            }
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = Some(r);
            let prev = col4row[r].replace(j);
            if r == cur_row {
                break;
            }
            j = prev.expect("rows on the path are assigned");
        }
    }

    col4row.into_iter().map(|c| c.expect("every row assigned")).collect()
}
