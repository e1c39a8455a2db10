//! Exact brute-force k-nearest-neighbour voting.
//!
//! Neighbour rank ties are broken by reference insertion index. Vote ties
//! are broken by the smaller summed distance of each class's voters, then
//! by the smaller class id.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::stream::ClassId;

/// Labeled reference points for k-NN voting.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    positions: Vec<Vec<f64>>,
    labels: Vec<ClassId>,
    dim: usize,
}

impl ReferenceSet {
    pub fn new(positions: Vec<Vec<f64>>, labels: Vec<ClassId>) -> Result<Self> {
        if positions.len() != labels.len() {
            return Err(Error::LengthMismatch { left: positions.len(), right: labels.len() });
        }
        let dim = positions.first().ok_or(Error::EmptyInput("reference set"))?.len();
        if let Some(p) = positions.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
        }
        Ok(Self { positions, labels, dim })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Vec<f64>, ClassId)>) -> Result<Self> {
        let (positions, labels) = pairs.into_iter().unzip();
        Self::new(positions, labels)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }
}

/// Neighbour candidate ordered by (distance, insertion index).
#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.index.cmp(&other.index))
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices and squared distances of the `k` nearest references, nearest first.
pub fn nearest(query: &[f64], refs: &ReferenceSet, k: usize) -> Result<Vec<(usize, f64)>> {
    if query.len() != refs.dim {
        return Err(Error::DimensionMismatch { expected: refs.dim, found: query.len() });
    }
    let k = k.clamp(1, refs.len());
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
    for (index, p) in refs.positions.iter().enumerate() {
        let c = Candidate { dist: sq_dist(query, p), index };
        if heap.len() < k {
            heap.push(c);
        } else if c < *heap.peek().expect("k >= 1") {
            heap.pop();
            heap.push(c);
        }
    }
    Ok(heap.into_sorted_vec().into_iter().map(|c| (c.index, c.dist)).collect())
}

/// Majority label among the `k` nearest references (`k` clamped to `[1, |refs|]`).
pub fn predict(query: &[f64], refs: &ReferenceSet, k: usize) -> Result<ClassId> {
    let neighbours = nearest(query, refs, k)?;
    // (class, votes, summed distance)
    let mut tally: Vec<(ClassId, usize, f64)> = Vec::with_capacity(neighbours.len());
    for (index, d2) in neighbours {
        let label = refs.labels[index];
        let d = d2.sqrt();
        match tally.iter_mut().find(|t| t.0 == label) {
            Some(t) => {
                t.1 += 1;
                t.2 += d;
            }
            None => tally.push((label, 1, d)),
        }
    }
    let best = tally
        .into_iter()
        .min_by(|a, b| b.1.cmp(&a.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(&b.0)))
        .expect("at least one neighbour");
    Ok(best.0)
}

/// Elementwise [`predict`] without threads.
pub fn predict_batch_sequential(queries: &[Vec<f64>], refs: &ReferenceSet, k: usize) -> Result<Vec<ClassId>> {
    queries.iter().map(|q| predict(q, refs, k)).collect()
}

/// Elementwise [`predict`] spread over the rayon pool.
#[cfg(feature = "parallel")]
pub fn predict_batch_parallel(queries: &[Vec<f64>], refs: &ReferenceSet, k: usize) -> Result<Vec<ClassId>> {
    use rayon::prelude::*;
    queries.par_iter().map(|q| predict(q, refs, k)).collect()
}

/// Elementwise [`predict`]; parallel when the `parallel` feature is on.
pub fn predict_batch(queries: &[Vec<f64>], refs: &ReferenceSet, k: usize) -> Result<Vec<ClassId>> {
    #[cfg(feature = "parallel")]
    {
        predict_batch_parallel(queries, refs, k)
    }
    #[cfg(not(feature = "parallel"))]
    {
        predict_batch_sequential(queries, refs, k)
    }
}
