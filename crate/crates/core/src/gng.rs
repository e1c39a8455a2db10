//! Incremental growing neural gas.
//!
//! One persistent model is updated signal by signal. Nodes carry stable
//! identifiers assigned in creation order and are stored sorted by id, so
//! snapshots have a deterministic order that survives node removal.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GngParams {
    /// Hard cap on the node count.
    pub max_nodes: usize,
    pub eps_winner: f64,
    pub eps_neighbor: f64,
    pub max_edge_age: u32,
    /// Signals between node insertions.
    pub insertion_interval: u64,
    /// Error scaling of the two nodes a new node is inserted between.
    pub error_split_decay: f64,
    /// Per-signal multiplicative decay of every node's error.
    pub error_global_decay: f64,
    /// Nodes that have not won for this many signals are removed. Groups
    /// of nodes that no longer win never age their mutual edges, so edge
    /// ageing alone cannot clear them.
    pub idle_limit: Option<u64>,
}

impl Default for GngParams {
    fn default() -> Self {
        Self {
            max_nodes: 100,
            eps_winner: 0.05,
            eps_neighbor: 0.006,
            max_edge_age: 50,
            insertion_interval: 100,
            error_split_decay: 0.5,
            error_global_decay: 0.995,
            idle_limit: Some(5_000),
        }
    }
}

impl GngParams {
    pub fn with_max_nodes(mut self, max_nodes: usize) -> Self {
        self.max_nodes = max_nodes;
        self
    }

    /// Checks everything except `max_nodes`, which callers usually derive later.
    pub(crate) fn validate_rates(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.eps_winner > 0.0 && self.eps_winner <= 1.0) {
            return bad("eps_winner must lie in (0,1]");
        }
        if !(self.eps_neighbor > 0.0 && self.eps_neighbor < 1.0) {
            return bad("eps_neighbor must lie in (0,1)");
        }
        if self.eps_neighbor >= self.eps_winner {
            return bad("eps_neighbor must be smaller than eps_winner");
        }
        if self.max_edge_age == 0 {
            return bad("max_edge_age must be positive");
        }
        if self.insertion_interval == 0 {
            return bad("insertion_interval must be positive");
        }
        if !(self.error_split_decay > 0.0 && self.error_split_decay < 1.0) {
            return bad("error_split_decay must lie in (0,1)");
        }
        if !(self.error_global_decay > 0.0 && self.error_global_decay < 1.0) {
            return bad("error_global_decay must lie in (0,1)");
        }
        if self.idle_limit == Some(0) {
            return bad("idle_limit must be positive");
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_nodes < 2 {
            return Err(Error::InvalidParameter("max_nodes must be at least 2".into()));
        }
        self.validate_rates()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GngNode {
    pub id: u64,
    pub position: Vec<f64>,
    pub error: f64,
    /// Signal count at the node's last win (or its creation).
    pub last_won: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GngEdge {
    /// Smaller endpoint id.
    pub a: u64,
    /// Larger endpoint id.
    pub b: u64,
    pub age: u32,
}

impl GngEdge {
    fn touches(&self, id: u64) -> bool {
        self.a == id || self.b == id
    }

    fn other(&self, id: u64) -> u64 {
        if self.a == id {
            self.b
        } else {
            self.a
        }
    }
}

fn ordered(x: u64, y: u64) -> (u64, u64) {
    if x < y {
        (x, y)
    } else {
        (y, x)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Prototype positions copied out of a model, in id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GngSnapshot {
    pub ids: Vec<u64>,
    pub positions: Vec<Vec<f64>>,
}

impl GngSnapshot {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GngModel {
    nodes: Vec<GngNode>,
    edges: Vec<GngEdge>,
    params: GngParams,
    signal_count: u64,
    next_id: u64,
    dim: usize,
}

impl GngModel {
    /// Two-node model with one fresh edge between the given positions.
    pub fn new(first: &[f64], second: &[f64], params: GngParams) -> Result<Self> {
        params.validate()?;
        if first.len() != second.len() {
            return Err(Error::DimensionMismatch { expected: first.len(), found: second.len() });
        }
        if first.is_empty() {
            return Err(Error::InvalidParameter("positions must be non-empty".into()));
        }
        if first.iter().chain(second).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: 0 });
        }
        if first == second {
            return Err(Error::Degenerate("initial nodes must be distinct".into()));
        }
        Ok(Self {
            nodes: vec![
                GngNode { id: 0, position: first.to_vec(), error: 0.0, last_won: 0 },
                GngNode { id: 1, position: second.to_vec(), error: 0.0, last_won: 0 },
            ],
            edges: vec![GngEdge { a: 0, b: 1, age: 0 }],
            params,
            signal_count: 0,
            next_id: 2,
            dim: first.len(),
        })
    }

    pub fn nodes(&self) -> &[GngNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[GngEdge] {
        &self.edges
    }

    pub fn params(&self) -> &GngParams {
        &self.params
    }

    pub fn signal_count(&self) -> u64 {
        self.signal_count
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn slot(&self, id: u64) -> usize {
        self.nodes.binary_search_by_key(&id, |n| n.id).expect("live node id")
    }

    fn edge_slot(&self, x: u64, y: u64) -> Option<usize> {
        let (a, b) = ordered(x, y);
        self.edges.iter().position(|e| e.a == a && e.b == b)
    }

    pub fn neighbors(&self, id: u64) -> impl Iterator<Item = u64> + '_ {
        self.edges.iter().filter(move |e| e.touches(id)).map(move |e| e.other(id))
    }

    /// Slots of the nearest and second-nearest nodes. Ties go to the lower id.
    fn two_nearest(&self, x: &[f64]) -> (usize, usize) {
        let mut best = (f64::INFINITY, 0usize);
        let mut second = (f64::INFINITY, 0usize);
        for (i, n) in self.nodes.iter().enumerate() {
            let d = sq_dist(&n.position, x);
            if d < best.0 {
                second = best;
                best = (d, i);
            } else if d < second.0 {
                second = (d, i);
            }
        }
        (best.1, second.1)
    }

    /// One adaptation step for input signal `x`.
    pub fn present(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: 0 });
        }
        self.signal_count += 1;

        let (s1, s2) = self.two_nearest(x);
        let winner = self.nodes[s1].id;
        let runner_up = self.nodes[s2].id;

        for e in self.edges.iter_mut().filter(|e| e.touches(winner)) {
            e.age += 1;
        }

        let eps_w = self.params.eps_winner;
        let eps_n = self.params.eps_neighbor;
        {
            let node = &mut self.nodes[s1];
            node.last_won = self.signal_count;
            node.error += sq_dist(&node.position, x);
            for (p, v) in node.position.iter_mut().zip(x) {
                *p += eps_w * (v - *p);
            }
        }
        let neighbor_ids: Vec<u64> = self.neighbors(winner).collect();
        for nid in neighbor_ids {
            let slot = self.slot(nid);
            for (p, v) in self.nodes[slot].position.iter_mut().zip(x) {
                *p += eps_n * (v - *p);
            }
        }

        match self.edge_slot(winner, runner_up) {
            Some(i) => self.edges[i].age = 0,
            None => {
                let (a, b) = ordered(winner, runner_up);
                self.edges.push(GngEdge { a, b, age: 0 });
            }
        }

        self.prune();

        if self.signal_count.is_multiple_of(self.params.insertion_interval) && self.nodes.len() < self.params.max_nodes {
            self.insert();
        }

        let d = self.params.error_global_decay;
        for n in &mut self.nodes {
            n.error *= d;
        }
        Ok(())
    }

    /// Drops over-aged edges, then nodes left without edges or idle past
    /// the limit, while at least two nodes remain.
    fn prune(&mut self) {
        let max_age = self.params.max_edge_age;
        self.edges.retain(|e| e.age <= max_age);
        let now = self.signal_count;
        let idle = |n: &GngNode| self.params.idle_limit.is_some_and(|l| now - n.last_won > l);
        let mut doomed: Vec<u64> = self
            .nodes
            .iter()
            .filter(|n| idle(n) || !self.edges.iter().any(|e| e.touches(n.id)))
            .map(|n| n.id)
            .collect();
        doomed.truncate(self.nodes.len().saturating_sub(2));
        if doomed.is_empty() {
            return;
        }
        self.nodes.retain(|n| !doomed.contains(&n.id));
        self.edges.retain(|e| !doomed.contains(&e.a) && !doomed.contains(&e.b));
    }

    fn insert(&mut self) {
        let q_slot = max_error_slot(self.nodes.iter().enumerate());
        let q_id = self.nodes[q_slot].id;
        // An isolated q can only happen at two nodes; fall back to the
        // highest-error other node.
        let f_slot = {
            let nbrs: Vec<usize> = self.neighbors(q_id).map(|id| self.slot(id)).collect();
            if nbrs.is_empty() {
                max_error_slot(self.nodes.iter().enumerate().filter(|(i, _)| *i != q_slot))
            } else {
                max_error_slot(nbrs.iter().map(|&i| (i, &self.nodes[i])))
            }
        };
        let f_id = self.nodes[f_slot].id;

        let position: Vec<f64> = self.nodes[q_slot]
            .position
            .iter()
            .zip(&self.nodes[f_slot].position)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();

        let alpha = self.params.error_split_decay;
        self.nodes[q_slot].error *= alpha;
        self.nodes[f_slot].error *= alpha;
        let error = self.nodes[q_slot].error;

        let r_id = self.next_id;
        self.next_id += 1;
        self.nodes.push(GngNode { id: r_id, position, error, last_won: self.signal_count });

        if let Some(i) = self.edge_slot(q_id, f_id) {
            self.edges.remove(i);
        }
        self.edges.push(GngEdge { a: q_id, b: r_id, age: 0 });
        let (a, b) = ordered(f_id, r_id);
        self.edges.push(GngEdge { a, b, age: 0 });
    }

    /// Presents every vector `passes` times, reshuffling the order each pass.
    pub fn fit_batch<R: Rng + ?Sized>(&mut self, xs: &[Vec<f64>], passes: usize, rng: &mut R) -> Result<()> {
        if xs.is_empty() {
            return Err(Error::EmptyInput("gng batch"));
        }
        if passes == 0 {
            return Err(Error::InvalidParameter("passes must be positive".into()));
        }
        let mut order: Vec<usize> = (0..xs.len()).collect();
        for _ in 0..passes {
            order.shuffle(rng);
            for &i in &order {
                self.present(&xs[i])?;
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> GngSnapshot {
        GngSnapshot {
            ids: self.nodes.iter().map(|n| n.id).collect(),
            positions: self.nodes.iter().map(|n| n.position.clone()).collect(),
        }
    }

    /// Checks the structural invariants of the graph.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n < 2 || n > self.params.max_nodes.max(2) {
            return Err(Error::Degenerate(format!("node count {n} outside [2, {}]", self.params.max_nodes)));
        }
        if self.nodes.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(Error::Degenerate("node ids not strictly increasing".into()));
        }
        for node in &self.nodes {
            if node.error.is_nan() || node.error < 0.0 || node.position.iter().any(|v| !v.is_finite()) {
                return Err(Error::Degenerate(format!("node {} has invalid state", node.id)));
            }
        }
        for e in &self.edges {
            if e.a >= e.b {
                return Err(Error::Degenerate(format!("edge ({}, {}) is a self-edge or unordered", e.a, e.b)));
            }
            if e.age > self.params.max_edge_age {
                return Err(Error::Degenerate(format!("edge ({}, {}) too old", e.a, e.b)));
            }
            let live = |id| self.nodes.binary_search_by_key(&id, |n: &GngNode| n.id).is_ok();
            if !live(e.a) || !live(e.b) {
                return Err(Error::Degenerate(format!("edge ({}, {}) has a dead endpoint", e.a, e.b)));
            }
        }
        Ok(())
    }
}

/// Highest error wins; ties go to the earliest slot.
fn max_error_slot<'a>(it: impl Iterator<Item = (usize, &'a GngNode)>) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (i, n) in it {
        if best.is_none_or(|(_, e)| n.error > e) {
            best = Some((i, n.error));
        }
    }
    best.expect("at least one candidate").0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn params(max_nodes: usize) -> GngParams {
        GngParams::default().with_max_nodes(max_nodes)
    }

    #[test]
    fn init_contract() {
        let m = GngModel::new(&[0.0, 0.0], &[1.0, 1.0], params(10)).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.edges(), &[GngEdge { a: 0, b: 1, age: 0 }]);
        assert!(m.nodes().iter().all(|n| n.error == 0.0));

        let m3 = GngModel::new(&[0.0, 0.0, 1.0], &[1.0, 1.0, 0.0], params(10)).unwrap();
        assert_eq!(m3.dim(), 3);
        assert_eq!(m3.len(), 2);
    }

    #[test]
    fn init_errors() {
        assert!(matches!(GngModel::new(&[1.0, 1.0], &[1.0, 1.0], params(10)), Err(Error::Degenerate(_))));
        assert!(matches!(GngModel::new(&[1.0], &[1.0, 1.0], params(10)), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(GngModel::new(&[f64::NAN], &[1.0], params(10)), Err(Error::NonFinite { .. })));
        assert!(GngModel::new(&[0.0], &[1.0], params(1)).is_err());
        let bad = GngParams { eps_neighbor: 0.1, eps_winner: 0.05, ..params(10) };
        assert!(GngModel::new(&[0.0], &[1.0], bad).is_err());
    }

    #[test]
    fn winner_moves_by_eps_winner() {
        let p = GngParams { eps_winner: 0.5, eps_neighbor: 0.1, ..params(10) };
        let mut m = GngModel::new(&[0.0, 0.0], &[10.0, 10.0], p).unwrap();
        m.present(&[0.1, 0.0]).unwrap();
        assert_eq!(m.nodes()[0].position, vec![0.05, 0.0]);
    }

    #[test]
    fn signal_on_node_does_not_move_it() {
        let mut m = GngModel::new(&[0.0, 0.0], &[10.0, 10.0], params(10)).unwrap();
        m.present(&[10.0, 10.0]).unwrap();
        assert_eq!(m.nodes()[1].position, vec![10.0, 10.0]);
        assert_eq!(m.nodes()[1].error, 0.0);
    }

    #[test]
    fn inserts_one_node_per_interval() {
        let p = GngParams { insertion_interval: 10, ..params(10) };
        let mut m = GngModel::new(&[0.0, 0.0], &[1.0, 1.0], p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..9 {
            m.present(&[rng.random::<f64>(), rng.random::<f64>()]).unwrap();
        }
        assert_eq!(m.len(), 2);
        m.present(&[0.3, 0.7]).unwrap();
        assert_eq!(m.len(), 3);
        m.validate().unwrap();
    }

    #[test]
    fn respects_node_cap() {
        let p = GngParams { insertion_interval: 5, ..params(4) };
        let mut m = GngModel::new(&[0.0, 0.0], &[1.0, 1.0], p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            m.present(&[rng.random::<f64>(), rng.random::<f64>()]).unwrap();
            assert!(m.len() <= 4);
        }
        assert_eq!(m.len(), 4);
    }

    #[test]
    fn fit_batch_counts_signals() {
        let mut m = GngModel::new(&[0.0, 0.0], &[1.0, 1.0], params(10)).unwrap();
        let xs: Vec<Vec<f64>> = (0..37).map(|i| vec![i as f64 / 37.0, 0.5]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        m.fit_batch(&xs, 1, &mut rng).unwrap();
        assert_eq!(m.signal_count(), 37);
        m.fit_batch(&xs, 2, &mut rng).unwrap();
        assert_eq!(m.signal_count(), 111);
        assert!(m.fit_batch(&[], 1, &mut rng).is_err());
    }

    #[test]
    fn two_clusters_attract_every_node() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let centers = [[0.0, 0.0], [3.0, 4.0]];
        let xs: Vec<Vec<f64>> = (0..1000)
            .map(|i| {
                let c = centers[i % 2];
                vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]
            })
            .collect();
        let mut m = GngModel::new(&xs[0], &xs[1], params(20)).unwrap();
        m.fit_batch(&xs, 10, &mut rng).unwrap();
        for n in m.nodes() {
            let d = centers.iter().map(|c| sq_dist(c, &n.position).sqrt()).fold(f64::INFINITY, f64::min);
            assert!(d <= 1.0, "node {} at distance {d}", n.id);
        }
    }

    #[test]
    fn repeated_point_pulls_nodes_in() {
        let mut m = GngModel::new(&[-1.0, 2.0], &[3.0, 0.5], params(10)).unwrap();
        let target = vec![vec![0.5, 0.5]; 50];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mean_dist = |m: &GngModel| {
            m.nodes().iter().map(|n| sq_dist(&n.position, &target[0]).sqrt()).sum::<f64>() / m.len() as f64
        };
        let mut prev = mean_dist(&m);
        for _ in 0..10 {
            m.fit_batch(&target, 1, &mut rng).unwrap();
            let cur = mean_dist(&m);
            assert!(cur <= prev + 1e-12, "{cur} > {prev}");
            prev = cur;
        }
    }

    #[test]
    fn snapshot_is_a_copy() {
        let mut m = GngModel::new(&[0.0, 0.0], &[1.0, 1.0], params(10)).unwrap();
        let s = m.snapshot();
        assert_eq!(s.len(), 2);
        assert_eq!(s, m.snapshot());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            m.present(&[rng.random::<f64>(), rng.random::<f64>()]).unwrap();
        }
        assert_eq!(s.positions, vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn present_rejects_bad_input() {
        let mut m = GngModel::new(&[0.0, 0.0], &[1.0, 1.0], params(10)).unwrap();
        assert!(m.present(&[0.0]).is_err());
        assert!(m.present(&[0.0, f64::INFINITY]).is_err());
        assert_eq!(m.signal_count(), 0);
    }
}
