//! The level-`N` metric graph `G_N`.
//!
//! Vertices are canonical points `(i/d_N, fiber)` sorted by position then
//! fiber. Edge `e = i·2^{Nk} + w` joins `(i, w)` to `(i+1, w)`; parallel
//! edges are kept, so there are exactly `d_N·2^{Nk}` of them.

mod dirichlet;
mod export;
mod form;

use std::collections::VecDeque;

pub use dirichlet::{effective_resistance, DirichletProblem, SolverKind, DENSE_LIMIT};
pub use form::{coordinate, inner_mu, mgug_integral, mgug_of, QuadraticForm};

use crate::error::{LaaksoError, Result};
use crate::space::{cells_containing, Cell, Fiber, Identification, JSequence, LaaksoPointN, LaaksoSpace};

/// Default refusal threshold for [`ApproxGraph::build`].
pub const DEFAULT_VERTEX_CAP: u64 = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
}

#[derive(Debug, Clone)]
pub struct ApproxGraph {
    space: LaaksoSpace,
    vertices: Vec<LaaksoPointN>,
    /// `offsets[i]..offsets[i+1]` are the vertices at position `i`.
    offsets: Vec<usize>,
    edges: Vec<Edge>,
    adj_offsets: Vec<usize>,
    /// `(neighbor, edge)` pairs, grouped by vertex.
    adj: Vec<(usize, usize)>,
    measure: Vec<f64>,
}

impl ApproxGraph {
    pub fn build(seq: JSequence, level: usize, mode: Identification) -> Result<Self> {
        Self::build_capped(seq, level, mode, DEFAULT_VERTEX_CAP)
    }

    pub fn build_capped(seq: JSequence, level: usize, mode: Identification, cap: u64) -> Result<Self> {
        if level == 0 {
            return Err(LaaksoError::Config("graph level must be at least 1".into()));
        }
        if seq.fibers() == 0 {
            return Err(LaaksoError::Config("fiber count k must be at least 1".into()));
        }
        if mode == Identification::Diagonal && seq.fibers() >= 2 {
            return Err(LaaksoError::Config(
                "diagonal identification with k >= 2 gives a disconnected graph; use per-coordinate".into(),
            ));
        }
        seq.check_level(level)?;
        let bits = level * seq.fibers();
        let d = seq.d_of(level)?;
        let estimate = (d + 1).saturating_mul(1u64.checked_shl(bits as u32).unwrap_or(u64::MAX));
        if bits > 40 || estimate > cap {
            return Err(LaaksoError::TooLarge { estimate, cap });
        }
        let space = LaaksoSpace::new(seq, level, mode)?;
        Ok(Self::from_space(space))
    }

    fn from_space(space: LaaksoSpace) -> Self {
        let d = space.d();
        let layout = space.layout();
        let fibers = layout.count();

        let mut vertices = Vec::new();
        let mut offsets = Vec::with_capacity(d as usize + 2);
        for i in 0..=d {
            offsets.push(vertices.len());
            let n = space.fresh_level(i);
            for w in 0..fibers {
                let f = Fiber(w);
                if n == 0 || layout.canonical(f, n, space.mode()) == f {
                    vertices.push(space.canonicalize(i, f).expect("in range"));
                }
            }
        }
        offsets.push(vertices.len());

        let mut graph = Self {
            space,
            vertices,
            offsets,
            edges: Vec::with_capacity((d * fibers) as usize),
            adj_offsets: Vec::new(),
            adj: Vec::new(),
            measure: Vec::new(),
        };
        for i in 0..d {
            for w in 0..fibers {
                let u = graph.vertex_at(i, Fiber(w));
                let v = graph.vertex_at(i + 1, Fiber(w));
                graph.edges.push(Edge { u, v });
            }
        }

        let n = graph.vertices.len();
        let mut degree = vec![0usize; n];
        for e in &graph.edges {
            degree[e.u] += 1;
            degree[e.v] += 1;
        }
        let mut adj_offsets = vec![0usize; n + 1];
        for v in 0..n {
            adj_offsets[v + 1] = adj_offsets[v] + degree[v];
        }
        let mut fill = adj_offsets.clone();
        let mut adj = vec![(0, 0); adj_offsets[n]];
        for (id, e) in graph.edges.iter().enumerate() {
            adj[fill[e.u]] = (e.v, id);
            fill[e.u] += 1;
            adj[fill[e.v]] = (e.u, id);
            fill[e.v] += 1;
        }
        let edge_mass = graph.edge_measure();
        graph.measure = degree.iter().map(|&k| 0.5 * k as f64 * edge_mass).collect();
        graph.adj_offsets = adj_offsets;
        graph.adj = adj;
        graph
    }

    pub fn space(&self) -> &LaaksoSpace {
        &self.space
    }

    pub fn level(&self) -> usize {
        self.space.level()
    }

    /// `d_N`.
    pub fn d(&self) -> u64 {
        self.space.d()
    }

    /// `2^{Nk}`.
    pub fn fibers(&self) -> u64 {
        self.space.layout().count()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[LaaksoPointN] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> LaaksoPointN {
        self.vertices[v]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> Edge {
        self.edges[e]
    }

    /// Left position and raw fiber of edge `e`.
    pub fn edge_label(&self, e: usize) -> (u64, Fiber) {
        let f = self.fibers();
        (e as u64 / f, Fiber(e as u64 % f))
    }

    pub fn edge_id(&self, position: u64, fiber: Fiber) -> usize {
        (position * self.fibers() + fiber.0) as usize
    }

    /// Edge length `1/d_N`.
    pub fn edge_length(&self) -> f64 {
        1.0 / self.d() as f64
    }

    /// Edge measure `(1/d_N)·2^{-Nk}`.
    pub fn edge_measure(&self) -> f64 {
        1.0 / (self.d() as f64 * self.fibers() as f64)
    }

    /// Default conductance `d_N·2^{-Nk}`.
    pub fn default_conductance(&self) -> f64 {
        self.d() as f64 / self.fibers() as f64
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn measure_of(&self, set: &[usize]) -> f64 {
        set.iter().map(|&v| self.measure[v]).sum()
    }

    /// `(neighbor, edge)` pairs of `v`.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[self.adj_offsets[v]..self.adj_offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj_offsets[v + 1] - self.adj_offsets[v]
    }

    /// Vertex index of the class of `(i, f)`; `f` need not be canonical.
    pub fn vertex_at(&self, i: u64, f: Fiber) -> usize {
        let c = self.space.canonical_fiber(i, f);
        let lo = self.offsets[i as usize];
        let hi = self.offsets[i as usize + 1];
        lo + self.vertices[lo..hi]
            .binary_search_by(|p| p.fiber().cmp(&c))
            .expect("canonical fiber is a vertex")
    }

    pub fn index_of(&self, p: &LaaksoPointN) -> Option<usize> {
        let i = p.position() as usize;
        if i + 1 >= self.offsets.len() {
            return None;
        }
        let lo = self.offsets[i];
        let hi = self.offsets[i + 1];
        self.vertices[lo..hi].binary_search_by(|q| q.fiber().cmp(&p.fiber())).ok().map(|k| lo + k)
    }

    /// Vertices at position `i`.
    pub fn column(&self, i: u64) -> std::ops::Range<usize> {
        self.offsets[i as usize]..self.offsets[i as usize + 1]
    }

    /// Interval coordinate of `v`.
    pub fn x(&self, v: usize) -> f64 {
        self.space.x(self.vertices[v].position())
    }

    /// Hop counts from `source` (multiply by `1/d_N` for distances).
    pub fn hops_from(&self, source: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n_vertices()];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            let next = dist[v] + 1;
            for &(u, _) in self.neighbors(v) {
                if dist[u] == u32::MAX {
                    dist[u] = next;
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        let h = self.edge_length();
        self.hops_from(source).into_iter().map(|k| k as f64 * h).collect()
    }

    pub fn geodesic_distance(&self, p: usize, q: usize) -> Result<f64> {
        let k = self.hops_from(p)[q];
        if k == u32::MAX {
            return Err(LaaksoError::Input(format!("vertices {p} and {q} are not connected")));
        }
        Ok(k as f64 * self.edge_length())
    }

    /// Largest hop count within distance `r`.
    pub fn radius_hops(&self, r: f64) -> u32 {
        (r * self.d() as f64 + 1e-9).floor().max(0.0).min(u32::MAX as f64 - 1.0) as u32
    }

    /// Closed ball `{v : d(x, v) ≤ r}`, sorted.
    pub fn ball(&self, x: usize, r: f64) -> Vec<usize> {
        let k = self.radius_hops(r);
        self.ball_hops(&self.hops_from(x), k)
    }

    /// Vertices with hop count at most `k` in a precomputed hop vector.
    pub fn ball_hops(&self, hops: &[u32], k: u32) -> Vec<usize> {
        (0..self.n_vertices()).filter(|&v| hops[v] <= k).collect()
    }

    /// Level-`n` cell containing edge `e`.
    pub fn edge_cell(&self, e: usize, n: usize) -> Cell {
        let (i, w) = self.edge_label(e);
        let s = self.d() / self.space.d_at(n);
        Cell {
            level: n,
            interval: i / s,
            word: self.space.layout().prefix(w, n),
        }
    }

    /// Edges of a cell, ascending.
    pub fn cell_edges(&self, cell: &Cell) -> Vec<usize> {
        let (lo, hi) = cell.span(&self.space);
        let layout = self.space.layout();
        let n = cell.level;
        let tail_bits = (self.level() - n) * self.space.k();
        let mut out = Vec::with_capacity(((hi - lo) << tail_bits) as usize);
        for i in lo..hi {
            for tail in 0..1u64 << tail_bits {
                let w = layout.with_prefix(crate::space::spread_tail(layout, n, tail), cell.word, n);
                out.push(self.edge_id(i, w));
            }
        }
        out.sort_unstable();
        out
    }

    /// Vertices of a cell, ascending.
    pub fn cell_vertices(&self, cell: &Cell) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .cell_edges(cell)
            .into_iter()
            .flat_map(|e| [self.edges[e].u, self.edges[e].v])
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Level-`n` cells containing vertex `v`.
    pub fn vertex_cells(&self, v: usize, n: usize) -> Vec<Cell> {
        cells_containing(&self.space, n, &self.vertices[v])
    }

    pub fn is_connected(&self) -> bool {
        self.n_vertices() == 0 || self.hops_from(0).iter().all(|&h| h != u32::MAX)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn g(j: u32, k: usize, n: usize) -> ApproxGraph {
        let mode = if k == 1 { Identification::Diagonal } else { Identification::PerCoordinate };
        ApproxGraph::build(JSequence::constant(j, k).unwrap(), n, mode).unwrap()
    }

    #[test]
    fn counts_two_one() {
        let expected = [(5, 4), (14, 16), (44, 64), (152, 256), (560, 1024), (2144, 4096)];
        for (n, &(v, e)) in (1..=6).zip(&expected) {
            let graph = g(2, 1, n);
            assert_eq!((graph.n_vertices(), graph.n_edges()), (v, e), "N = {n}");
        }
    }

    #[test]
    fn mixed_sequence_counts() {
        let seq = JSequence::explicit(vec![2, 3, 2], 1).unwrap();
        let graph = ApproxGraph::build(seq, 3, Identification::Diagonal).unwrap();
        assert_eq!((graph.n_vertices(), graph.n_edges()), (60, 96));
    }

    #[test]
    fn measure_is_probability_and_graph_connected() {
        for graph in [g(2, 1, 4), g(3, 1, 3), g(2, 2, 3)] {
            let total: f64 = graph.measure().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(graph.is_connected());
            assert_eq!(graph.n_edges() as u64, graph.d() * graph.fibers());
        }
    }

    #[test]
    fn rejects_disconnected_and_oversized() {
        let seq = JSequence::constant(2, 2).unwrap();
        assert!(matches!(
            ApproxGraph::build(seq.clone(), 2, Identification::Diagonal),
            Err(LaaksoError::Config(_))
        ));
        assert!(matches!(
            ApproxGraph::build_capped(seq, 6, Identification::PerCoordinate, 1000),
            Err(LaaksoError::TooLarge { .. })
        ));
        let short = JSequence::explicit(vec![2, 2], 1).unwrap();
        assert!(matches!(
            ApproxGraph::build(short, 5, Identification::Diagonal),
            Err(LaaksoError::SequenceTooShort { .. })
        ));
    }

    #[test]
    fn distance_examples() {
        for n in 1..=5 {
            let graph = g(2, 1, n);
            let zero = graph.space().layout().count() - 1;
            let a = graph.vertex_at(0, Fiber(0));
            let b = graph.vertex_at(graph.d(), Fiber(0));
            let c = graph.vertex_at(0, Fiber(zero));
            assert!((graph.geodesic_distance(a, b).unwrap() - 1.0).abs() < 1e-12);
            assert!((graph.geodesic_distance(a, c).unwrap() - 1.0).abs() < 1e-12);
            assert_eq!(graph.geodesic_distance(a, a).unwrap(), 0.0);
        }
    }

    #[test]
    fn balls() {
        let graph = g(2, 1, 4);
        let x = graph.vertex_at(5, Fiber(3));
        assert_eq!(graph.ball(x, 0.0), vec![x]);
        let all = graph.ball(x, 2.0);
        assert_eq!(all.len(), graph.n_vertices());
        assert!((graph.measure_of(&all) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ahlfors_regular_ball_growth() {
        let graph = g(2, 1, 6);
        let d = graph.d() as f64;
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for x in (0..graph.n_vertices()).step_by(37) {
            let hops = graph.hops_from(x);
            let mut r = 4.0 / d;
            while r <= 0.25 + 1e-12 {
                let ratio = graph.measure_of(&graph.ball_hops(&hops, graph.radius_hops(r))) / (r * r);
                lo = lo.min(ratio);
                hi = hi.max(ratio);
                r *= 2.0;
            }
        }
        assert!(hi / lo <= 16.0, "spread {}", hi / lo);
    }

    #[test]
    fn cells_partition_edges() {
        let graph = g(2, 1, 4);
        for n in 0..=4 {
            let cells = crate::space::cells_at_level(graph.space(), n).unwrap();
            let mut seen = vec![0u32; graph.n_edges()];
            for c in &cells {
                for e in graph.cell_edges(c) {
                    assert_eq!(graph.edge_cell(e, n), *c);
                    seen[e] += 1;
                }
            }
            assert!(seen.iter().all(|&s| s == 1));
        }
    }

    #[test]
    fn cell_vertices_match_containment() {
        let graph = g(2, 1, 3);
        let space = graph.space();
        for n in 0..=3 {
            for c in crate::space::cells_at_level(space, n).unwrap() {
                let listed = graph.cell_vertices(&c);
                let direct: Vec<usize> = (0..graph.n_vertices())
                    .filter(|&v| c.contains(space, &graph.vertex(v)))
                    .collect();
                assert_eq!(listed, direct);
            }
        }
    }
}
