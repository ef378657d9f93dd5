//! Folding maps `φ_S`, restriction and unfolding, the averaging projection
//! `Θ`, and isometries between cells.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LaaksoError, Result};
use crate::graph::ApproxGraph;
use crate::space::{cells_at_level, Cell, LaaksoPointN, LaaksoSpace};

/// Even-periodic tent fold of position `i` onto the cell interval.
pub fn fold_position(space: &LaaksoSpace, cell: &Cell, i: u64) -> u64 {
    let s = cell.stride(space);
    let lo = cell.interval * s;
    let t = (i as i64 - lo as i64).rem_euclid(2 * s as i64) as u64;
    let t = if t > s { 2 * s - t } else { t };
    lo + t
}

/// `φ_S(p)`: fold the position, overwrite the first `n` fiber digits with
/// the cell word, canonicalize.
pub fn phi(space: &LaaksoSpace, cell: &Cell, p: &LaaksoPointN) -> Result<LaaksoPointN> {
    if cell.level > space.level() {
        return Err(LaaksoError::LevelMismatch { point: space.level(), cell: cell.level });
    }
    let i = fold_position(space, cell, p.position());
    let f = space.layout().with_prefix(p.fiber(), cell.word, cell.level);
    space.canonicalize(i, f)
}

/// `φ_S` on vertex indices.
pub fn fold_table(g: &ApproxGraph, cell: &Cell) -> Vec<usize> {
    let space = g.space();
    let layout = space.layout();
    g.vertices()
        .iter()
        .map(|p| {
            let i = fold_position(space, cell, p.position());
            g.vertex_at(i, layout.with_prefix(p.fiber(), cell.word, cell.level))
        })
        .collect()
}

/// Image of edge `e` under `φ_S`. Folds never cut an edge because cell
/// endpoints lie on the level-`N` grid.
pub fn fold_edge(g: &ApproxGraph, cell: &Cell, e: usize) -> usize {
    let space = g.space();
    let (i, w) = g.edge_label(e);
    let a = fold_position(space, cell, i);
    let b = fold_position(space, cell, i + 1);
    g.edge_id(a.min(b), space.layout().with_prefix(w, cell.word, cell.level))
}

/// `R_S f`: values of `f` on the vertices of `S`, in [`ApproxGraph::cell_vertices`] order.
pub fn restrict(g: &ApproxGraph, cell: &Cell, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != g.n_vertices() {
        return Err(LaaksoError::Domain { expected: g.n_vertices(), got: f.len() });
    }
    Ok(g.cell_vertices(cell).into_iter().map(|v| f[v]).collect())
}

/// `U_S h = h ∘ φ_S` for `h` given on the vertices of `S`.
pub fn unfold(g: &ApproxGraph, cell: &Cell, h: &[f64]) -> Result<Vec<f64>> {
    let verts = g.cell_vertices(cell);
    if h.len() != verts.len() {
        return Err(LaaksoError::Domain { expected: verts.len(), got: h.len() });
    }
    let mut full = vec![0.0; g.n_vertices()];
    for (&v, &x) in verts.iter().zip(h) {
        full[v] = x;
    }
    Ok(fold_table(g, cell).into_iter().map(|v| full[v]).collect())
}

/// `U_S R_S f = f ∘ φ_S`.
pub fn restrict_unfold(g: &ApproxGraph, cell: &Cell, f: &[f64]) -> Result<Vec<f64>> {
    unfold(g, cell, &restrict(g, cell, f)?)
}

/// `Θf = (1/m) Σ_{S ∈ 𝒮_n} f ∘ φ_S`, with fold tables for every level-`n`
/// cell precomputed.
#[derive(Debug, Clone)]
pub struct Theta {
    level: usize,
    cells: Vec<Cell>,
    tables: Vec<Vec<usize>>,
}

impl Theta {
    pub fn new(g: &ApproxGraph, n: usize) -> Result<Self> {
        let cells = cells_at_level(g.space(), n)?;
        let tables = cells.par_iter().map(|c| fold_table(g, c)).collect();
        Ok(Self { level: n, cells, tables })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn tables(&self) -> &[Vec<usize>] {
        &self.tables
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let m = self.tables.len() as f64;
        (0..f.len())
            .into_par_iter()
            .map(|v| self.tables.iter().map(|t| f[t[v]]).sum::<f64>() / m)
            .collect()
    }
}

pub fn theta(g: &ApproxGraph, n: usize, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != g.n_vertices() {
        return Err(LaaksoError::Domain { expected: g.n_vertices(), got: f.len() });
    }
    Ok(Theta::new(g, n)?.apply(f))
}

/// Violation counts for the four folding-lemma statements.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FoldingLemmaReport {
    /// Distance preserved between vertex pairs of every other same-level cell.
    pub isometry: usize,
    /// `φ_{S₁} ∘ φ_{S₂} = φ_{S₁}`.
    pub composition: usize,
    /// Fibers of one level-`n` fold are fibers of all of them.
    pub same_level: usize,
    /// Fibers of a level-`n` fold are collapsed by every level-`(n+1)` fold.
    pub next_level: usize,
    /// Identity on the target cell.
    pub identity: usize,
    pub pairs_checked: u64,
}

impl FoldingLemmaReport {
    pub fn violations(&self) -> usize {
        self.isometry + self.composition + self.same_level + self.next_level + self.identity
    }
}

/// Exhaustive check on `g` for cells of every level in `levels`.
pub fn check_folding_lemmas(g: &ApproxGraph, levels: std::ops::RangeInclusive<usize>) -> Result<FoldingLemmaReport> {
    let nv = g.n_vertices();
    let dist: Vec<Vec<u32>> = (0..nv).into_par_iter().map(|v| g.hops_from(v)).collect();
    let mut report = FoldingLemmaReport::default();
    let top = g.level();
    for n in levels {
        if n > top {
            return Err(LaaksoError::LevelMismatch { point: top, cell: n });
        }
        let theta = Theta::new(g, n)?;
        let cells = theta.cells();
        let tables = theta.tables();
        let members: Vec<Vec<usize>> = cells.iter().map(|c| g.cell_vertices(c)).collect();

        for (s, table) in tables.iter().enumerate() {
            for &v in &members[s] {
                if table[v] != v {
                    report.identity += 1;
                }
            }
            for (s2, verts) in members.iter().enumerate() {
                if s2 == s {
                    continue;
                }
                for (a, &u) in verts.iter().enumerate() {
                    for &w in &verts[a + 1..] {
                        report.pairs_checked += 1;
                        if dist[u][w] != dist[table[u]][table[w]] {
                            report.isometry += 1;
                        }
                    }
                }
            }
            for other in tables {
                for v in 0..nv {
                    if table[other[v]] != table[v] {
                        report.composition += 1;
                    }
                }
            }
        }

        // Kernel of the first fold, compared against every other fold.
        let key = &tables[0];
        for table in &tables[1..] {
            for x in 0..nv {
                for y in x + 1..nv {
                    if (key[x] == key[y]) != (table[x] == table[y]) {
                        report.same_level += 1;
                    }
                }
            }
        }
        if n < top {
            let finer = Theta::new(g, n + 1)?;
            for table in finer.tables() {
                for x in 0..nv {
                    for y in x + 1..nv {
                        if key[x] == key[y] && table[x] != table[y] {
                            report.next_level += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(report)
}

/// A vertex map from `source` onto `target` built from an interval
/// translation or reflection and the prefix substitution of the words.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellIsometry {
    pub source: Cell,
    pub target: Cell,
    pub reflect: bool,
    /// `(vertex of source, vertex of target)`, sorted by source vertex.
    pub map: Vec<(usize, usize)>,
}

impl CellIsometry {
    /// Image of a vertex of the source cell.
    pub fn image(&self, v: usize) -> Option<usize> {
        self.map.binary_search_by_key(&v, |&(a, _)| a).ok().map(|k| self.map[k].1)
    }

    /// Image of an edge of the source cell.
    pub fn edge_image(&self, g: &ApproxGraph, e: usize) -> usize {
        let space = g.space();
        let (i, w) = g.edge_label(e);
        let (lo1, _) = self.source.span(space);
        let (lo2, hi2) = self.target.span(space);
        let shift = |p: u64| if self.reflect { hi2 - (p - lo1) } else { lo2 + (p - lo1) };
        let (a, b) = (shift(i), shift(i + 1));
        g.edge_id(a.min(b), space.layout().with_prefix(w, self.target.word, self.target.level))
    }

    /// `f ∘ Φ̃` as a function on the source cell (zero elsewhere).
    pub fn pull_back(&self, g: &ApproxGraph, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; g.n_vertices()];
        for &(a, b) in &self.map {
            out[a] = f[b];
        }
        out
    }
}

/// A candidate map that failed the distance check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedIsometry {
    pub source: Cell,
    pub target: Cell,
    pub reflect: bool,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IsometrySearch {
    pub accepted: Vec<CellIsometry>,
    pub rejected: Vec<RejectedIsometry>,
}

/// Build and validate the translation- and reflection-type maps `S₁ → S₂`.
/// `dist` holds hop counts from every vertex.
pub fn cell_isometries(g: &ApproxGraph, s1: &Cell, s2: &Cell, dist: &[Vec<u32>]) -> Result<IsometrySearch> {
    if s1.level != s2.level {
        return Err(LaaksoError::Input(format!(
            "cells of levels {} and {} cannot be matched",
            s1.level, s2.level
        )));
    }
    let space = g.space();
    let layout = space.layout();
    let n = s1.level;
    let (lo1, _) = s1.span(space);
    let (lo2, hi2) = s2.span(space);
    let src = g.cell_vertices(s1);
    let mut dst = g.cell_vertices(s2);
    dst.sort_unstable();
    let mut out = IsometrySearch::default();

    for reflect in [false, true] {
        let mut map = Vec::with_capacity(src.len());
        for &v in &src {
            let p = g.vertex(v);
            let rep = space
                .class(p.position(), p.fiber())
                .into_iter()
                .find(|&f| layout.prefix(f, n) == s1.word)
                .expect("cell vertex has a representative with the cell word");
            let t = p.position() - lo1;
            let i = if reflect { hi2 - t } else { lo2 + t };
            map.push((v, g.vertex_at(i, layout.with_prefix(rep, s2.word, n))));
        }
        let reason = validate(&map, &dst, dist);
        match reason {
            None => out.accepted.push(CellIsometry { source: *s1, target: *s2, reflect, map }),
            Some(reason) => out.rejected.push(RejectedIsometry { source: *s1, target: *s2, reflect, reason }),
        }
    }
    Ok(out)
}

fn validate(map: &[(usize, usize)], dst: &[usize], dist: &[Vec<u32>]) -> Option<String> {
    let mut image: Vec<usize> = map.iter().map(|&(_, b)| b).collect();
    image.sort_unstable();
    if image != dst {
        return Some("image is not the target cell".into());
    }
    for (k, &(a, b)) in map.iter().enumerate() {
        for &(c, e) in &map[k + 1..] {
            if dist[a][c] != dist[b][e] {
                return Some(format!("distance {} between {a} and {c} becomes {}", dist[a][c], dist[b][e]));
            }
        }
    }
    None
}

/// Hop counts from every vertex.
pub fn all_pairs_hops(g: &ApproxGraph) -> Vec<Vec<u32>> {
    (0..g.n_vertices()).into_par_iter().map(|v| g.hops_from(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{inner_mu, ApproxGraph};
    use crate::space::{Fiber, Identification, JSequence};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn g(seq: JSequence, n: usize) -> ApproxGraph {
        let mode = if seq.fibers() == 1 { Identification::Diagonal } else { Identification::PerCoordinate };
        ApproxGraph::build(seq, n, mode).unwrap()
    }

    fn two(n: usize) -> ApproxGraph {
        g(JSequence::constant(2, 1).unwrap(), n)
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn tent_fold() {
        let graph = two(3);
        let space = graph.space();
        let cell = Cell::new(space, 2, 1, Fiber(0)).unwrap();
        let folded: Vec<u64> = (0..=8).map(|i| fold_position(space, &cell, i)).collect();
        assert_eq!(folded, vec![4, 3, 2, 3, 4, 3, 2, 3, 4]);
    }

    #[test]
    fn lemmas_hold_on_small_graphs() {
        for graph in [
            two(3),
            g(JSequence::constant(3, 1).unwrap(), 2),
            g(JSequence::periodic(vec![2, 3], 1).unwrap(), 3),
            g(JSequence::constant(2, 2).unwrap(), 2),
        ] {
            let top = graph.level();
            let report = check_folding_lemmas(&graph, 0..=top).unwrap();
            assert_eq!(report.violations(), 0, "{report:?}");
        }
    }

    #[test]
    fn phi_agrees_with_fold_table() {
        let graph = g(JSequence::constant(2, 2).unwrap(), 2);
        let space = graph.space();
        for cell in cells_at_level(space, 1).unwrap() {
            let table = fold_table(&graph, &cell);
            for (v, p) in graph.vertices().iter().enumerate() {
                let q = phi(space, &cell, p).unwrap();
                assert_eq!(graph.index_of(&q), Some(table[v]));
                assert!(cell.contains(space, &q));
            }
        }
    }

    #[test]
    fn fold_edge_matches_endpoints() {
        let graph = two(3);
        for cell in cells_at_level(graph.space(), 2).unwrap() {
            let table = fold_table(&graph, &cell);
            for e in 0..graph.n_edges() {
                let img = graph.edge(fold_edge(&graph, &cell, e));
                let edge = graph.edge(e);
                let mut a = [table[edge.u], table[edge.v]];
                let mut b = [img.u, img.v];
                a.sort();
                b.sort();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn unfold_restrict_properties() {
        let graph = two(2);
        let cells = cells_at_level(graph.space(), 1).unwrap();
        let c = vec![2.5; graph.n_vertices()];
        let f = random(graph.n_vertices(), 11);
        for s in &cells {
            assert_eq!(restrict_unfold(&graph, s, &c).unwrap(), c);
            let once = restrict_unfold(&graph, s, &f).unwrap();
            assert_eq!(restrict_unfold(&graph, s, &once).unwrap(), once);
        }
        // Supported in S', the pull-back vanishes exactly when f misses S.
        for s in &cells {
            let s_verts = graph.cell_vertices(s);
            for other in &cells {
                let mut h = vec![0.0; graph.n_vertices()];
                for v in graph.cell_vertices(other) {
                    h[v] = 1.0;
                }
                let pulled = restrict_unfold(&graph, s, &h).unwrap();
                let vanishes = pulled.iter().all(|&x| x == 0.0);
                let misses = s_verts.iter().all(|&v| h[v] == 0.0);
                assert_eq!(vanishes, misses);
            }
        }
        assert!(restrict(&graph, &cells[0], &[1.0]).is_err());
    }

    #[test]
    fn theta_is_a_self_adjoint_projection() {
        for graph in [two(2), two(3), g(JSequence::constant(3, 1).unwrap(), 2)] {
            for n in 0..=graph.level() {
                let th = Theta::new(&graph, n).unwrap();
                let f = random(graph.n_vertices(), 5);
                let h = random(graph.n_vertices(), 6);
                let tf = th.apply(&f);
                let ttf = th.apply(&tf);
                for (a, b) in tf.iter().zip(&ttf) {
                    assert!((a - b).abs() < 1e-12);
                }
                let lhs = inner_mu(&graph, &tf, &h);
                let rhs = inner_mu(&graph, &f, &th.apply(&h));
                assert!((lhs - rhs).abs() < 1e-12);
                let one = th.apply(&vec![1.0; graph.n_vertices()]);
                assert!(one.iter().all(|x| (x - 1.0).abs() < 1e-12));
                let sup = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                assert!(tf.iter().all(|x| x.abs() <= sup + 1e-12));
            }
        }
        let graph = two(2);
        let f = random(graph.n_vertices(), 9);
        assert_eq!(theta(&graph, 0, &f).unwrap(), f);
    }

    #[test]
    fn isometries_between_level_one_cells() {
        let graph = two(2);
        let dist = all_pairs_hops(&graph);
        let cells = cells_at_level(graph.space(), 1).unwrap();
        for s1 in &cells {
            for s2 in &cells {
                let found = cell_isometries(&graph, s1, s2, &dist).unwrap();
                assert!(found.accepted.len() >= 2, "{s1:?} -> {s2:?}: {:?}", found.rejected);
                if s1 == s2 {
                    let id = found.accepted.iter().find(|m| !m.reflect).unwrap();
                    assert!(id.map.iter().all(|(a, b)| a == b));
                }
                for iso in &found.accepted {
                    let t1 = fold_table(&graph, s1);
                    let t2 = fold_table(&graph, s2);
                    for &(a, b) in &iso.map {
                        assert_eq!(t2[b], iso.image(t1[a]).unwrap());
                    }
                }
            }
        }
    }
}
