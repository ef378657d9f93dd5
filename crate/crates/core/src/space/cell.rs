use serde::Serialize;

use super::fiber::{Fiber, FiberLayout};
use super::point::{LaaksoPointN, LaaksoSpace};
use crate::error::{LaaksoError, Result};

/// An `n`-cell: the interval `[a/d_n, (a+1)/d_n]` times the fiber cylinder of
/// the `n`-digit word (one word per coordinate, packed with layout `(n, k)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Cell {
    pub level: usize,
    pub interval: u64,
    pub word: Fiber,
}

impl Cell {
    pub fn new(space: &LaaksoSpace, level: usize, interval: u64, word: Fiber) -> Result<Self> {
        if level > space.level() {
            return Err(LaaksoError::LevelMismatch { point: space.level(), cell: level });
        }
        if interval >= space.d_at(level) || word.0 >= 1 << (level * space.k()) {
            return Err(LaaksoError::Input(format!(
                "no level-{level} cell with interval {interval} and word {:#x}",
                word.0
            )));
        }
        Ok(Self { level, interval, word })
    }

    /// The whole space.
    pub fn root() -> Self {
        Self { level: 0, interval: 0, word: Fiber(0) }
    }

    /// `d_N / d_n`: number of level-`N` edges along the cell.
    pub fn stride(&self, space: &LaaksoSpace) -> u64 {
        space.d() / space.d_at(self.level)
    }

    /// Endpoint positions over `d_N`.
    pub fn span(&self, space: &LaaksoSpace) -> (u64, u64) {
        let s = self.stride(space);
        (self.interval * s, (self.interval + 1) * s)
    }

    pub fn word_layout(&self, space: &LaaksoSpace) -> FiberLayout {
        FiberLayout::new(self.level, space.k()).expect("cell level never exceeds the space level")
    }

    /// `μ(S) = (1/d_n)·2^{-nk}`.
    pub fn measure(&self, space: &LaaksoSpace) -> f64 {
        1.0 / (space.d_at(self.level) as f64 * (1u64 << (self.level * space.k())) as f64)
    }

    pub fn contains(&self, space: &LaaksoSpace, p: &LaaksoPointN) -> bool {
        let (lo, hi) = self.span(space);
        if p.position() < lo || p.position() > hi {
            return false;
        }
        let layout = space.layout();
        space
            .class(p.position(), p.fiber())
            .into_iter()
            .any(|f| layout.prefix(f, self.level) == self.word)
    }

    /// Wormhole faces of the cell: endpoints strictly inside `(0, 1)`.
    pub fn half_faces(&self, space: &LaaksoSpace) -> Vec<HalfFace> {
        let (lo, hi) = self.span(space);
        let mut faces = Vec::with_capacity(2);
        if lo > 0 {
            faces.push(HalfFace { position: lo, cell: *self, side: Side::Right });
        }
        if hi < space.d() {
            faces.push(HalfFace { position: hi, cell: *self, side: Side::Left });
        }
        faces
    }
}

/// All `d_n · 2^{nk}` cells of level `n`, ordered by interval then word.
pub fn cells_at_level(space: &LaaksoSpace, n: usize) -> Result<Vec<Cell>> {
    if n > space.level() {
        return Err(LaaksoError::LevelMismatch { point: space.level(), cell: n });
    }
    let words = 1u64 << (n * space.k());
    let mut cells = Vec::with_capacity((space.d_at(n) * words) as usize);
    for a in 0..space.d_at(n) {
        for w in 0..words {
            cells.push(Cell { level: n, interval: a, word: Fiber(w) });
        }
    }
    Ok(cells)
}

/// Level-`n` cells containing the point `(i, f)`.
pub fn cells_containing(space: &LaaksoSpace, n: usize, p: &LaaksoPointN) -> Vec<Cell> {
    let s = space.d() / space.d_at(n);
    let i = p.position();
    let mut intervals = Vec::with_capacity(2);
    if i.is_multiple_of(s) {
        if i > 0 {
            intervals.push(i / s - 1);
        }
        if i < space.d() {
            intervals.push(i / s);
        }
    } else {
        intervals.push(i / s);
    }
    let layout = space.layout();
    let mut words: Vec<Fiber> = space
        .class(i, p.fiber())
        .into_iter()
        .map(|f| layout.prefix(f, n))
        .collect();
    words.sort_unstable();
    words.dedup();
    let mut out = Vec::with_capacity(intervals.len() * words.len());
    for &a in &intervals {
        for &w in &words {
            out.push(Cell { level: n, interval: a, word: w });
        }
    }
    out
}

/// Which side of the wormhole the owning cell lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Left,
    Right,
}

/// The points of a cell lying over one of its wormhole endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct HalfFace {
    /// Wormhole position over `d_N`.
    pub position: u64,
    pub cell: Cell,
    pub side: Side,
}

impl HalfFace {
    /// Level at which the wormhole appears.
    pub fn wormhole_level(&self, space: &LaaksoSpace) -> usize {
        space.fresh_level(self.position)
    }

    /// Canonical level-`N` vertices of the half-face, sorted.
    pub fn vertices(&self, space: &LaaksoSpace) -> Vec<LaaksoPointN> {
        let layout = space.layout();
        let n = self.cell.level;
        let tail_bits = (space.level() - n) * space.k();
        let mut out: Vec<LaaksoPointN> = (0..1u64 << tail_bits)
            .map(|tail| {
                let f = layout.with_prefix(spread_tail(layout, n, tail), self.cell.word, n);
                space.canonicalize(self.position, f).expect("position and fiber in range")
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Every level-`n` cell containing the half-face, on both sides of the
    /// wormhole. Each side contributes one cell per member of the word's
    /// identification class.
    pub fn star(&self, space: &LaaksoSpace) -> Vec<Cell> {
        let n = self.cell.level;
        let m = self.wormhole_level(space);
        let layout = self.cell.word_layout(space);
        let mut words = layout.class(self.cell.word, m, space.mode());
        words.sort_unstable();
        words.dedup();
        let s = self.cell.stride(space);
        let right = self.position / s;
        let mut cells = Vec::with_capacity(2 * words.len());
        for a in [right - 1, right] {
            for &w in &words {
                cells.push(Cell { level: n, interval: a, word: w });
            }
        }
        cells
    }
}

/// Place the `(N - n)·k` bits of `tail` into digits `n+1 … N` of each
/// coordinate, coordinate 0 taking the high bits.
pub(crate) fn spread_tail(layout: FiberLayout, n: usize, tail: u64) -> Fiber {
    let len = layout.depth() - n;
    let k = layout.k();
    let mut out = 0u64;
    for c in 0..k {
        let bits = (tail >> ((k - 1 - c) * len)) & super::fiber::low_mask(len);
        out |= bits << ((k - 1 - c) * layout.depth());
    }
    Fiber(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Identification, JSequence};

    fn space(j: u32, k: usize, n: usize, mode: Identification) -> LaaksoSpace {
        LaaksoSpace::new(JSequence::constant(j, k).unwrap(), n, mode).unwrap()
    }

    #[test]
    fn counts_and_measure() {
        let s = space(2, 1, 3, Identification::Diagonal);
        assert_eq!(cells_at_level(&s, 1).unwrap().len(), 4);
        assert_eq!(cells_at_level(&s, 0).unwrap(), vec![Cell::root()]);
        for (seq, n) in [(JSequence::constant(3, 2).unwrap(), 2), (JSequence::periodic(vec![2, 3], 1).unwrap(), 3)] {
            let sp = LaaksoSpace::new(seq, 3, Identification::PerCoordinate).unwrap();
            let cells = cells_at_level(&sp, n).unwrap();
            assert_eq!(cells.len() as u64, sp.d_at(n) << (n * sp.k()));
            let total: f64 = cells.iter().map(|c| c.measure(&sp)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn every_point_lies_in_some_cell() {
        let s = space(2, 1, 3, Identification::Diagonal);
        for n in 0..=3 {
            let cells = cells_at_level(&s, n).unwrap();
            for i in 0..=s.d() {
                for f in s.layout().all() {
                    let p = s.canonicalize(i, f).unwrap();
                    let owners: Vec<_> = cells.iter().filter(|c| c.contains(&s, &p)).copied().collect();
                    assert!(!owners.is_empty());
                    let mut listed = cells_containing(&s, n, &p);
                    listed.sort();
                    assert_eq!(owners, listed);
                }
            }
        }
    }

    #[test]
    fn half_faces_and_star() {
        let s = space(2, 1, 3, Identification::Diagonal);
        let c = Cell::new(&s, 1, 0, Fiber(1)).unwrap();
        let faces = c.half_faces(&s);
        assert_eq!(faces.len(), 1);
        let face = faces[0];
        assert_eq!(face.position, 4);
        assert_eq!(face.vertices(&s).len(), 4);
        let star = face.star(&s);
        assert_eq!(star.len(), 4);
        for cell in &star {
            for v in face.vertices(&s) {
                assert!(cell.contains(&s, &v));
            }
        }

        let per = space(2, 2, 2, Identification::PerCoordinate);
        let cell = Cell::new(&per, 2, 1, Fiber(0b10_01)).unwrap();
        for face in cell.half_faces(&per) {
            assert_eq!(face.star(&per).len(), 2 * 4);
        }
    }
}
