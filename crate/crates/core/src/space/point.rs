use std::fmt;

use serde::Serialize;

use super::fiber::{Fiber, FiberLayout, Identification};
use super::sequence::{fresh_level, JSequence};
use crate::error::{LaaksoError, Result};

/// The combinatorial data of `L` truncated at level `N`: scales `d_0 … d_N`,
/// fiber layout `(N, k)` and identification mode.
#[derive(Debug, Clone)]
pub struct LaaksoSpace {
    seq: JSequence,
    level: usize,
    scales: Vec<u64>,
    layout: FiberLayout,
    mode: Identification,
}

impl LaaksoSpace {
    pub fn new(seq: JSequence, level: usize, mode: Identification) -> Result<Self> {
        let scales = seq.scales(level)?;
        let layout = FiberLayout::new(level, seq.fibers())?;
        Ok(Self { seq, level, scales, layout, mode })
    }

    pub fn sequence(&self) -> &JSequence {
        &self.seq
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn k(&self) -> usize {
        self.layout.k()
    }

    /// `d_N`.
    pub fn d(&self) -> u64 {
        self.scales[self.level]
    }

    /// `d_n` for `n ≤ N`.
    pub fn d_at(&self, n: usize) -> u64 {
        self.scales[n]
    }

    pub fn scales(&self) -> &[u64] {
        &self.scales
    }

    pub fn layout(&self) -> FiberLayout {
        self.layout
    }

    pub fn mode(&self) -> Identification {
        self.mode
    }

    /// `j_n` for `1 ≤ n ≤ N`.
    pub fn j(&self, n: usize) -> u64 {
        self.scales[n] / self.scales[n - 1]
    }

    /// Level at which position `i / d_N` first appears; 0 for the endpoints.
    pub fn fresh_level(&self, i: u64) -> usize {
        if i == 0 || i == self.d() {
            0
        } else {
            fresh_level(&self.scales, i)
        }
    }

    /// Representatives of the class of `(i, f)`.
    pub fn class(&self, i: u64, f: Fiber) -> Vec<Fiber> {
        match self.fresh_level(i) {
            0 => vec![f],
            n => self.layout.class(f, n, self.mode),
        }
    }

    pub fn canonical_fiber(&self, i: u64, f: Fiber) -> Fiber {
        match self.fresh_level(i) {
            0 => f,
            n => self.layout.canonical(f, n, self.mode),
        }
    }

    pub fn canonicalize(&self, i: u64, f: Fiber) -> Result<LaaksoPointN> {
        if i > self.d() {
            return Err(LaaksoError::Input(format!("position {i} exceeds d_N = {}", self.d())));
        }
        if f.0 >= self.layout.count() {
            return Err(LaaksoError::Input(format!("fiber {:#x} exceeds {} bits", f.0, self.layout.bits())));
        }
        Ok(LaaksoPointN { position: i, fiber: self.canonical_fiber(i, f) })
    }

    /// Interval coordinate `i / d_N`.
    pub fn x(&self, i: u64) -> f64 {
        i as f64 / self.d() as f64
    }

    pub fn format_point(&self, p: &LaaksoPointN) -> String {
        format!("({}/{}, {})", p.position, self.d(), self.layout.format(p.fiber))
    }
}

/// A canonical level-`N` point: position `i / d_N` and the minimal fiber of
/// its identification class. Only [`LaaksoSpace::canonicalize`] builds
/// these, so equality of points is equality of fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LaaksoPointN {
    position: u64,
    fiber: Fiber,
}

impl LaaksoPointN {
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn fiber(&self) -> Fiber {
        self.fiber
    }
}

impl fmt::Display for LaaksoPointN {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {:#x})", self.position, self.fiber.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn space(j: u32, k: usize, n: usize, mode: Identification) -> LaaksoSpace {
        LaaksoSpace::new(JSequence::constant(j, k).unwrap(), n, mode).unwrap()
    }

    #[test]
    fn wormhole_at_half_merges_first_digit() {
        let s = space(2, 1, 3, Identification::Diagonal);
        let p = s.canonicalize(4, Fiber(0b110)).unwrap();
        assert_eq!(p.fiber(), Fiber(0b010));
        assert_eq!(s.canonicalize(4, Fiber(0b010)).unwrap(), p);
    }

    #[test]
    fn endpoints_are_never_identified() {
        let s = space(2, 1, 3, Identification::Diagonal);
        for f in s.layout().all() {
            assert_eq!(s.canonicalize(0, f).unwrap().fiber(), f);
            assert_eq!(s.canonicalize(8, f).unwrap().fiber(), f);
        }
    }

    #[test]
    fn class_sizes_at_wormholes() {
        let diag = space(2, 2, 3, Identification::Diagonal);
        let per = space(2, 2, 3, Identification::PerCoordinate);
        for i in 1..8 {
            let mut a = diag.class(i, Fiber(0b101_011));
            a.sort();
            a.dedup();
            assert_eq!(a.len(), 2);
            let mut b = per.class(i, Fiber(0b101_011));
            b.sort();
            b.dedup();
            assert_eq!(b.len(), 4);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        let s = space(2, 1, 2, Identification::Diagonal);
        assert!(s.canonicalize(5, Fiber(0)).is_err());
        assert!(s.canonicalize(1, Fiber(4)).is_err());
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent_and_class_constant(
            i in 0u64..=27, bits in 0u64..1 << 6, k in 1usize..=2, per in any::<bool>()
        ) {
            let mode = if per { Identification::PerCoordinate } else { Identification::Diagonal };
            let s = space(3, k, 3, mode);
            let f = Fiber(bits & ((1 << (3 * k)) - 1));
            let p = s.canonicalize(i, f).unwrap();
            prop_assert_eq!(s.canonicalize(i, p.fiber()).unwrap(), p);
            let n = s.fresh_level(i);
            if n > 0 {
                let t = s.layout().transpose(f, n).unwrap();
                prop_assert_eq!(s.canonicalize(i, t).unwrap(), p);
            }
        }
    }
}
