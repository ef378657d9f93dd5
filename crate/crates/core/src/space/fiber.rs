//! Truncated points of `K^k`: `k` binary words of a common depth, packed
//! into one `u64`.
//!
//! Coordinate `c` occupies bits `[(k-1-c)·depth, (k-c)·depth)` with digit 1
//! as its most significant bit, so numeric order on the packed value is
//! lexicographic order on `(w_1, …, w_k)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LaaksoError, Result};

/// How `T_n` acts on `K^k`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Identification {
    /// `T_n` flips digit `n` of every coordinate at once; classes have size 2.
    #[default]
    Diagonal,
    /// Digit `n` may be flipped in any subset of coordinates; classes have size `2^k`.
    PerCoordinate,
}

impl fmt::Display for Identification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Identification::Diagonal => "diagonal",
            Identification::PerCoordinate => "per-coordinate",
        })
    }
}

/// A single binary word `w_1 … w_depth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CantorWord {
    depth: usize,
    bits: u64,
}

impl CantorWord {
    pub fn new(depth: usize, bits: u64) -> Result<Self> {
        if depth > 63 || bits >> depth != 0 {
            return Err(LaaksoError::Input(format!("bits {bits:#b} do not fit depth {depth}")));
        }
        Ok(Self { depth, bits })
    }

    pub fn zeros(depth: usize) -> Self {
        Self { depth, bits: 0 }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Digit `n`, 1-based.
    pub fn digit(&self, n: usize) -> Result<u8> {
        if n == 0 || n > self.depth {
            return Err(LaaksoError::DigitOutOfRange { index: n, depth: self.depth });
        }
        Ok(((self.bits >> (self.depth - n)) & 1) as u8)
    }

    /// `T_n` on a single word.
    pub fn transpose(&self, n: usize) -> Result<Self> {
        self.digit(n)?;
        Ok(Self { depth: self.depth, bits: self.bits ^ (1 << (self.depth - n)) })
    }

    /// `σ^n`: drop the first `n` digits; the freed tail is zero-filled.
    pub fn shift(&self, n: usize) -> Self {
        let bits = if n >= self.depth { 0 } else { (self.bits << n) & low_mask(self.depth) };
        Self { depth: self.depth, bits }
    }

    /// `ψ_a`: prepend `a`, truncating at the current depth.
    pub fn contract(&self, a: &CantorWord) -> Result<Self> {
        if a.depth > self.depth {
            return Err(LaaksoError::WordTooLong { word: a.depth, depth: self.depth });
        }
        let bits = (a.bits << (self.depth - a.depth)) | (self.bits >> a.depth);
        Ok(Self { depth: self.depth, bits })
    }

    /// The first `n` digits as a word of depth `n`.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.depth);
        Self { depth: n, bits: self.bits >> (self.depth - n) }
    }
}

impl fmt::Display for CantorWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in 1..=self.depth {
            let bit = (self.bits >> (self.depth - n)) & 1;
            f.write_str(if bit == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for CantorWord {
    type Err = LaaksoError;

    fn from_str(s: &str) -> Result<Self> {
        let mut bits = 0u64;
        for ch in s.chars() {
            bits = (bits << 1)
                | match ch {
                    '0' => 0,
                    '1' => 1,
                    other => return Err(LaaksoError::Input(format!("invalid digit {other:?} in word {s:?}"))),
                };
        }
        CantorWord::new(s.len(), bits)
    }
}

/// A packed point of `K^k` truncated at some depth. The depth and `k` live in
/// the accompanying [`FiberLayout`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fiber(pub u64);

/// Shape of a packed fiber: `k` coordinates of `depth` digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FiberLayout {
    depth: usize,
    k: usize,
}

impl FiberLayout {
    pub fn new(depth: usize, k: usize) -> Result<Self> {
        if depth * k > 63 {
            return Err(LaaksoError::Config(format!(
                "fiber of depth {depth} with k = {k} needs {} bits, at most 63 supported",
                depth * k
            )));
        }
        Ok(Self { depth, k })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bits(&self) -> usize {
        self.depth * self.k
    }

    /// Number of fibers, `2^{depth·k}`.
    pub fn count(&self) -> u64 {
        1 << self.bits()
    }

    pub fn all(&self) -> impl Iterator<Item = Fiber> {
        (0..self.count()).map(Fiber)
    }

    fn offset(&self, c: usize) -> usize {
        (self.k - 1 - c) * self.depth
    }

    fn check_digit(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.depth {
            return Err(LaaksoError::DigitOutOfRange { index: n, depth: self.depth });
        }
        Ok(())
    }

    /// Bit of digit `n` of coordinate `c`.
    pub fn bit(&self, c: usize, n: usize) -> u64 {
        1 << (self.offset(c) + self.depth - n)
    }

    /// Bits of digit `n` across all coordinates.
    pub fn digit_mask(&self, n: usize) -> u64 {
        (0..self.k).fold(0, |m, c| m | self.bit(c, n))
    }

    /// Bits of the first `n` digits across all coordinates.
    pub fn prefix_mask(&self, n: usize) -> u64 {
        (1..=n.min(self.depth)).fold(0, |m, d| m | self.digit_mask(d))
    }

    pub fn digit(&self, f: Fiber, c: usize, n: usize) -> u8 {
        ((f.0 & self.bit(c, n)) != 0) as u8
    }

    pub fn word(&self, f: Fiber, c: usize) -> CantorWord {
        CantorWord {
            depth: self.depth,
            bits: (f.0 >> self.offset(c)) & low_mask(self.depth),
        }
    }

    pub fn words(&self, f: Fiber) -> Vec<CantorWord> {
        (0..self.k).map(|c| self.word(f, c)).collect()
    }

    pub fn from_words(&self, words: &[CantorWord]) -> Result<Fiber> {
        if words.len() != self.k {
            return Err(LaaksoError::Domain { expected: self.k, got: words.len() });
        }
        let mut packed = 0;
        for (c, w) in words.iter().enumerate() {
            if w.depth != self.depth {
                return Err(LaaksoError::WordTooLong { word: w.depth, depth: self.depth });
            }
            packed |= w.bits << self.offset(c);
        }
        Ok(Fiber(packed))
    }

    /// Diagonal `T_n`: flip digit `n` of every coordinate.
    pub fn transpose(&self, f: Fiber, n: usize) -> Result<Fiber> {
        self.check_digit(n)?;
        Ok(Fiber(f.0 ^ self.digit_mask(n)))
    }

    /// Flip digit `n` only in the coordinates of `coords` (a bit set over `0..k`).
    pub fn transpose_coords(&self, f: Fiber, n: usize, coords: u64) -> Result<Fiber> {
        self.check_digit(n)?;
        let mask = (0..self.k)
            .filter(|c| coords >> c & 1 == 1)
            .fold(0, |m, c| m | self.bit(c, n));
        Ok(Fiber(f.0 ^ mask))
    }

    /// `ψ_a ∘ σ^n` applied coordinatewise; `a` has layout `(|a|, k)`.
    pub fn shift_and_contract(&self, f: Fiber, a: Fiber, a_layout: FiberLayout, n: usize) -> Result<Fiber> {
        if a_layout.depth > self.depth {
            return Err(LaaksoError::WordTooLong { word: a_layout.depth, depth: self.depth });
        }
        let mut out = Vec::with_capacity(self.k);
        for c in 0..self.k {
            out.push(self.word(f, c).shift(n).contract(&a_layout.word(a, c))?);
        }
        self.from_words(&out)
    }

    /// Overwrite the first `n` digits of every coordinate with `a`, which has
    /// layout `(n, k)`. Equal to `shift_and_contract` with `|a| = n`.
    pub fn with_prefix(&self, f: Fiber, a: Fiber, n: usize) -> Fiber {
        let mut out = f.0 & !self.prefix_mask(n);
        for c in 0..self.k {
            let a_bits = (a.0 >> ((self.k - 1 - c) * n)) & low_mask(n);
            out |= a_bits << (self.offset(c) + self.depth - n);
        }
        Fiber(out)
    }

    /// The first `n` digits of every coordinate, as a fiber of layout `(n, k)`.
    pub fn prefix(&self, f: Fiber, n: usize) -> Fiber {
        let mut out = 0;
        for c in 0..self.k {
            let bits = (f.0 >> (self.offset(c) + self.depth - n)) & low_mask(n);
            out |= bits << ((self.k - 1 - c) * n);
        }
        Fiber(out)
    }

    /// Members of the class of `f` under the level-`n` identification.
    pub fn class(&self, f: Fiber, n: usize, mode: Identification) -> Vec<Fiber> {
        match mode {
            Identification::Diagonal => vec![f, Fiber(f.0 ^ self.digit_mask(n))],
            Identification::PerCoordinate => {
                let base = f.0 & !self.digit_mask(n);
                (0..1u64 << self.k)
                    .map(|subset| {
                        let flips = (0..self.k)
                            .filter(|c| subset >> c & 1 == 1)
                            .fold(0, |m, c| m | self.bit(c, n));
                        Fiber(base | flips)
                    })
                    .collect()
            }
        }
    }

    /// Lexicographically minimal member of the level-`n` class of `f`.
    pub fn canonical(&self, f: Fiber, n: usize, mode: Identification) -> Fiber {
        match mode {
            Identification::Diagonal => Fiber(f.0.min(f.0 ^ self.digit_mask(n))),
            Identification::PerCoordinate => Fiber(f.0 & !self.digit_mask(n)),
        }
    }

    pub fn format(&self, f: Fiber) -> String {
        self.words(f).iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",")
    }
}

pub(crate) fn low_mask(bits: usize) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1 << bits) - 1
    }
}
