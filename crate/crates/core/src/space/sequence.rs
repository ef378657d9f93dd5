//! The construction data `{j_i}` and fiber count `k`, the scales
//! `d_N = j_1 ⋯ j_N`, the wormhole schedule `L_N`, and the Hausdorff
//! dimension formula.

use serde::{Deserialize, Serialize};

use crate::error::{LaaksoError, Result};

/// How the sequence `j_1, j_2, …` is generated from the base value `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "kebab-case")]
pub enum JMode {
    Constant,
    /// `j_i = pattern[(i - 1) mod len]`.
    Periodic(Vec<u32>),
    /// A finite list; levels beyond its length are a configuration error.
    Explicit(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JSequence {
    base: u32,
    mode: JMode,
    fibers: usize,
}

impl JSequence {
    pub fn new(base: u32, mode: JMode, fibers: usize) -> Result<Self> {
        if base < 2 {
            return Err(LaaksoError::Config(format!("base j must be at least 2, got {base}")));
        }
        let values: &[u32] = match &mode {
            JMode::Constant => &[],
            JMode::Periodic(p) if p.is_empty() => {
                return Err(LaaksoError::Config("periodic pattern is empty".into()))
            }
            JMode::Periodic(p) | JMode::Explicit(p) => p,
        };
        if let Some(bad) = values.iter().find(|&&v| v != base && v != base + 1) {
            return Err(LaaksoError::Config(format!(
                "sequence value {bad} is not in {{{base}, {}}}",
                base + 1
            )));
        }
        Ok(Self { base, mode, fibers })
    }

    pub fn constant(j: u32, k: usize) -> Result<Self> {
        Self::new(j, JMode::Constant, k)
    }

    /// Periodic pattern; the base is taken as the pattern minimum.
    pub fn periodic(pattern: Vec<u32>, k: usize) -> Result<Self> {
        let base = pattern.iter().copied().min().unwrap_or(0);
        Self::new(base, JMode::Periodic(pattern), k)
    }

    pub fn explicit(list: Vec<u32>, k: usize) -> Result<Self> {
        let base = list.iter().copied().min().unwrap_or(0);
        Self::new(base, JMode::Explicit(list), k)
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn mode(&self) -> &JMode {
        &self.mode
    }

    /// Fiber count `k`.
    pub fn fibers(&self) -> usize {
        self.fibers
    }

    /// Longest level this sequence supports (`None` when unbounded).
    pub fn max_level(&self) -> Option<usize> {
        match &self.mode {
            JMode::Explicit(list) => Some(list.len()),
            _ => None,
        }
    }

    /// `j_i` for `i >= 1`.
    pub fn j_at(&self, i: usize) -> Result<u32> {
        assert!(i >= 1, "sequence is indexed from 1");
        match &self.mode {
            JMode::Constant => Ok(self.base),
            JMode::Periodic(p) => Ok(p[(i - 1) % p.len()]),
            JMode::Explicit(list) => list.get(i - 1).copied().ok_or(LaaksoError::SequenceTooShort {
                requested: i,
                available: list.len(),
            }),
        }
    }

    pub fn check_level(&self, level: usize) -> Result<()> {
        match self.max_level() {
            Some(max) if level > max => Err(LaaksoError::SequenceTooShort {
                requested: level,
                available: max,
            }),
            _ => Ok(()),
        }
    }

    /// `d_N = ∏_{i ≤ N} j_i`, with `d_0 = 1`.
    pub fn d_of(&self, level: usize) -> Result<u64> {
        Ok(*self.scales(level)?.last().expect("scales is never empty"))
    }

    /// `[d_0, d_1, …, d_N]`.
    pub fn scales(&self, level: usize) -> Result<Vec<u64>> {
        self.check_level(level)?;
        let mut d = Vec::with_capacity(level + 1);
        d.push(1u64);
        for i in 1..=level {
            let next = d[i - 1]
                .checked_mul(self.j_at(i)? as u64)
                .ok_or_else(|| LaaksoError::Config(format!("d_{i} overflows u64")))?;
            d.push(next);
        }
        Ok(d)
    }

    pub fn wormhole_levels(&self, level: usize) -> Result<WormholeSchedule> {
        WormholeSchedule::new(self.scales(level)?)
    }

    /// `Q = lim log(2^{lk} d_l) / log(d_l) = 1 + k·log 2 / ⟨log j⟩`.
    ///
    /// Constant and periodic sequences have an exact limit. Explicit lists
    /// return the value at the full list length with `converged = false`.
    pub fn hausdorff_dimension(&self) -> Dimension {
        let k = self.fibers as f64;
        let ln2 = std::f64::consts::LN_2;
        match &self.mode {
            JMode::Constant => Dimension {
                value: 1.0 + k * ln2 / (self.base as f64).ln(),
                converged: true,
            },
            JMode::Periodic(p) => {
                let mean_log: f64 = p.iter().map(|&j| (j as f64).ln()).sum::<f64>() / p.len() as f64;
                Dimension {
                    value: 1.0 + k * ln2 / mean_log,
                    converged: true,
                }
            }
            JMode::Explicit(list) => {
                let l = list.len() as f64;
                let log_d: f64 = list.iter().map(|&j| (j as f64).ln()).sum();
                Dimension {
                    value: (l * k * ln2 + log_d) / log_d,
                    converged: false,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dimension {
    pub value: f64,
    /// `false` when the value is a finite-level evaluation of a sequence
    /// whose limit is not known.
    pub converged: bool,
}

/// Wormhole locations up to level `N`, stored as numerators over `d_N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WormholeSchedule {
    scales: Vec<u64>,
    /// `fresh[n - 1]` holds `L_n \ L_{n-1}` in increasing order.
    fresh: Vec<Vec<u64>>,
}

impl WormholeSchedule {
    fn new(scales: Vec<u64>) -> Result<Self> {
        let top = scales.len() - 1;
        let d_top = scales[top];
        let mut fresh = vec![Vec::new(); top];
        for i in 1..d_top {
            let n = fresh_level(&scales, i);
            fresh[n - 1].push(i);
        }
        Ok(Self { scales, fresh })
    }

    pub fn level(&self) -> usize {
        self.scales.len() - 1
    }

    pub fn d(&self, n: usize) -> u64 {
        self.scales[n]
    }

    pub fn denominator(&self) -> u64 {
        self.scales[self.level()]
    }

    /// `L_n` as numerators over `d_N`.
    pub fn positions(&self, n: usize) -> Vec<u64> {
        let mut all: Vec<u64> = self.fresh[..n].iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    /// `L_n \ L_{n-1}` as numerators over `d_N`.
    pub fn fresh(&self, n: usize) -> &[u64] {
        assert!(n >= 1 && n <= self.level());
        &self.fresh[n - 1]
    }

    /// `L_n` as reduced fractions `(p, q)`.
    pub fn fractions(&self, n: usize) -> Vec<(u64, u64)> {
        let d = self.denominator();
        self.positions(n)
            .into_iter()
            .map(|i| {
                let g = gcd(i, d);
                (i / g, d / g)
            })
            .collect()
    }
}

/// Smallest `n` with `(d_N / d_n) | i`, i.e. the level at which the
/// position `i / d_N` first appears. Endpoints get level 0.
pub(crate) fn fresh_level(scales: &[u64], i: u64) -> usize {
    let top = scales[scales.len() - 1];
    (0..scales.len())
        .find(|&n| i.is_multiple_of(top / scales[n]))
        .expect("level N always divides")
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
