//! Box-counting dimension of a level-`N` vertex cloud, lifted to
//! `ℝ^{1+k}` by sending each fiber word to a Cantor point with contraction
//! ratios `1/j_n`.

use std::collections::HashSet;

use serde::Serialize;

use super::point::{LaaksoPointN, LaaksoSpace};
use crate::stats::linear_fit;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxCount {
    /// `(m, d_m, occupied boxes of side 1/d_m)`.
    pub counts: Vec<(usize, u64, usize)>,
    pub slope: f64,
}

/// Integer box index of coordinate `c` along digit levels `1..=m`:
/// `⌊c(w)·d_m⌋ = Σ_{n≤m} w_n (j_n − 1) d_m / d_n`.
fn cantor_box(space: &LaaksoSpace, word_bits: u64, m: usize) -> u64 {
    let depth = space.level();
    (1..=m)
        .filter(|&n| (word_bits >> (depth - n)) & 1 == 1)
        .map(|n| (space.j(n) - 1) * (space.d_at(m) / space.d_at(n)))
        .sum()
}

/// Count occupied boxes of side `1/d_m` for each `m` in `levels` and regress
/// `log count` on `log d_m`.
pub fn box_counting_dimension(
    space: &LaaksoSpace,
    points: &[LaaksoPointN],
    levels: std::ops::RangeInclusive<usize>,
) -> BoxCount {
    let layout = space.layout();
    let mut counts = Vec::new();
    for m in levels {
        let stride = space.d() / space.d_at(m);
        let top = space.d_at(m) - 1;
        let mut boxes: HashSet<Vec<u64>> = HashSet::with_capacity(points.len());
        for p in points {
            let mut key = Vec::with_capacity(1 + space.k());
            key.push((p.position() / stride).min(top));
            for w in layout.words(p.fiber()) {
                key.push(cantor_box(space, w.bits(), m));
            }
            boxes.insert(key);
        }
        counts.push((m, space.d_at(m), boxes.len()));
    }
    let x: Vec<f64> = counts.iter().map(|c| (c.1 as f64).ln()).collect();
    let y: Vec<f64> = counts.iter().map(|c| (c.2 as f64).ln()).collect();
    let slope = linear_fit(&x, &y).slope;
    BoxCount { counts, slope }
}
