use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SpectralData;
use crate::error::{LaaksoError, Result};
use crate::graph::ApproxGraph;
use crate::stats::{linear_fit, LinearFit};

/// Tail bound relative to the kernel value above which a truncated
/// spectrum is refused.
const TAIL_TOLERANCE: f64 = 1e-10;

impl SpectralData {
    /// Upper bound on the contribution of the modes not computed:
    /// `(n − m)·e^{−λ_cut t} / √(μ(x)μ(y))`.
    pub fn tail_bound(&self, t: f64, x: usize, y: usize) -> f64 {
        if self.is_complete() {
            return 0.0;
        }
        let cut = *self.eigenvalues.last().expect("nonempty spectrum");
        (self.dimension - self.len()) as f64 * (-cut * t).exp() / (self.measure[x] * self.measure[y]).sqrt()
    }

    /// `p_t(x, y) = Σ_m e^{−λ_m t} φ_m(x) φ_m(y)`.
    pub fn heat_kernel(&self, t: f64, x: usize, y: usize) -> Result<f64> {
        if !(t > 0.0) {
            return Err(LaaksoError::Input(format!("heat kernel needs t > 0, got {t}")));
        }
        let p = self.kernel_sum(t, x, y);
        let tail = self.tail_bound(t, x, y);
        if tail > TAIL_TOLERANCE * p.abs() {
            return Err(LaaksoError::Truncation { bound: tail, tolerance: TAIL_TOLERANCE * p.abs() });
        }
        Ok(p)
    }

    fn kernel_sum(&self, t: f64, x: usize, y: usize) -> f64 {
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(m, l)| (-l * t).exp() * self.vectors[(x, m)] * self.vectors[(y, m)])
            .sum()
    }

    /// Row `y ↦ p_t(x, y)`.
    pub fn heat_kernel_row(&self, t: f64, x: usize) -> Result<Vec<f64>> {
        if !(t > 0.0) {
            return Err(LaaksoError::Input(format!("heat kernel needs t > 0, got {t}")));
        }
        let weights: Vec<f64> = self
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(m, l)| (-l * t).exp() * self.vectors[(x, m)])
            .collect();
        let n = self.n_vertices();
        let row: Vec<f64> = (0..n)
            .map(|y| weights.iter().enumerate().map(|(m, w)| w * self.vectors[(y, m)]).sum())
            .collect();
        if !self.is_complete() {
            for (y, p) in row.iter().enumerate() {
                let tail = self.tail_bound(t, x, y);
                if tail > TAIL_TOLERANCE * p.abs() {
                    return Err(LaaksoError::Truncation { bound: tail, tolerance: TAIL_TOLERANCE * p.abs() });
                }
            }
        }
        Ok(row)
    }

    /// `T_t f = Σ_m e^{−λ_m t} ⟨f, φ_m⟩_μ φ_m`.
    pub fn semigroup(&self, t: f64, f: &[f64]) -> Vec<f64> {
        let n = self.n_vertices();
        let coeffs: Vec<f64> = (0..self.len())
            .map(|m| {
                let c: f64 = (0..n).map(|v| f[v] * self.vectors[(v, m)] * self.measure[v]).sum();
                c * (-self.eigenvalues[m] * t).exp()
            })
            .collect();
        (0..n)
            .map(|v| coeffs.iter().enumerate().map(|(m, c)| c * self.vectors[(v, m)]).sum())
            .collect()
    }

    /// `Σ_m e^{−λ_m t}` over the computed modes.
    pub fn heat_trace(&self, t: f64) -> f64 {
        self.eigenvalues.iter().map(|l| (-l * t).exp()).sum()
    }
}

/// A time scaling function: `H(r) = r^{β₂}` for `r ≤ 1` and `r^{β₁}` beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeScaling {
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for TimeScaling {
    fn default() -> Self {
        Self { beta1: 2.0, beta2: 2.0 }
    }
}

impl TimeScaling {
    pub fn new(beta1: f64, beta2: f64) -> Result<Self> {
        if !(beta1 >= 1.0 && beta2 >= beta1) {
            return Err(LaaksoError::Config(format!(
                "time scaling needs 1 <= beta1 <= beta2, got ({beta1}, {beta2})"
            )));
        }
        Ok(Self { beta1, beta2 })
    }

    pub fn power(beta: f64) -> Result<Self> {
        Self::new(beta, beta)
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 1.0 {
            r.powf(self.beta2)
        } else {
            r.powf(self.beta1)
        }
    }

    /// `h = H^{-1}`.
    pub fn inverse(&self, t: f64) -> f64 {
        if t <= 1.0 {
            t.powf(1.0 / self.beta2)
        } else {
            t.powf(1.0 / self.beta1)
        }
    }

    /// Measured `(C₄, C₅, C₆)` on a radius grid: doubling constant and the
    /// constants in `C₅ (R/r)^{β₁} ≤ H(R)/H(r) ≤ C₆ (R/r)^{β₂}` for `r ≤ R`.
    pub fn constants(&self, radii: &[f64]) -> (f64, f64, f64) {
        let mut c4: f64 = 0.0;
        let mut c5 = f64::INFINITY;
        let mut c6: f64 = 0.0;
        for &r in radii {
            c4 = c4.max(self.eval(2.0 * r) / self.eval(r));
            for &big in radii.iter().filter(|&&b| b >= r) {
                let ratio = self.eval(big) / self.eval(r);
                c5 = c5.min(ratio / (big / r).powf(self.beta1));
                c6 = c6.max(ratio / (big / r).powf(self.beta2));
            }
        }
        (c4, c5, c6)
    }
}

/// Log-spaced times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
}

impl TimeWindow {
    /// `[4/d_N², 1/4]`: the window used for the two-sided fit.
    pub fn fit_default(g: &ApproxGraph) -> Self {
        let d = g.d() as f64;
        Self { t_min: 4.0 / (d * d), t_max: 0.25, count: 12 }
    }

    /// `[16/d_N², 1/(4λ₁)]`: the diffusive window for the on-diagonal slope.
    pub fn diffusive(g: &ApproxGraph, lambda1: f64) -> Self {
        let d = g.d() as f64;
        Self { t_min: 16.0 / (d * d), t_max: 0.25 / lambda1, count: 12 }
    }

    pub fn is_empty(&self) -> bool {
        !(self.t_min < self.t_max) || self.count == 0
    }

    pub fn times(&self) -> Vec<f64> {
        log_grid(self.t_min, self.t_max, self.count)
    }
}

pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum WindowWarning {
    /// The requested window reached below the graph cutoff `1/d_N²`.
    TrimmedBelow { requested: f64, used: f64 },
    /// The requested window reached past the mixing time `3/λ₁`.
    TrimmedAbove { requested: f64, used: f64 },
}

/// One grid point of the fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HkPoint {
    pub t: f64,
    pub x: usize,
    pub y: usize,
    pub p: f64,
    pub distance: f64,
    pub ball_measure: f64,
    /// `(1/(c₀ V)) e^{−c₀ d²/t}` and `(c₀/V) e^{−d²/(c₀ t)}` at the fitted `c₀`.
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HkFit {
    /// Smallest `c ≥ 1` making both bounds hold on the grid.
    pub c0: f64,
    pub c_lower: f64,
    pub c_upper: f64,
    pub window: TimeWindow,
    pub warnings: Vec<WindowWarning>,
    pub points: Vec<HkPoint>,
    pub excluded: usize,
    pub passed: bool,
}

/// Minimal `c ≥ 1` with `pred(c)`, for a predicate monotone in `c`.
fn smallest_c(pred: impl Fn(f64) -> bool) -> f64 {
    if pred(1.0) {
        return 1.0;
    }
    let mut hi = 2.0;
    while !pred(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    let mut lo = hi / 2.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Fit `HK(H, β₁, β₂, c₀)` on the grid `window × centres × all y`, with
/// `h = H^{-1}` and `V = μ(B(x, h(t)))`. Kernel values below `1e-9·p_t(x,x)`
/// are round-off and skipped.
pub fn fit_hk_bounds(
    g: &ApproxGraph,
    spec: &SpectralData,
    h: &TimeScaling,
    window: TimeWindow,
    centres: &[usize],
) -> Result<HkFit> {
    let d = g.d() as f64;
    let mut warnings = Vec::new();
    let mut used = window;
    let floor = 1.0 / (d * d);
    if used.t_min < floor {
        warnings.push(WindowWarning::TrimmedBelow { requested: used.t_min, used: floor });
        used.t_min = floor;
    }
    let ceiling = 3.0 / spec.spectral_gap();
    if used.t_max > ceiling {
        warnings.push(WindowWarning::TrimmedAbove { requested: used.t_max, used: ceiling });
        used.t_max = ceiling;
    }
    if used.is_empty() {
        return Err(LaaksoError::Input(format!(
            "time window [{:.3e}, {:.3e}] is empty after trimming",
            used.t_min, used.t_max
        )));
    }
    let times = used.times();
    let hops: Vec<Vec<u32>> = centres.par_iter().map(|&x| g.hops_from(x)).collect();

    type Raw = (f64, usize, usize, f64, f64, f64);
    let raw: Vec<Raw> = times
        .par_iter()
        .flat_map_iter(|&t| {
            let hops = &hops;
            centres.iter().enumerate().map(move |(k, &x)| (t, k, x, hops))
        })
        .map(|(t, k, x, hops)| -> Result<Vec<Raw>> {
            let row = spec.heat_kernel_row(t, x)?;
            let radius = g.radius_hops(h.inverse(t));
            let volume: f64 = (0..g.n_vertices()).filter(|&v| hops[k][v] <= radius).map(|v| g.measure()[v]).sum();
            let diag = row[x];
            Ok((0..g.n_vertices())
                .map(|y| (t, x, y, row[y], hops[k][y] as f64 / d, volume))
                .filter(|r| r.3 > 1e-9 * diag)
                .collect())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let total = times.len() * centres.len() * g.n_vertices();
    let excluded = total - raw.len();

    let mut c_lower: f64 = 1.0;
    let mut c_upper: f64 = 1.0;
    for &(t, _, _, p, dist, vol) in &raw {
        let rho = p * vol;
        let z = dist * dist / t;
        c_lower = c_lower.max(smallest_c(|c| c * (c * z).exp() * rho >= 1.0));
        c_upper = c_upper.max(smallest_c(|c| rho <= c * (-z / c).exp()));
    }
    let c0 = c_lower.max(c_upper);
    let points = raw
        .into_iter()
        .map(|(t, x, y, p, distance, ball_measure)| {
            let z = distance * distance / t;
            HkPoint {
                t,
                x,
                y,
                p,
                distance,
                ball_measure,
                lower: (-c0 * z).exp() / (c0 * ball_measure),
                upper: c0 * (-z / c0).exp() / ball_measure,
            }
        })
        .collect();
    Ok(HkFit { c0, c_lower, c_upper, window: used, warnings, points, excluded, passed: c0.is_finite() })
}

/// Regression of `log p_t(x, x)` on `log t`.
pub fn on_diagonal_slope(spec: &SpectralData, x: usize, window: TimeWindow) -> Result<LinearFit> {
    if window.is_empty() {
        return Err(LaaksoError::Input(format!(
            "time window [{:.3e}, {:.3e}] is empty",
            window.t_min, window.t_max
        )));
    }
    let times = window.times();
    let logs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let values = times
        .iter()
        .map(|&t| spec.heat_kernel(t, x, x).map(f64::ln))
        .collect::<Result<Vec<_>>>()?;
    Ok(linear_fit(&logs, &values))
}
