use rayon::prelude::*;
use serde::Serialize;

use super::TimeScaling;
use crate::error::{LaaksoError, Result};
use crate::graph::{ApproxGraph, QuadraticForm};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BesovReport {
    pub alpha: f64,
    pub radii: Vec<f64>,
    /// `J_r(f)` per radius.
    pub j_r: Vec<f64>,
    /// `N_H^r(f) = J_r(f) / H(r)` per radius.
    pub n_r: Vec<f64>,
    /// `N_H(f)`, the largest `N_H^r(f)` on the grid.
    pub n_h: f64,
    pub energy: f64,
}

impl BesovReport {
    /// `N_H(f) / ℰ(f, f)`.
    pub fn ratio(&self) -> f64 {
        self.n_h / self.energy
    }
}

/// Dyadic radii `2^{-e}` in `[2/d_N, 1]`, largest first.
pub fn besov_radii(g: &ApproxGraph) -> Vec<f64> {
    let lo = 2.0 / g.d() as f64;
    (0..)
        .map(|e| 0.5f64.powi(e))
        .take_while(|&r| r >= lo * (1.0 - 1e-12))
        .collect()
}

/// `J_r(f) = r^{−α} Σ_x Σ_{y ∈ B(x,r)} |f(x) − f(y)|² μ(x) μ(y)` over `radii`,
/// with hop distances from `hops` (all pairs).
pub fn besov_norm(
    g: &ApproxGraph,
    form: &QuadraticForm,
    hops: &[Vec<u32>],
    f: &[f64],
    h: &TimeScaling,
    alpha: f64,
    radii: &[f64],
) -> Result<BesovReport> {
    let n = g.n_vertices();
    if f.len() != n || hops.len() != n {
        return Err(LaaksoError::Domain { expected: n, got: f.len().min(hops.len()) });
    }
    if radii.is_empty() {
        return Err(LaaksoError::Input("empty radius grid".into()));
    }
    let mu = g.measure();
    let j_r: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let k = g.radius_hops(r);
            let sum: f64 = (0..n)
                .into_par_iter()
                .map(|x| {
                    let row = &hops[x];
                    let inner: f64 = (0..n)
                        .filter(|&y| row[y] <= k)
                        .map(|y| (f[x] - f[y]).powi(2) * mu[y])
                        .sum();
                    inner * mu[x]
                })
                .sum();
            sum / r.powf(alpha)
        })
        .collect();
    let n_r: Vec<f64> = radii.iter().zip(&j_r).map(|(&r, j)| j / h.eval(r)).collect();
    let n_h = n_r.iter().copied().fold(0.0, f64::max);
    Ok(BesovReport {
        alpha,
        radii: radii.to_vec(),
        j_r,
        n_r,
        n_h,
        energy: form.energy(g, f),
    })
}
