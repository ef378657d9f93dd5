//! Checks with pass/fail verdicts: volume doubling, elliptic Harnack,
//! resistance scaling, invariant forms, Hilbert distance, `Θ` commutation,
//! Besov comparison and heat-kernel bounds.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LaaksoError, Result};
use crate::folding::{all_pairs_hops, cell_isometries, check_folding_lemmas, CellIsometry, Theta};
use crate::graph::{effective_resistance, ApproxGraph, DirichletProblem, QuadraticForm};
use crate::space::cells_at_level;
use crate::spectral::{
    besov_norm, besov_radii, eigendecompose, fit_hk_bounds, SpectralData, TimeScaling, TimeWindow,
};

const DEFAULT_THRESHOLDS: &str = include_str!("../data/thresholds.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub version: u32,
    pub vd: VdThresholds,
    pub ehi: EhiThresholds,
    pub res: ResThresholds,
    pub theta: ThetaThresholds,
    pub besov: BesovThresholds,
    pub hk: HkThresholds,
    pub walk: WalkThresholds,
    pub coupling: CouplingThresholds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VdThresholds {
    pub max_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EhiThresholds {
    pub max_constant: f64,
    /// Allowed max/min of the constant across levels.
    pub stability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResThresholds {
    pub max_spread: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaThresholds {
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesovThresholds {
    pub max_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HkThresholds {
    pub stability: f64,
    pub slope_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkThresholds {
    pub slope_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingThresholds {
    pub min_probability: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        toml::from_str(DEFAULT_THRESHOLDS).expect("bundled thresholds parse")
    }
}

impl Thresholds {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| LaaksoError::Config(format!("{}: {e}", path.display())))
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub config: String,
    pub constants: BTreeMap<String, f64>,
    pub passed: bool,
    pub notes: Vec<String>,
    pub artifacts: Vec<String>,
}

impl CheckReport {
    fn new(name: &str, g: &ApproxGraph, constants: BTreeMap<String, f64>, passed: bool) -> Self {
        Self { name: name.into(), config: describe(g), constants, passed, notes: vec![], artifacts: vec![] }
    }

    fn failed(name: &str, config: String, note: String) -> Self {
        Self { name: name.into(), config, constants: BTreeMap::new(), passed: false, notes: vec![note], artifacts: vec![] }
    }

    pub fn constant(&self, key: &str) -> f64 {
        self.constants.get(key).copied().unwrap_or(f64::NAN)
    }
}

fn describe(g: &ApproxGraph) -> String {
    let s = g.space();
    format!("j={:?} k={} N={} mode={:?}", s.sequence().mode(), s.k(), g.level(), s.mode())
}

fn constants<const K: usize>(pairs: [(&str, f64); K]) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Every `step`-th vertex, at least `count` of them when possible.
pub fn sample_centres(g: &ApproxGraph, count: usize) -> Vec<usize> {
    let step = (g.n_vertices() / count.max(1)).max(1);
    (0..g.n_vertices()).step_by(step).collect()
}

fn dyadic(lo: f64, hi: f64) -> Vec<f64> {
    (0..64).map(|e| 0.5f64.powi(e)).filter(|&r| r <= hi * (1.0 + 1e-12) && r >= lo * (1.0 - 1e-12)).collect()
}

/// `μ(B(x, 2R)) / μ(B(x, R))` for dyadic `R ∈ [2/d_N, 1/2]` and sampled `x`.
pub fn check_vd(g: &ApproxGraph, thresholds: &Thresholds) -> CheckReport {
    let radii = dyadic(2.0 / g.d() as f64, 0.5);
    let mu = g.measure();
    let (mut max, mut min) = (0.0f64, f64::INFINITY);
    for x in sample_centres(g, 25) {
        let hops = g.hops_from(x);
        for &r in &radii {
            let ball = |k: u32| hops.iter().zip(mu).filter(|(h, _)| **h <= k).map(|(_, m)| m).sum::<f64>();
            let ratio = ball(g.radius_hops(2.0 * r)) / ball(g.radius_hops(r));
            max = max.max(ratio);
            min = min.min(ratio);
        }
    }
    let passed = min >= 1.0 && max.is_finite() && max <= thresholds.vd.max_ratio;
    CheckReport::new("vd", g, constants([("max_ratio", max), ("min_ratio", min)]), passed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EhiOptions {
    /// Smallest ball radius, in edges.
    pub min_edges: u32,
    pub centres: usize,
    pub radii: Vec<f64>,
    /// Random nonnegative boundary data per ball, beyond the spikes.
    pub random_data: usize,
    pub seed: u64,
}

impl Default for EhiOptions {
    fn default() -> Self {
        Self { min_edges: 4, centres: 40, radii: dyadic(1.0 / 32.0, 0.5), random_data: 32, seed: 1 }
    }
}

/// Harnack ratios `sup/inf` on `B(z, r/2)` of functions harmonic in the open
/// ball `B(z, r)`. The constant is the worst single-vertex boundary spike;
/// random data are checked against it.
pub fn check_ehi(g: &ApproxGraph, form: &QuadraticForm, options: &EhiOptions, thresholds: &Thresholds) -> Result<CheckReport> {
    let d = g.d() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let (mut spike_max, mut random_max) = (0.0f64, 0.0f64);
    let (mut balls, mut skipped) = (0usize, 0usize);
    for z in sample_centres(g, options.centres) {
        let hops = g.hops_from(z);
        for &r in &options.radii {
            let k = r * d;
            if k < options.min_edges as f64 {
                continue;
            }
            let interior: Vec<usize> = (0..g.n_vertices()).filter(|&v| (hops[v] as f64) < k - 1e-9).collect();
            let half: Vec<usize> = interior.iter().copied().filter(|&v| hops[v] as f64 <= k / 2.0 + 1e-9).collect();
            if interior.len() == g.n_vertices() || half.is_empty() {
                skipped += 1;
                continue;
            }
            let problem = DirichletProblem::new(g, form, &interior)?;
            let boundary = problem.outer_boundary();
            balls += 1;
            let local: BTreeMap<usize, usize> = interior.iter().enumerate().map(|(a, &v)| (v, a)).collect();
            let rows: Vec<usize> = half.iter().map(|v| local[v]).collect();
            let mut columns = Vec::with_capacity(boundary.len());
            for &b in &boundary {
                let mut data = vec![0.0; g.n_vertices()];
                data[b] = 1.0;
                let h = problem.solve_interior(&problem.boundary_rhs(&data))?;
                let vals: Vec<f64> = rows.iter().map(|&a| h[a]).collect();
                spike_max = spike_max.max(ratio(&vals));
                columns.push(vals);
            }
            for _ in 0..options.random_data {
                let w: Vec<f64> = boundary.iter().map(|_| rng.random::<f64>()).collect();
                let vals: Vec<f64> = (0..rows.len()).map(|a| columns.iter().zip(&w).map(|(c, w)| c[a] * w).sum()).collect();
                random_max = random_max.max(ratio(&vals));
            }
        }
    }
    let dominated = random_max <= spike_max * (1.0 + 1e-9);
    let passed = balls > 0 && dominated && spike_max <= thresholds.ehi.max_constant;
    let mut report = CheckReport::new(
        "ehi",
        g,
        constants([
            ("constant", spike_max),
            ("random_max", random_max),
            ("balls", balls as f64),
            ("skipped", skipped as f64),
        ]),
        passed,
    );
    if !dominated {
        report.notes.push("random boundary data exceeded the spike constant".into());
    }
    Ok(report)
}

fn ratio(vals: &[f64]) -> f64 {
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// Spread of `R(B(x,R), B(x,2R)^c) · μ(B(x,R)) / H(R)` over dyadic
/// `R ∈ [4/d_N, 1/3]` and sampled `x`.
pub fn check_res(g: &ApproxGraph, form: &QuadraticForm, h: &TimeScaling, thresholds: &Thresholds) -> Result<CheckReport> {
    let radii = dyadic(4.0 / g.d() as f64, 1.0 / 3.0);
    let mu = g.measure();
    let (mut c1, mut c2) = (f64::INFINITY, 0.0f64);
    let mut skipped = 0usize;
    for x in sample_centres(g, 25) {
        let hops = g.hops_from(x);
        for &r in &radii {
            let (k1, k2) = (g.radius_hops(r), g.radius_hops(2.0 * r));
            let a: Vec<usize> = (0..g.n_vertices()).filter(|&v| hops[v] <= k1).collect();
            let b: Vec<usize> = (0..g.n_vertices()).filter(|&v| hops[v] > k2).collect();
            if b.is_empty() {
                skipped += 1;
                continue;
            }
            let res = effective_resistance(g, form, &a, &b)?;
            let value = res * a.iter().map(|&v| mu[v]).sum::<f64>() / h.eval(r);
            c1 = c1.min(value);
            c2 = c2.max(value);
        }
    }
    let spread = c2 / c1;
    let passed = spread.is_finite() && spread <= thresholds.res.max_spread;
    Ok(CheckReport::new(
        "res",
        g,
        constants([("c1", c1), ("c2", c2), ("spread", spread), ("skipped", skipped as f64)]),
        passed,
    ))
}

/// Edge orbits under the relations `e ∼ Φ(e)` of a set of cell isometries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantFormSpace {
    pub level: usize,
    pub generators: usize,
    pub rejected: usize,
    /// Orbit label of every edge (its smallest member).
    pub orbit: Vec<usize>,
    pub dimension: usize,
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

pub fn edge_orbits(g: &ApproxGraph, isometries: &[CellIsometry], rejected: usize) -> InvariantFormSpace {
    let mut parent: Vec<usize> = (0..g.n_edges()).collect();
    for iso in isometries {
        for e in g.cell_edges(&iso.source) {
            let (a, b) = (find(&mut parent, e), find(&mut parent, iso.edge_image(g, e)));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let orbit: Vec<usize> = (0..g.n_edges()).map(|e| find(&mut parent, e)).collect();
    let mut labels = orbit.clone();
    labels.sort_unstable();
    labels.dedup();
    InvariantFormSpace { level: g.level(), generators: isometries.len(), rejected, orbit, dimension: labels.len() }
}

/// All validated cell isometries at levels `0..=N`.
pub fn all_cell_isometries(g: &ApproxGraph) -> Result<(Vec<CellIsometry>, usize)> {
    let dist = all_pairs_hops(g);
    let mut accepted = Vec::new();
    let mut rejected = 0;
    for n in 0..=g.level() {
        let cells = cells_at_level(g.space(), n)?;
        for s1 in &cells {
            for s2 in &cells {
                let found = cell_isometries(g, s1, s2, &dist)?;
                rejected += found.rejected.len();
                accepted.extend(found.accepted);
            }
        }
    }
    Ok((accepted, rejected))
}

/// Dimension of the space of conductance vectors invariant under every
/// cell isometry of `G_N`.
pub fn invariant_form_dimension(g: &ApproxGraph) -> Result<InvariantFormSpace> {
    let (isometries, rejected) = all_cell_isometries(g)?;
    Ok(edge_orbits(g, &isometries, rejected))
}

/// Stiffness matrices of both forms in the basis `e_i − e_last`, which spans
/// a complement of the constants.
fn reduced(g: &ApproxGraph, form: &QuadraticForm) -> Result<DMatrix<f64>> {
    if form.len() != g.n_edges() {
        return Err(LaaksoError::Domain { expected: g.n_edges(), got: form.len() });
    }
    let k = form.stiffness_dense(g);
    let n = k.nrows();
    let last = n - 1;
    Ok(DMatrix::from_fn(n - 1, n - 1, |i, j| k[(i, j)] - k[(i, last)] - k[(last, j)] + k[(last, last)]))
}

/// `(inf, sup)` of `B(f,f)/A(f,f)` over non-constant `f`.
pub fn form_ratio_bounds(g: &ApproxGraph, a: &QuadraticForm, b: &QuadraticForm) -> Result<(f64, f64)> {
    let (ra, rb) = (reduced(g, a)?, reduced(g, b)?);
    let chol = ra
        .clone()
        .cholesky()
        .ok_or_else(|| LaaksoError::KernelMismatch("first form vanishes off the constants".into()))?;
    if rb.clone().cholesky().is_none() {
        return Err(LaaksoError::KernelMismatch("second form vanishes off the constants".into()));
    }
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| LaaksoError::Solver("singular Cholesky factor".into()))?;
    let c = &linv * rb * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigenvalues();
    Ok((eig.min(), eig.max()))
}

/// Hilbert's projective distance `log(sup/inf)` of `B` relative to `A`.
pub fn hilbert_distance(g: &ApproxGraph, a: &QuadraticForm, b: &QuadraticForm) -> Result<f64> {
    let (lo, hi) = form_ratio_bounds(g, a, b)?;
    Ok((hi / lo).ln().max(0.0))
}

/// Smallest eigenvalue of `(1+δ)B − λA` off the constants, relative to
/// the largest of `B`.
pub fn combination_min_eigenvalue(
    g: &ApproxGraph,
    a: &QuadraticForm,
    b: &QuadraticForm,
    delta: f64,
    lambda: f64,
) -> Result<f64> {
    let c = reduced(g, b)? * (1.0 + delta) - reduced(g, a)? * lambda;
    let scale = reduced(g, b)?.symmetric_eigenvalues().max();
    Ok(c.symmetric_eigenvalues().min() / scale)
}

/// `max_v ‖ΘL e_v − LΘ e_v‖_∞` with `L = M^{-1}K`.
pub fn theta_commutator(g: &ApproxGraph, form: &QuadraticForm, n: usize) -> Result<f64> {
    let theta = Theta::new(g, n)?;
    let mut worst = 0.0f64;
    for v in 0..g.n_vertices() {
        let mut e = vec![0.0; g.n_vertices()];
        e[v] = 1.0;
        let a = theta.apply(&form.laplacian_apply(g, &e));
        let b = form.laplacian_apply(g, &theta.apply(&e));
        worst = a.iter().zip(&b).fold(worst, |m, (x, y)| m.max((x - y).abs()));
    }
    Ok(worst)
}

/// `ΘL = LΘ` up to the tolerance.
pub fn theta_commutation(g: &ApproxGraph, form: &QuadraticForm, n: usize, thresholds: &Thresholds) -> Result<CheckReport> {
    let norm = theta_commutator(g, form, n)?;
    let mut report =
        CheckReport::new("theta", g, constants([("level", n as f64), ("norm", norm)]), norm <= thresholds.theta.tolerance);
    report.config.push_str(&format!(" n={n}"));
    Ok(report)
}

/// Twenty named test functions: ten low eigenfunctions, the top one, smooth
/// functions of `x`, fiber-dependent ones and two noise vectors.
pub fn besov_battery(g: &ApproxGraph, spec: &SpectralData, seed: u64) -> Vec<(String, Vec<f64>)> {
    let space = g.space();
    let layout = space.layout();
    let n = g.n_vertices();
    let x: Vec<f64> = (0..n).map(|v| g.x(v)).collect();
    let digit = |v: usize, m: usize| -> f64 {
        if m == 0 || m > g.level() {
            0.0
        } else {
            layout.digit(g.vertex(v).fiber(), 0, m) as f64
        }
    };
    let mut out: Vec<(String, Vec<f64>)> = (1..=10.min(spec.len() - 1))
        .map(|m| (format!("eigen{m}"), (0..n).map(|v| spec.phi(m, v)).collect()))
        .collect();
    out.push(("eigen-top".into(), (0..n).map(|v| spec.phi(spec.len() - 1, v)).collect()));
    let pi = std::f64::consts::PI;
    out.push(("x".into(), x.clone()));
    out.push(("x^2".into(), x.iter().map(|t| t * t).collect()));
    out.push(("sin".into(), x.iter().map(|t| (2.0 * pi * t).sin()).collect()));
    out.push(("cos3".into(), x.iter().map(|t| (3.0 * pi * t).cos()).collect()));
    out.push(("tent".into(), x.iter().map(|t| t.min(1.0 - t)).collect()));
    out.push((
        "top-digit".into(),
        (0..n).map(|v| if x[v] <= 0.5 { x[v] * (2.0 * digit(v, 1) - 1.0) } else { 0.0 }).collect(),
    ));
    out.push(("x-weighted".into(), (0..n).map(|v| x[v] * (1.0 + 0.5 * digit(v, 2))).collect()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for name in ["noise1", "noise2"] {
        out.push((name.into(), (0..n).map(|_| rng.sample(StandardNormal)).collect()));
    }
    out
}

/// `C₁ = min N_H/ℰ` and `C₂ = max N_H/ℰ` over the battery, `α = Q`, `H(r) = r²`.
pub fn check_besov(g: &ApproxGraph, form: &QuadraticForm, thresholds: &Thresholds, seed: u64) -> Result<CheckReport> {
    let spec = eigendecompose(g, form)?;
    let hops = all_pairs_hops(g);
    let alpha = g.space().sequence().hausdorff_dimension().value;
    let h = TimeScaling::default();
    let radii = besov_radii(g);
    let (mut c1, mut c2) = (f64::INFINITY, 0.0f64);
    let battery = besov_battery(g, &spec, seed);
    for (_, f) in &battery {
        let r = besov_norm(g, form, &hops, f, &h, alpha, &radii)?;
        if r.energy > 0.0 {
            c1 = c1.min(r.ratio());
            c2 = c2.max(r.ratio());
        }
    }
    let passed = c2 / c1 <= thresholds.besov.max_ratio;
    Ok(CheckReport::new(
        "besov",
        g,
        constants([("c1", c1), ("c2", c2), ("ratio", c2 / c1), ("functions", battery.len() as f64)]),
        passed,
    ))
}

/// Two-sided heat-kernel fit with `H(r) = r²`.
pub fn check_hk(g: &ApproxGraph, form: &QuadraticForm) -> Result<CheckReport> {
    let spec = eigendecompose(g, form)?;
    let centres = sample_centres(g, 4);
    let fit = fit_hk_bounds(g, &spec, &TimeScaling::default(), TimeWindow::fit_default(g), &centres)?;
    let mut report = CheckReport::new(
        "heat-kernel",
        g,
        constants([("c0", fit.c0), ("c_lower", fit.c_lower), ("c_upper", fit.c_upper), ("points", fit.points.len() as f64)]),
        fit.passed,
    );
    report.notes.extend(fit.warnings.iter().map(|w| format!("{w:?}")));
    Ok(report)
}

/// One invariant form, the same form rescaled, and a non-invariant one.
pub fn check_uniqueness(g: &ApproxGraph, thresholds: &Thresholds, seed: u64) -> Result<CheckReport> {
    let space = invariant_form_dimension(g)?;
    let a = g.default_form();
    let b = a.scaled(3.7);
    let h_invariant = hilbert_distance(g, &a, &b)?;
    let perturbed = a.perturbed(0, 1.1);
    let h_perturbed = hilbert_distance(g, &a, &perturbed)?;
    let besov = check_besov(g, &a, thresholds, seed)?;
    let bound = 2.0 * besov.constant("ratio").ln();
    let passed = space.dimension == 1 && space.rejected == 0 && h_invariant < 1e-9 && h_perturbed > 0.0 && h_perturbed <= bound;
    Ok(CheckReport::new(
        "uniqueness",
        g,
        constants([
            ("dimension", space.dimension as f64),
            ("rejected", space.rejected as f64),
            ("h_invariant", h_invariant),
            ("h_perturbed", h_perturbed),
            ("besov_bound", bound),
        ]),
        passed,
    ))
}

pub fn check_folding(g: &ApproxGraph) -> Result<CheckReport> {
    let r = check_folding_lemmas(g, 1..=g.level())?;
    Ok(CheckReport::new(
        "folding",
        g,
        constants([("violations", r.violations() as f64), ("pairs", r.pairs_checked as f64)]),
        r.violations() == 0,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Vd,
    Ehi,
    Res,
    Theta,
    Folding,
    Besov,
    HeatKernel,
    Uniqueness,
}

impl CheckKind {
    pub const ALL: [CheckKind; 8] = [
        CheckKind::Vd,
        CheckKind::Ehi,
        CheckKind::Res,
        CheckKind::Theta,
        CheckKind::Folding,
        CheckKind::Besov,
        CheckKind::HeatKernel,
        CheckKind::Uniqueness,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::Vd => "vd",
            CheckKind::Ehi => "ehi",
            CheckKind::Res => "res",
            CheckKind::Theta => "theta",
            CheckKind::Folding => "folding",
            CheckKind::Besov => "besov",
            CheckKind::HeatKernel => "heat-kernel",
            CheckKind::Uniqueness => "uniqueness",
        }
    }
}

/// Run `checks` in order. A check that errors or panics becomes a failed
/// report; the others still run.
pub fn run_all(g: &ApproxGraph, checks: &[CheckKind], thresholds: &Thresholds, seed: u64) -> Vec<CheckReport> {
    let form = g.default_form();
    checks
        .iter()
        .map(|&kind| {
            let run = || -> Result<CheckReport> {
                match kind {
                    CheckKind::Vd => Ok(check_vd(g, thresholds)),
                    CheckKind::Ehi => check_ehi(g, &form, &EhiOptions { seed, ..EhiOptions::default() }, thresholds),
                    CheckKind::Res => check_res(g, &form, &TimeScaling::default(), thresholds),
                    CheckKind::Theta => {
                        let mut worst = 0.0f64;
                        for n in 0..=g.level() {
                            worst = worst.max(theta_commutator(g, &form, n)?);
                        }
                        Ok(CheckReport::new(
                            "theta",
                            g,
                            constants([("norm", worst)]),
                            worst <= thresholds.theta.tolerance,
                        ))
                    }
                    CheckKind::Folding => check_folding(g),
                    CheckKind::Besov => check_besov(g, &form, thresholds, seed),
                    CheckKind::HeatKernel => check_hk(g, &form),
                    CheckKind::Uniqueness => check_uniqueness(g, thresholds, seed),
                }
            };
            match catch_unwind(AssertUnwindSafe(run)) {
                Ok(Ok(report)) => report,
                Ok(Err(e)) => CheckReport::failed(kind.name(), describe(g), e.to_string()),
                Err(panic) => {
                    let msg = panic
                        .downcast_ref::<String>()
                        .cloned()
                        .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_else(|| "check panicked".into());
                    CheckReport::failed(kind.name(), describe(g), msg)
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Identification, JSequence};

    fn graph(seq: JSequence, n: usize) -> ApproxGraph {
        ApproxGraph::build(seq, n, Identification::Diagonal).unwrap()
    }

    fn two(n: usize) -> ApproxGraph {
        graph(JSequence::constant(2, 1).unwrap(), n)
    }

    #[test]
    fn bundled_thresholds() {
        let t = Thresholds::default();
        assert_eq!(t.version, 1);
        assert_eq!(t.res.max_spread, 20.0);
        assert!(toml::from_str::<Thresholds>("version = 1\nbogus = 2").is_err());
    }

    #[test]
    fn volume_doubling() {
        let g = two(5);
        let r = check_vd(&g, &Thresholds::default());
        assert!(r.constant("min_ratio") >= 1.0);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn constant_data_has_ratio_one() {
        let g = two(4);
        let form = g.default_form();
        let hops = g.hops_from(20);
        let interior: Vec<usize> = (0..g.n_vertices()).filter(|&v| hops[v] < 4).collect();
        let p = DirichletProblem::new(&g, &form, &interior).unwrap();
        let u = p.solve_harmonic(&vec![3.0; g.n_vertices()]).unwrap();
        assert!(interior.iter().all(|&v| (u[v] - 3.0).abs() < 1e-10));
    }

    #[test]
    fn spikes_dominate_random_data() {
        let g = two(3);
        let r = check_ehi(&g, &g.default_form(), &EhiOptions { min_edges: 2, ..EhiOptions::default() }, &Thresholds::default())
            .unwrap();
        assert!(r.constant("balls") > 0.0);
        assert!(r.constant("random_max") <= r.constant("constant") * (1.0 + 1e-9));
        assert!(r.constant("random_max") >= 1.0);
    }

    #[test]
    fn resistance_scaling_is_conductance_invariant() {
        let g = two(4);
        let t = Thresholds::default();
        let a = check_res(&g, &g.default_form(), &TimeScaling::default(), &t).unwrap();
        let b = check_res(&g, &g.default_form().scaled(4.0), &TimeScaling::default(), &t).unwrap();
        assert!((a.constant("spread") - b.constant("spread")).abs() < 1e-9);
        assert!((a.constant("c1") / b.constant("c1") - 4.0).abs() < 1e-9);
        assert!(a.passed);
    }

    #[test]
    fn invariant_forms_are_one_dimensional() {
        for seq in [JSequence::constant(2, 1).unwrap(), JSequence::periodic(vec![2, 3], 1).unwrap()] {
            let g = graph(seq, 3);
            let space = invariant_form_dimension(&g).unwrap();
            assert_eq!(space.dimension, 1);
            assert_eq!(space.rejected, 0);
        }
        let g = two(3);
        assert_eq!(edge_orbits(&g, &[], 0).dimension, g.n_edges());
    }

    #[test]
    fn hilbert_metric() {
        let g = two(2);
        let a = g.default_form();
        assert!(hilbert_distance(&g, &a, &a).unwrap() < 1e-12);
        assert!(hilbert_distance(&g, &a, &a.scaled(2.5)).unwrap() < 1e-12);
        let h = hilbert_distance(&g, &a, &a.perturbed(3, 1.1)).unwrap();
        assert!(h > 0.0 && h < 0.1f64.ln_1p() + 1e-12, "{h}");
        let zero = QuadraticForm::uniform(&g, 0.0);
        assert!(matches!(hilbert_distance(&g, &a, &zero), Err(LaaksoError::KernelMismatch(_))));
    }

    #[test]
    fn combination_stays_nonnegative() {
        let g = two(3);
        let a = g.default_form();
        let b = a.scaled(1.7);
        let (lambda, _) = form_ratio_bounds(&g, &a, &b).unwrap();
        for delta in [1e-3, 0.1, 1.0] {
            assert!(combination_min_eigenvalue(&g, &a, &b, delta, lambda).unwrap() >= -1e-12);
        }
        let c = a.perturbed(0, 1.3);
        let (lambda, _) = form_ratio_bounds(&g, &a, &c).unwrap();
        assert!(combination_min_eigenvalue(&g, &a, &c, 0.0, lambda).unwrap() >= -1e-10);
    }

    #[test]
    fn theta_commutes_with_invariant_forms_only() {
        let g = two(3);
        let t = Thresholds::default();
        let form = g.default_form();
        assert!(theta_commutation(&g, &form, 1, &t).unwrap().passed);
        assert_eq!(theta_commutator(&g, &form, 0).unwrap(), 0.0);
        assert!(theta_commutator(&g, &form.perturbed(2, 1.1), 1).unwrap() > 1e-6);
    }

    #[test]
    fn run_all_is_isolated_and_deterministic() {
        let g = two(3);
        let t = Thresholds::default();
        assert!(run_all(&g, &[], &t, 1).is_empty());
        let checks = [CheckKind::Vd, CheckKind::Theta, CheckKind::Besov];
        let a = serde_json::to_string(&run_all(&g, &checks, &t, 1)).unwrap();
        let b = serde_json::to_string(&run_all(&g, &checks, &t, 1)).unwrap();
        assert_eq!(a, b);
        let mut bad = t.clone();
        bad.vd.max_ratio = 0.5;
        let out = run_all(&g, &[CheckKind::Vd, CheckKind::Folding], &bad, 1);
        assert!(!out[0].passed && out[1].passed);
    }
}
