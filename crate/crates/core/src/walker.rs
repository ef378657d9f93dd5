//! Continuous-time random walk matched to the graph generator, and the
//! experiments built on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LaaksoError, Result};
use crate::folding::{fold_edge, fold_table};
use crate::graph::{ApproxGraph, QuadraticForm};
use crate::space::{Cell, Fiber, FiberLayout, HalfFace, Side};
use crate::stats::{mean_ci, proportion, MeanCi, Proportion};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkConfig {
    pub seed: u64,
    pub walkers: usize,
    /// Walks still running at this time are cut off and flagged.
    pub time_cap: f64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self { seed: 0x1aac5, walkers: 10_000, time_cap: 100.0 }
    }
}

impl WalkConfig {
    pub fn new(seed: u64, walkers: usize) -> Self {
        Self { seed, walkers, ..Self::default() }
    }

    /// Generator for walker `id` of the experiment named `purpose`.
    pub fn rng(&self, purpose: &str, id: u64) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(purpose.as_bytes());
        let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
        rng.set_stream(id);
        rng
    }

    /// Run `f` for each walker id in parallel, results in id order.
    pub fn run<T: Send>(&self, purpose: &str, f: impl Fn(&mut ChaCha8Rng, usize) -> T + Sync) -> Vec<T> {
        (0..self.walkers)
            .into_par_iter()
            .map(|id| f(&mut self.rng(purpose, id as u64), id))
            .collect()
    }
}

/// A realized trajectory: `(vertex, holding time)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkPath {
    pub steps: Vec<(usize, f64)>,
    pub elapsed: f64,
    /// The last holding time was cut at the time cap.
    pub truncated: bool,
}

impl WalkPath {
    /// Vertex occupied at time `t`.
    pub fn state_at(&self, t: f64) -> usize {
        let mut clock = 0.0;
        for &(v, h) in &self.steps {
            clock += h;
            if t < clock {
                return v;
            }
        }
        self.steps.last().map(|s| s.0).expect("nonempty path")
    }

    pub fn vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|s| s.0)
    }
}

/// Holding rates and jump tables of the generator `−M^{-1}K`, optionally
/// restricted to the edges of one cell (the reflected walk).
#[derive(Debug, Clone)]
pub struct Ctrw {
    adj: Vec<Vec<(usize, usize, f64)>>,
    total: Vec<f64>,
    rate: Vec<f64>,
}

impl Ctrw {
    pub fn new(g: &ApproxGraph, form: &QuadraticForm) -> Self {
        Self::filtered(g, form, |_| true, g.measure().to_vec())
    }

    /// The reflected walk on `S`: edges of `S` only, with the measure those
    /// edges induce. Vertices outside `S` are absorbing.
    pub fn reflected(g: &ApproxGraph, form: &QuadraticForm, cell: &Cell) -> Self {
        let inside = |e: usize| g.edge_cell(e, cell.level) == *cell;
        let mut mu = vec![0.0; g.n_vertices()];
        for (e, edge) in g.edges().iter().enumerate() {
            if inside(e) {
                mu[edge.u] += g.edge_measure() / 2.0;
                mu[edge.v] += g.edge_measure() / 2.0;
            }
        }
        Self::filtered(g, form, inside, mu)
    }

    fn filtered(g: &ApproxGraph, form: &QuadraticForm, keep: impl Fn(usize) -> bool, mu: Vec<f64>) -> Self {
        let c = form.conductance();
        let adj: Vec<Vec<(usize, usize, f64)>> = (0..g.n_vertices())
            .map(|v| g.neighbors(v).iter().filter(|&&(_, e)| keep(e)).map(|&(u, e)| (u, e, c[e])).collect())
            .collect();
        let total: Vec<f64> = adj.iter().map(|a| a.iter().map(|x| x.2).sum()).collect();
        let rate = total.iter().zip(&mu).map(|(t, m)| if *m > 0.0 { t / m } else { 0.0 }).collect();
        Self { adj, total, rate }
    }

    /// Jump rate out of `v`.
    pub fn rate(&self, v: usize) -> f64 {
        self.rate[v]
    }

    pub fn hold(&self, v: usize, rng: &mut impl Rng) -> f64 {
        let e: f64 = rng.sample(Exp1);
        e / self.rate[v]
    }

    /// Next `(vertex, edge)`, chosen proportionally to conductance.
    pub fn jump(&self, v: usize, rng: &mut impl Rng) -> (usize, usize) {
        let mut u = rng.random::<f64>() * self.total[v];
        for &(w, e, c) in &self.adj[v] {
            if u < c {
                return (w, e);
            }
            u -= c;
        }
        let &(w, e, _) = self.adj[v].last().expect("vertex has an edge");
        (w, e)
    }

    pub fn edges_at(&self, v: usize) -> &[(usize, usize, f64)] {
        &self.adj[v]
    }

    /// Run from `start` until `stop(vertex)` or the time cap. Returns the
    /// stopping time and vertex, or `None` if the cap came first.
    pub fn run_until(
        &self,
        start: usize,
        cap: f64,
        rng: &mut impl Rng,
        mut stop: impl FnMut(usize) -> bool,
    ) -> Option<(f64, usize)> {
        let mut v = start;
        let mut t = 0.0;
        loop {
            if stop(v) {
                return Some((t, v));
            }
            t += self.hold(v, rng);
            if t > cap {
                return None;
            }
            v = self.jump(v, rng).0;
        }
    }

    /// The path from `start` up to time `horizon`.
    pub fn path(&self, start: usize, horizon: f64, rng: &mut impl Rng) -> WalkPath {
        let mut steps = Vec::new();
        let mut v = start;
        let mut t = 0.0;
        loop {
            let h = self.hold(v, rng);
            if t + h >= horizon {
                steps.push((v, horizon - t));
                return WalkPath { steps, elapsed: horizon, truncated: true };
            }
            steps.push((v, h));
            t += h;
            v = self.jump(v, rng).0;
        }
    }

    /// Vertex at time `t`, without storing the path.
    pub fn state_at(&self, start: usize, t: f64, rng: &mut impl Rng) -> usize {
        let mut v = start;
        let mut clock = self.hold(v, rng);
        while clock <= t {
            v = self.jump(v, rng).0;
            clock += self.hold(v, rng);
        }
        v
    }
}

/// One path of the walk from `start`, run to the time cap.
pub fn step_walk(config: &WalkConfig, g: &ApproxGraph, form: &QuadraticForm, start: usize) -> Result<WalkPath> {
    if start >= g.n_vertices() {
        return Err(LaaksoError::Input(format!("no vertex {start}")));
    }
    Ok(Ctrw::new(g, form).path(start, config.time_cap, &mut config.rng("path", 0)))
}

/// `φ_S` applied pointwise to a path, event times unchanged.
pub fn reflected_path(g: &ApproxGraph, path: &WalkPath, cell: &Cell) -> WalkPath {
    let table = fold_table(g, cell);
    WalkPath {
        steps: path.steps.iter().map(|&(v, h)| (table[v], h)).collect(),
        elapsed: path.elapsed,
        truncated: path.truncated,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitTime {
    pub radius: f64,
    pub estimate: MeanCi,
    pub completed: usize,
    pub walkers: usize,
    /// Some walks hit the time cap; the interval only covers completed ones.
    pub widened: bool,
}

/// Per-walker exit times of the closed ball `B(x, r)`; `None` when the
/// time cap came first.
pub fn exit_times(config: &WalkConfig, g: &ApproxGraph, form: &QuadraticForm, x: usize, r: f64) -> Result<Vec<Option<f64>>> {
    if x >= g.n_vertices() {
        return Err(LaaksoError::Input(format!("no vertex {x}")));
    }
    let hops = g.hops_from(x);
    let k = g.radius_hops(r);
    if hops.iter().all(|&h| h <= k) {
        return Err(LaaksoError::Input(format!("ball of radius {r} is the whole graph")));
    }
    let walk = Ctrw::new(g, form);
    Ok(config.run("exit", |rng, _| walk.run_until(x, config.time_cap, rng, |v| hops[v] > k).map(|(t, _)| t)))
}

/// Mean exit time of the closed ball `B(x, r)`.
pub fn exit_time(config: &WalkConfig, g: &ApproxGraph, form: &QuadraticForm, x: usize, r: f64) -> Result<ExitTime> {
    let times = exit_times(config, g, form, x, r)?;
    let done: Vec<f64> = times.iter().flatten().copied().collect();
    Ok(ExitTime {
        radius: r,
        estimate: mean_ci(&done),
        completed: done.len(),
        walkers: config.walkers,
        widened: done.len() < config.walkers,
    })
}

/// `S_*`: vertices of the cells containing the half-face.
pub fn star_vertices(g: &ApproxGraph, face: &HalfFace) -> Vec<bool> {
    let mut inside = vec![false; g.n_vertices()];
    for cell in face.star(g.space()) {
        for v in g.cell_vertices(&cell) {
            inside[v] = true;
        }
    }
    inside
}

/// The half-face one level down, inside `face.cell`, at the next
/// wormhole in from `face`, on the fiber cylinder `a·0^k`.
pub fn inner_halfface(g: &ApproxGraph, face: &HalfFace) -> Result<HalfFace> {
    let space = g.space();
    let n = face.cell.level + 1;
    if n > space.level() {
        return Err(LaaksoError::LevelMismatch { point: space.level(), cell: n });
    }
    let step = space.d() / space.d_at(n);
    let (interval, position, side) = match face.side {
        Side::Right => (face.position / step, face.position + step, Side::Left),
        Side::Left => (face.position / step - 1, face.position - step, Side::Right),
    };
    let word = FiberLayout::new(n, space.k())?.with_prefix(Fiber(0), face.cell.word, n - 1);
    Ok(HalfFace { position, cell: Cell::new(space, n, interval, word)?, side })
}

/// Probability of reaching `target` before leaving `domain`, from `start`.
pub fn hit_before_leaving(
    config: &WalkConfig,
    walk: &Ctrw,
    purpose: &str,
    start: usize,
    target: &[bool],
    domain: &[bool],
) -> Proportion {
    let hits = config
        .run(purpose, |rng, _| {
            walk.run_until(start, config.time_cap, rng, |v| target[v] || !domain[v])
                .is_some_and(|(_, v)| target[v])
        })
        .into_iter()
        .filter(|&h| h)
        .count();
    proportion(hits, config.walkers)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfFaceHit {
    pub start: usize,
    pub target: HalfFace,
    pub probability: Proportion,
}

/// From `x` on the half-face `face`, the probability of hitting `target`
/// before leaving `S_*`.
pub fn hit_halfface(
    config: &WalkConfig,
    g: &ApproxGraph,
    form: &QuadraticForm,
    face: &HalfFace,
    x: usize,
    target: &HalfFace,
) -> Result<HalfFaceHit> {
    let space = g.space();
    if !face.vertices(space).contains(&g.vertex(x)) {
        return Err(LaaksoError::Input(format!("vertex {x} is not on the half-face")));
    }
    let domain = star_vertices(g, face);
    let mut hit = vec![false; g.n_vertices()];
    for p in target.vertices(space) {
        hit[g.index_of(&p).expect("half-face vertices are canonical")] = true;
    }
    let walk = Ctrw::new(g, form);
    let probability = hit_before_leaving(config, &walk, "halfface", x, &hit, &domain);
    Ok(HalfFaceHit { start: x, target: *target, probability })
}

/// `m` with `r ∈ (1/d_{m+1}, 1/d_m]`, capped at the graph level.
pub fn scale_level(g: &ApproxGraph, r: f64) -> usize {
    let scales = g.space().scales();
    (0..g.level()).find(|&m| r > 1.0 / scales[m + 1] as f64).unwrap_or(g.level())
}

/// `κ = max(1, m' − m − 1)` for `r` at level `m` and `δr` at level `m'`.
pub fn depth_gap_kappa(g: &ApproxGraph, delta: f64, r: f64) -> u32 {
    let m = scale_level(g, r);
    let mp = scale_level(g, delta * r);
    (mp.saturating_sub(m + 1)).max(1) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HitBeforeExit {
    pub delta: f64,
    pub radius: f64,
    pub probability: Proportion,
    pub kappa: u32,
    /// `δ^κ`.
    pub bound: f64,
}

/// From `y`, the probability of reaching `B(x, δr)` before leaving `B(x, r)`.
pub fn hit_before_exit(
    config: &WalkConfig,
    g: &ApproxGraph,
    form: &QuadraticForm,
    y: usize,
    x: usize,
    delta: f64,
    r: f64,
) -> Result<HitBeforeExit> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(LaaksoError::Input(format!("delta must lie in (0, 1/2), got {delta}")));
    }
    let hops = g.hops_from(x);
    if hops[y] as f64 / g.d() as f64 >= 0.5 * r {
        return Err(LaaksoError::Input(format!("vertex {y} is not within r/2 of {x}")));
    }
    let inner = g.radius_hops(delta * r);
    let outer = g.radius_hops(r);
    let target: Vec<bool> = hops.iter().map(|&h| h <= inner).collect();
    let domain: Vec<bool> = hops.iter().map(|&h| h <= outer).collect();
    let walk = Ctrw::new(g, form);
    let probability = hit_before_leaving(config, &walk, "hit-before-exit", y, &target, &domain);
    let kappa = depth_gap_kappa(g, delta, r);
    Ok(HitBeforeExit { delta, radius: r, probability, kappa, bound: delta.powi(kappa as i32) })
}

/// Two lifts of one folded driver path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingResult {
    pub x1: WalkPath,
    pub x2: WalkPath,
    /// `Z = φ_S(X₁) = φ_S(X₂)` up to the coupling time.
    pub driver: WalkPath,
    pub coupling_time: Option<f64>,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub coupled_before_exit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingStats {
    pub probability: Proportion,
    /// Mean coupling time over the pairs that coupled before exit.
    pub coupling_time: MeanCi,
    pub censored: usize,
}

/// Shared state for coupling runs through the cell `S`.
struct Coupler<'a> {
    g: &'a ApproxGraph,
    walk: Ctrw,
    cell: Cell,
    table: Vec<usize>,
    hops1: Vec<u32>,
    hops2: Vec<u32>,
    radius: u32,
}

struct Trace {
    x1: Vec<(usize, f64)>,
    x2: Vec<(usize, f64)>,
    z: Vec<(usize, f64)>,
}

impl<'a> Coupler<'a> {
    fn new(g: &'a ApproxGraph, form: &QuadraticForm, x1: usize, x2: usize, cell: &Cell, r: f64) -> Result<Self> {
        if cell.level > g.level() {
            return Err(LaaksoError::LevelMismatch { point: g.level(), cell: cell.level });
        }
        let walk = Ctrw::new(g, form);
        let r0 = walk.rate(0);
        if (0..g.n_vertices()).any(|v| (walk.rate(v) - r0).abs() > 1e-9 * r0) {
            return Err(LaaksoError::Input("coupling needs a constant holding rate".into()));
        }
        let table = fold_table(g, cell);
        if table[x1] != table[x2] {
            return Err(LaaksoError::Input(format!(
                "vertices {x1} and {x2} have different images under the fold onto the cell"
            )));
        }
        Ok(Self {
            g,
            walk,
            cell: *cell,
            table,
            hops1: g.hops_from(x1),
            hops2: g.hops_from(x2),
            radius: g.radius_hops(r),
        })
    }

    /// Run one pair until both have left their balls or the cap.
    fn run(
        &self,
        x1: usize,
        x2: usize,
        cap: f64,
        rng: &mut impl Rng,
        mut trace: Option<&mut Trace>,
    ) -> Result<(Option<f64>, Option<f64>, Option<f64>)> {
        let (mut v1, mut v2) = (x1, x2);
        let mut t = 0.0;
        let (mut tc, mut tau1, mut tau2) = (None, None, None);
        loop {
            if tc.is_none() && v1 == v2 {
                tc = Some(t);
            }
            if tau1.is_none() && self.hops1[v1] > self.radius {
                tau1 = Some(t);
            }
            if tau2.is_none() && self.hops2[v2] > self.radius {
                tau2 = Some(t);
            }
            if tc.is_none() && self.table[v1] != self.table[v2] {
                return Err(LaaksoError::Solver(format!("lifts left the driver at time {t}")));
            }
            let h = self.walk.hold(v1, rng);
            if let Some(tr) = trace.as_deref_mut() {
                let hh = h.min(cap - t).max(0.0);
                tr.x1.push((v1, hh));
                tr.x2.push((v2, hh));
                if tc.is_none() {
                    tr.z.push((self.table[v1], hh));
                }
            }
            if (tau1.is_some() && tau2.is_some()) || t + h > cap {
                return Ok((tc, tau1, tau2));
            }
            t += h;
            let (n1, e1) = self.walk.jump(v1, rng);
            if tc.is_some() {
                v1 = n1;
                v2 = n1;
                continue;
            }
            let driver = fold_edge(self.g, &self.cell, e1);
            let lifts: Vec<(usize, f64)> = self
                .walk
                .edges_at(v2)
                .iter()
                .filter(|&&(_, e, _)| fold_edge(self.g, &self.cell, e) == driver)
                .map(|&(u, _, c)| (u, c))
                .collect();
            let total: f64 = lifts.iter().map(|l| l.1).sum();
            if lifts.is_empty() {
                return Err(LaaksoError::Solver(format!("no lift of driver edge {driver} at vertex {v2}")));
            }
            let mut u = rng.random::<f64>() * total;
            let mut next = lifts[lifts.len() - 1].0;
            for &(w, c) in &lifts {
                if u < c {
                    next = w;
                    break;
                }
                u -= c;
            }
            v1 = n1;
            v2 = next;
        }
    }
}

fn path_of(steps: Vec<(usize, f64)>) -> WalkPath {
    let elapsed = steps.iter().map(|s| s.1).sum();
    WalkPath { steps, elapsed, truncated: false }
}

/// One coupled pair started at `x₁`, `x₂` with equal images under `φ_S`.
/// The driver steps are drawn by `X₁`; `X₂` follows along a conductance-
/// weighted random edge with the same folded image. `τ_i` is the exit time
/// of `B(x_i, r)`.
pub fn couple(
    config: &WalkConfig,
    g: &ApproxGraph,
    form: &QuadraticForm,
    x1: usize,
    x2: usize,
    cell: &Cell,
    r: f64,
) -> Result<CouplingResult> {
    let coupler = Coupler::new(g, form, x1, x2, cell, r)?;
    let mut trace = Trace { x1: vec![], x2: vec![], z: vec![] };
    let (tc, tau1, tau2) = coupler.run(x1, x2, config.time_cap, &mut config.rng("couple", 0), Some(&mut trace))?;
    Ok(CouplingResult {
        x1: path_of(trace.x1),
        x2: path_of(trace.x2),
        driver: path_of(trace.z),
        coupling_time: tc,
        tau1,
        tau2,
        coupled_before_exit: coupled_before(tc, tau1, tau2),
    })
}

fn coupled_before(tc: Option<f64>, tau1: Option<f64>, tau2: Option<f64>) -> bool {
    let exit = tau1.unwrap_or(f64::INFINITY).min(tau2.unwrap_or(f64::INFINITY));
    tc.is_some_and(|t| t < exit)
}

/// Summary of one coupled pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairOutcome {
    pub coupling_time: Option<f64>,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub coupled_before_exit: bool,
}

/// `config.walkers` independent coupled pairs, in pair order.
pub fn coupling_runs(
    config: &WalkConfig,
    g: &ApproxGraph,
    form: &QuadraticForm,
    x1: usize,
    x2: usize,
    cell: &Cell,
    r: f64,
) -> Result<Vec<PairOutcome>> {
    let coupler = Coupler::new(g, form, x1, x2, cell, r)?;
    config
        .run("couple", |rng, _| coupler.run(x1, x2, config.time_cap, rng, None))
        .into_iter()
        .map(|run| {
            run.map(|(tc, tau1, tau2)| PairOutcome {
                coupling_time: tc,
                tau1,
                tau2,
                coupled_before_exit: coupled_before(tc, tau1, tau2),
            })
        })
        .collect()
}

/// `ℙ(T_C < τ₁ ∧ τ₂)` over `config.walkers` independent pairs.
pub fn coupling_probability(
    config: &WalkConfig,
    g: &ApproxGraph,
    form: &QuadraticForm,
    x1: usize,
    x2: usize,
    cell: &Cell,
    r: f64,
) -> Result<CouplingStats> {
    Ok(coupling_stats(&coupling_runs(config, g, form, x1, x2, cell, r)?))
}

pub fn coupling_stats(runs: &[PairOutcome]) -> CouplingStats {
    let times: Vec<f64> = runs.iter().filter(|p| p.coupled_before_exit).filter_map(|p| p.coupling_time).collect();
    let censored = runs.iter().filter(|p| p.coupling_time.is_none() && (p.tau1.is_none() || p.tau2.is_none())).count();
    CouplingStats { probability: proportion(times.len(), runs.len()), coupling_time: mean_ci(&times), censored }
}

/// Occupation counts of the walk at time `t` from `start`, over all walkers.
pub fn occupation_at(config: &WalkConfig, walk: &Ctrw, purpose: &str, start: usize, t: f64, n: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n];
    for v in config.run(purpose, |rng, _| walk.state_at(start, t, rng)) {
        counts[v] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{cells_at_level, Identification, JSequence};
    use crate::spectral::eigendecompose;
    use crate::stats::chi_square_two_sample;

    fn two(n: usize) -> ApproxGraph {
        ApproxGraph::build(JSequence::constant(2, 1).unwrap(), n, Identification::Diagonal).unwrap()
    }

    #[test]
    fn identical_configs_reproduce_paths() {
        let g = two(3);
        let form = g.default_form();
        let cfg = WalkConfig { time_cap: 0.5, ..WalkConfig::new(7, 1) };
        let a = step_walk(&cfg, &g, &form, 5).unwrap();
        let b = step_walk(&cfg, &g, &form, 5).unwrap();
        assert_eq!(a, b);
        let c = step_walk(&WalkConfig { seed: 8, ..cfg }, &g, &form, 5).unwrap();
        assert_ne!(a, c);
        for w in a.steps.windows(2) {
            assert!(g.neighbors(w[0].0).iter().any(|&(u, _)| u == w[1].0));
            assert!(w[0].1 > 0.0);
        }
        assert!((a.steps.iter().map(|s| s.1).sum::<f64>() - 0.5).abs() < 1e-12);
        let parallel = WalkConfig::new(3, 64).run("x", |rng, id| (id, rng.random::<u64>()));
        assert_eq!(parallel, WalkConfig::new(3, 64).run("x", |rng, id| (id, rng.random::<u64>())));
        assert!(parallel.iter().enumerate().all(|(i, p)| p.0 == i));
    }

    #[test]
    fn single_vertex_ball_is_one_holding_time() {
        let g = two(2);
        let form = g.default_form();
        let x = 3;
        let total: f64 = g.neighbors(x).iter().map(|&(_, e)| form.conductance()[e]).sum();
        let expected = g.measure()[x] / total;
        let est = exit_time(&WalkConfig::new(1, 100_000), &g, &form, x, 0.5 / g.d() as f64).unwrap();
        assert!((est.estimate.mean / expected - 1.0).abs() < 0.02, "{} vs {expected}", est.estimate.mean);
        assert!(!est.widened);
    }

    #[test]
    fn occupation_measure_is_stationary() {
        let g = two(2);
        let walk = Ctrw::new(&g, &g.default_form());
        let mut rng = WalkConfig::new(11, 1).rng("ergodic", 0);
        let mut occupied = vec![0.0; g.n_vertices()];
        let mut v = 0;
        for _ in 0..1_000_000 {
            occupied[v] += walk.hold(v, &mut rng);
            v = walk.jump(v, &mut rng).0;
        }
        let total: f64 = occupied.iter().sum();
        let tv: f64 = occupied.iter().zip(g.measure()).map(|(o, m)| (o / total - m).abs()).sum::<f64>() / 2.0;
        assert!(tv < 0.02, "{tv}");
    }

    #[test]
    fn transition_law_matches_spectral_kernel() {
        let g = two(2);
        let form = g.default_form();
        let spec = eigendecompose(&g, &form).unwrap();
        let walk = Ctrw::new(&g, &form);
        let cfg = WalkConfig::new(5, 40_000);
        let t = 0.05;
        for x in [0, 6] {
            let counts = occupation_at(&cfg, &walk, "kernel", x, t, g.n_vertices());
            let row = spec.heat_kernel_row(t, x).unwrap();
            for y in 0..g.n_vertices() {
                let p = row[y] * g.measure()[y];
                let sigma = (p * (1.0 - p) / cfg.walkers as f64).sqrt();
                let phat = counts[y] as f64 / cfg.walkers as f64;
                assert!((phat - p).abs() <= 3.0 * sigma + 1e-3, "x={x} y={y}: {phat} vs {p}");
            }
        }
    }

    #[test]
    fn detailed_balance() {
        let g = two(2);
        let walk = Ctrw::new(&g, &g.default_form());
        let cfg = WalkConfig::new(9, 50_000);
        let (u, v, t) = (0, 7, 0.04);
        let from_u = occupation_at(&cfg, &walk, "balance-u", u, t, g.n_vertices())[v] as f64 / cfg.walkers as f64;
        let from_v = occupation_at(&cfg, &walk, "balance-v", v, t, g.n_vertices())[u] as f64 / cfg.walkers as f64;
        let (a, b) = (g.measure()[u] * from_u, g.measure()[v] * from_v);
        let sigma = g.measure()[u] * (from_u / cfg.walkers as f64).sqrt() + g.measure()[v] * (from_v / cfg.walkers as f64).sqrt();
        assert!((a - b).abs() <= 3.0 * sigma, "{a} vs {b}");
    }

    #[test]
    fn reflection_fixes_paths_inside_the_cell() {
        let g = two(3);
        let form = g.default_form();
        let cell = cells_at_level(g.space(), 1).unwrap()[1];
        let table = fold_table(&g, &cell);
        let inside = g.cell_vertices(&cell);
        let walk = Ctrw::reflected(&g, &form, &cell);
        let path = walk.path(inside[2], 0.3, &mut WalkConfig::new(1, 1).rng("r", 0));
        assert!(path.vertices().all(|v| inside.contains(&v)));
        assert_eq!(reflected_path(&g, &path, &cell), path);
        let full = Ctrw::new(&g, &form).path(0, 0.3, &mut WalkConfig::new(1, 1).rng("r", 1));
        let z = reflected_path(&g, &full, &cell);
        assert!(z.vertices().all(|v| inside.contains(&v)));
        assert!(z.steps.iter().zip(&full.steps).all(|(a, b)| a.1 == b.1 && a.0 == table[b.0]));
    }

    #[test]
    fn reflected_law_matches_folded_walk() {
        let g = two(2);
        let form = g.default_form();
        let cell = cells_at_level(g.space(), 1).unwrap()[2];
        let table = fold_table(&g, &cell);
        let cfg = WalkConfig::new(21, 20_000);
        let x = g.n_vertices() - 2;
        let folded: Vec<u64> = {
            let raw = occupation_at(&cfg, &Ctrw::new(&g, &form), "x", x, 0.05, g.n_vertices());
            let mut out = vec![0; g.n_vertices()];
            for (v, c) in raw.into_iter().enumerate() {
                out[table[v]] += c;
            }
            out
        };
        let z = occupation_at(&cfg, &Ctrw::reflected(&g, &form, &cell), "z", table[x], 0.05, g.n_vertices());
        assert!(chi_square_two_sample(&folded, &z).p_value > 0.01);
    }

    #[test]
    fn coupling_invariants() {
        let g = two(4);
        let form = g.default_form();
        let cell = cells_at_level(g.space(), 1).unwrap()[0];
        let x = g.vertex_at(3, Fiber(0b0101));
        let same = couple(&WalkConfig::new(1, 1), &g, &form, x, x, &cell, 0.25).unwrap();
        assert_eq!(same.coupling_time, Some(0.0));
        let x1 = g.vertex_at(7, Fiber(0b0000));
        let x2 = g.vertex_at(7, Fiber(0b1000));
        let table = fold_table(&g, &cell);
        for seed in 0..20 {
            let cfg = WalkConfig { time_cap: 5.0, ..WalkConfig::new(seed, 1) };
            let res = couple(&cfg, &g, &form, x1, x2, &cell, 0.45).unwrap();
            let tc = res.coupling_time.unwrap_or(f64::INFINITY);
            let mut clock = 0.0;
            for ((a, b), z) in res.x1.steps.iter().zip(&res.x2.steps).zip(&res.driver.steps) {
                assert!(clock <= tc);
                assert_eq!(table[a.0], z.0);
                assert_eq!(table[b.0], z.0);
                clock += a.1;
            }
            for (a, b) in res.x1.steps.iter().zip(&res.x2.steps) {
                if res.coupling_time.is_some() && a.0 == b.0 {
                    break;
                }
                assert_eq!(table[a.0], table[b.0]);
            }
        }
        let far = g.vertex_at(4, Fiber(0));
        assert!(couple(&WalkConfig::new(1, 1), &g, &form, x1, far, &cell, 0.25).is_err());
    }

    #[test]
    fn kappa_follows_the_depth_gap() {
        let g = two(10);
        let r = 0.2;
        assert_eq!(scale_level(&g, r), 2);
        // δr in (1/d_7, 1/d_6] gives m' = 6.
        assert_eq!(depth_gap_kappa(&g, 0.05, r), 3);
        assert_eq!(depth_gap_kappa(&g, 0.4, r), 1);
    }

    #[test]
    fn nearby_start_hits_first() {
        let g = two(5);
        let form = g.default_form();
        let x = g.vertex_at(16, Fiber(0));
        let res = hit_before_exit(&WalkConfig::new(2, 2000), &g, &form, x, x, 0.4, 0.25).unwrap();
        assert_eq!(res.probability.p, 1.0);
        let y = g.vertex_at(19, Fiber(0));
        let near = hit_before_exit(&WalkConfig::new(2, 4000), &g, &form, y, x, 0.4, 0.25).unwrap();
        assert!(near.probability.p > 0.7, "{:?}", near.probability);
    }

    #[test]
    fn halfface_hitting() {
        let g = two(4);
        let form = g.default_form();
        let space = g.space();
        let cell = Cell::new(space, 1, 1, Fiber(0)).unwrap();
        let face = cell.half_faces(space)[0];
        assert_eq!(face.side, Side::Right);
        let x = g.index_of(&face.vertices(space)[0]).unwrap();
        let target = inner_halfface(&g, &face).unwrap();
        let cfg = WalkConfig::new(4, 20_000);
        let right = hit_halfface(&cfg, &g, &form, &face, x, &target).unwrap();
        assert!(right.probability.p >= 0.125 - 3.0 * right.probability.sigma);
        let mirror = HalfFace { position: face.position, cell: Cell::new(space, 1, 0, Fiber(0)).unwrap(), side: Side::Left };
        let left = hit_halfface(&cfg, &g, &form, &mirror, x, &inner_halfface(&g, &mirror).unwrap()).unwrap();
        let sigma = (right.probability.sigma.powi(2) + left.probability.sigma.powi(2)).sqrt();
        assert!((right.probability.p - left.probability.p).abs() <= 3.0 * sigma);
        let walk = Ctrw::new(&g, &form);
        let mut hit = vec![false; g.n_vertices()];
        hit[g.n_vertices() - 1] = true;
        let all = vec![true; g.n_vertices()];
        assert_eq!(hit_before_leaving(&WalkConfig::new(1, 200), &walk, "whole", x, &hit, &all).p, 1.0);
    }
}
