use nalgebra::DMatrix;

use super::ApproxGraph;
use crate::error::{LaaksoError, Result};
use crate::space::Cell;

/// A nonnegative edge-conductance vector on `G_N`, read as the quadratic
/// form `f ↦ Σ_e c_e (f(u) − f(v))²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    conductance: Vec<f64>,
}

impl QuadraticForm {
    pub fn new(conductance: Vec<f64>) -> Result<Self> {
        if let Some(bad) = conductance.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(LaaksoError::Input(format!("conductance {bad} is not a nonnegative number")));
        }
        Ok(Self { conductance })
    }

    /// `c_e = d_N·2^{-Nk}` on every edge.
    pub fn default_for(g: &ApproxGraph) -> Self {
        Self::uniform(g, g.default_conductance())
    }

    pub fn uniform(g: &ApproxGraph, c: f64) -> Self {
        Self { conductance: vec![c; g.n_edges()] }
    }

    pub fn conductance(&self) -> &[f64] {
        &self.conductance
    }

    pub fn len(&self) -> usize {
        self.conductance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conductance.is_empty()
    }

    pub fn scaled(&self, theta: f64) -> Self {
        Self { conductance: self.conductance.iter().map(|c| c * theta).collect() }
    }

    /// Copy with edge `e` multiplied by `factor`.
    pub fn perturbed(&self, e: usize, factor: f64) -> Self {
        let mut out = self.clone();
        out.conductance[e] *= factor;
        out
    }

    fn check(&self, g: &ApproxGraph) {
        assert_eq!(self.conductance.len(), g.n_edges(), "form and graph disagree on the edge count");
    }

    pub fn energy(&self, g: &ApproxGraph, f: &[f64]) -> f64 {
        self.check(g);
        g.edges()
            .iter()
            .zip(&self.conductance)
            .map(|(e, c)| c * (f[e.u] - f[e.v]).powi(2))
            .sum()
    }

    /// Energy of the edges in `edges` only.
    pub fn partial_energy(&self, g: &ApproxGraph, f: &[f64], edges: &[usize]) -> f64 {
        self.check(g);
        edges
            .iter()
            .map(|&e| {
                let edge = g.edge(e);
                self.conductance[e] * (f[edge.u] - f[edge.v]).powi(2)
            })
            .sum()
    }

    /// `ℰ^S`: the energy carried by the edges of cell `S`.
    pub fn cell_energy(&self, g: &ApproxGraph, cell: &Cell, f: &[f64]) -> f64 {
        self.partial_energy(g, f, &g.cell_edges(cell))
    }

    /// Bilinear form `ℰ(f, h)`.
    pub fn bilinear(&self, g: &ApproxGraph, f: &[f64], h: &[f64]) -> f64 {
        self.check(g);
        g.edges()
            .iter()
            .zip(&self.conductance)
            .map(|(e, c)| c * (f[e.u] - f[e.v]) * (h[e.u] - h[e.v]))
            .sum()
    }

    /// `Lf(v) = (1/μ(v)) Σ_{u∼v} c_{uv} (f(u) − f(v))`.
    pub fn laplacian_apply(&self, g: &ApproxGraph, f: &[f64]) -> Vec<f64> {
        let mut out = self.stiffness_apply(g, f);
        for (o, m) in out.iter_mut().zip(g.measure()) {
            *o = -*o / m;
        }
        out
    }

    /// `Kf` with `K` the weighted graph Laplacian matrix, `ℰ(f,f) = fᵀKf`.
    pub fn stiffness_apply(&self, g: &ApproxGraph, f: &[f64]) -> Vec<f64> {
        self.check(g);
        let mut out = vec![0.0; g.n_vertices()];
        for (e, c) in g.edges().iter().zip(&self.conductance) {
            let flow = c * (f[e.u] - f[e.v]);
            out[e.u] += flow;
            out[e.v] -= flow;
        }
        out
    }

    /// Weighted degree `Σ_{u∼v} c_{uv}` of every vertex.
    pub fn vertex_conductance(&self, g: &ApproxGraph) -> Vec<f64> {
        self.check(g);
        let mut out = vec![0.0; g.n_vertices()];
        for (e, c) in g.edges().iter().zip(&self.conductance) {
            out[e.u] += c;
            out[e.v] += c;
        }
        out
    }

    pub fn stiffness_dense(&self, g: &ApproxGraph) -> DMatrix<f64> {
        self.check(g);
        let n = g.n_vertices();
        let mut k = DMatrix::zeros(n, n);
        for (e, c) in g.edges().iter().zip(&self.conductance) {
            k[(e.u, e.u)] += c;
            k[(e.v, e.v)] += c;
            k[(e.u, e.v)] -= c;
            k[(e.v, e.u)] -= c;
        }
        k
    }

    /// The generator `L` as a dense matrix.
    pub fn laplacian_dense(&self, g: &ApproxGraph) -> DMatrix<f64> {
        let mut l = -self.stiffness_dense(g);
        for (v, m) in g.measure().iter().enumerate() {
            l.row_mut(v).scale_mut(1.0 / m);
        }
        l
    }
}

/// Discrete `|∂f/∂x|` on each edge: `|f(u) − f(v)|·d_N`.
pub fn mgug_of(g: &ApproxGraph, f: &[f64]) -> Vec<f64> {
    let d = g.d() as f64;
    g.edges().iter().map(|e| (f[e.u] - f[e.v]).abs() * d).collect()
}

/// `∫ p_f² dμ` with `p_f` constant on each edge and edge mass `(1/d_N)·2^{-Nk}`.
pub fn mgug_integral(g: &ApproxGraph, f: &[f64]) -> f64 {
    let m = g.edge_measure();
    mgug_of(g, f).iter().map(|p| p * p * m).sum()
}

/// `⟨f, h⟩_μ`.
pub fn inner_mu(g: &ApproxGraph, f: &[f64], h: &[f64]) -> f64 {
    g.measure().iter().zip(f.iter().zip(h)).map(|(m, (a, b))| m * a * b).sum()
}

/// Interval coordinate `x(v)` as a vertex function.
pub fn coordinate(g: &ApproxGraph) -> Vec<f64> {
    (0..g.n_vertices()).map(|v| g.x(v)).collect()
}

impl ApproxGraph {
    pub fn default_form(&self) -> QuadraticForm {
        QuadraticForm::default_for(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::g;
    use crate::space::cells_at_level;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn constant_has_zero_energy_and_laplacian() {
        let graph = g(2, 1, 3);
        let form = graph.default_form();
        let one = vec![1.0; graph.n_vertices()];
        assert_eq!(form.energy(&graph, &one), 0.0);
        assert!(form.laplacian_apply(&graph, &one).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn coordinate_energy_is_one() {
        for (j, n) in [(2, 1), (2, 4), (2, 6), (3, 1), (3, 4)] {
            let graph = g(j, 1, n);
            let x = coordinate(&graph);
            let e = graph.default_form().energy(&graph, &x);
            assert!((e - 1.0).abs() < 1e-12, "j={j} N={n}: {e}");
            assert!((mgug_integral(&graph, &x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn self_adjoint_and_summation_by_parts() {
        for graph in [g(2, 1, 2), g(2, 1, 3), g(2, 2, 2)] {
            let form = graph.default_form();
            let f = random(graph.n_vertices(), 1);
            let h = random(graph.n_vertices(), 2);
            let lf = form.laplacian_apply(&graph, &f);
            let lh = form.laplacian_apply(&graph, &h);
            assert!((inner_mu(&graph, &lf, &h) - inner_mu(&graph, &f, &lh)).abs() < 1e-12 * graph.d().pow(2) as f64);
            let e = form.energy(&graph, &f);
            assert!((e + inner_mu(&graph, &lf, &f)).abs() < 1e-12 * e.max(1.0));
            assert!((mgug_integral(&graph, &f) - e).abs() < 1e-12 * e);
        }
    }

    #[test]
    fn cell_decomposition_of_energy() {
        let graph = g(2, 1, 4);
        let form = graph.default_form();
        let f = random(graph.n_vertices(), 7);
        let total = form.energy(&graph, &f);
        for n in 0..=4 {
            let sum: f64 = cells_at_level(graph.space(), n)
                .unwrap()
                .iter()
                .map(|c| form.cell_energy(&graph, c, &f))
                .sum();
            assert!((sum - total).abs() < 1e-10 * total);
        }
    }

    #[test]
    fn piecewise_linear_energy_is_level_independent() {
        // f = (x − ½)(1 + w_1): slope 1 on the w_1 = 0 sheet, 2 on w_1 = 1;
        // continuous at x = ½ where the sheets meet.
        for n in 1..=6 {
            let graph = g(2, 1, n);
            let layout = graph.space().layout();
            let f: Vec<f64> = graph
                .vertices()
                .iter()
                .map(|p| {
                    let x = graph.space().x(p.position());
                    (x - 0.5) * (1.0 + layout.digit(p.fiber(), 0, 1) as f64)
                })
                .collect();
            let e = graph.default_form().energy(&graph, &f);
            assert!((e - 2.5).abs() < 1e-12, "N = {n}: {e}");
        }
    }

    #[test]
    fn dense_matches_apply() {
        let graph = g(3, 1, 2);
        let form = graph.default_form().perturbed(3, 1.7);
        let f = random(graph.n_vertices(), 3);
        let dense = form.laplacian_dense(&graph) * nalgebra::DVector::from_vec(f.clone());
        let applied = form.laplacian_apply(&graph, &f);
        for (a, b) in dense.iter().zip(&applied) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
