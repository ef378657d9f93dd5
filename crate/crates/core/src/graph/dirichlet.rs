//! Dirichlet problems on a vertex subset `U`: solve `K_UU x = b`, where `K` is
//! the stiffness matrix of a form.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{ApproxGraph, QuadraticForm};
use crate::error::{LaaksoError, Result};

/// Interior size up to which the dense Cholesky path is used.
pub const DENSE_LIMIT: usize = 2500;

const CG_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Dense,
    ConjugateGradient,
}

enum Factor {
    Dense(Cholesky<f64, Dyn>),
    Sparse {
        diag: Vec<f64>,
        row_offsets: Vec<usize>,
        /// `(column, value)` of off-diagonal entries of `K_UU`.
        entries: Vec<(usize, f64)>,
    },
}

pub struct DirichletProblem<'g> {
    graph: &'g ApproxGraph,
    form: &'g QuadraticForm,
    interior: Vec<usize>,
    /// Local index of each vertex in `interior`, `usize::MAX` outside.
    local: Vec<usize>,
    factor: Factor,
}

impl<'g> DirichletProblem<'g> {
    pub fn new(graph: &'g ApproxGraph, form: &'g QuadraticForm, interior: &[usize]) -> Result<Self> {
        let kind = if interior.len() <= DENSE_LIMIT { SolverKind::Dense } else { SolverKind::ConjugateGradient };
        Self::with_solver(graph, form, interior, kind)
    }

    pub fn with_solver(
        graph: &'g ApproxGraph,
        form: &'g QuadraticForm,
        interior: &[usize],
        kind: SolverKind,
    ) -> Result<Self> {
        if interior.is_empty() {
            return Err(LaaksoError::Input("Dirichlet interior is empty".into()));
        }
        let mut local = vec![usize::MAX; graph.n_vertices()];
        for (k, &v) in interior.iter().enumerate() {
            if local[v] != usize::MAX {
                return Err(LaaksoError::Input(format!("vertex {v} listed twice in the interior")));
            }
            local[v] = k;
        }
        if interior.len() == graph.n_vertices() {
            return Err(LaaksoError::Input("Dirichlet interior has no boundary".into()));
        }
        let c = form.conductance();
        let n = interior.len();
        let factor = match kind {
            SolverKind::Dense => {
                let mut k = DMatrix::<f64>::zeros(n, n);
                for (a, &v) in interior.iter().enumerate() {
                    for &(u, e) in graph.neighbors(v) {
                        k[(a, a)] += c[e];
                        if local[u] != usize::MAX {
                            k[(a, local[u])] -= c[e];
                        }
                    }
                }
                let chol = Cholesky::new(k)
                    .ok_or_else(|| LaaksoError::Solver("interior stiffness matrix is not positive definite".into()))?;
                Factor::Dense(chol)
            }
            SolverKind::ConjugateGradient => {
                let mut diag = vec![0.0; n];
                let mut row_offsets = Vec::with_capacity(n + 1);
                let mut entries = Vec::new();
                for (a, &v) in interior.iter().enumerate() {
                    row_offsets.push(entries.len());
                    for &(u, e) in graph.neighbors(v) {
                        diag[a] += c[e];
                        if local[u] != usize::MAX {
                            entries.push((local[u], -c[e]));
                        }
                    }
                }
                row_offsets.push(entries.len());
                if diag.iter().any(|&x| x <= 0.0) {
                    return Err(LaaksoError::Solver("interior vertex with zero conductance".into()));
                }
                Factor::Sparse { diag, row_offsets, entries }
            }
        };
        Ok(Self { graph, form, interior: interior.to_vec(), local, factor })
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn kind(&self) -> SolverKind {
        match self.factor {
            Factor::Dense(_) => SolverKind::Dense,
            Factor::Sparse { .. } => SolverKind::ConjugateGradient,
        }
    }

    /// Solve `K_UU x = b` for a right-hand side indexed like `interior`.
    pub fn solve_interior(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.interior.len() {
            return Err(LaaksoError::Domain { expected: self.interior.len(), got: b.len() });
        }
        match &self.factor {
            Factor::Dense(chol) => Ok(chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec()),
            Factor::Sparse { diag, row_offsets, entries } => conjugate_gradient(diag, row_offsets, entries, b),
        }
    }

    /// Harmonic extension into `U` of `boundary` (a full vertex vector whose
    /// values inside `U` are ignored). Returns a full vertex vector.
    pub fn solve_harmonic(&self, boundary: &[f64]) -> Result<Vec<f64>> {
        let b = self.boundary_rhs(boundary);
        let x = self.solve_interior(&b)?;
        let mut out = boundary.to_vec();
        for (a, &v) in self.interior.iter().enumerate() {
            out[v] = x[a];
        }
        Ok(out)
    }

    /// `b_u = Σ_{v ∉ U, v ∼ u} c_{uv} g(v)`.
    pub fn boundary_rhs(&self, boundary: &[f64]) -> Vec<f64> {
        let c = self.form.conductance();
        self.interior
            .iter()
            .map(|&v| {
                self.graph
                    .neighbors(v)
                    .iter()
                    .filter(|(u, _)| self.local[*u] == usize::MAX)
                    .map(|&(u, e)| c[e] * boundary[u])
                    .sum()
            })
            .collect()
    }

    /// Vertices outside `U` adjacent to it, ascending.
    pub fn outer_boundary(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .interior
            .iter()
            .flat_map(|&v| self.graph.neighbors(v).iter().map(|&(u, _)| u))
            .filter(|&u| self.local[u] == usize::MAX)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// `E^x[τ_U]` for `x ∈ U`: solves `−Lu = 1` in `U`, `u = 0` outside.
    pub fn expected_exit_times(&self) -> Result<Vec<f64>> {
        let mu = self.graph.measure();
        let b: Vec<f64> = self.interior.iter().map(|&v| mu[v]).collect();
        self.solve_interior(&b)
    }
}

fn conjugate_gradient(diag: &[f64], row_offsets: &[usize], entries: &[(usize, f64)], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let apply = |x: &[f64], out: &mut [f64]| {
        for a in 0..n {
            let mut s = diag[a] * x[a];
            for &(col, val) in &entries[row_offsets[a]..row_offsets[a + 1]] {
                s += val * x[col];
            }
            out[a] = s;
        }
    };
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let max_iter = 20 * n + 1000;
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for a in 0..n {
            x[a] += alpha * p[a];
            r[a] -= alpha * ap[a];
        }
        if dot(&r, &r).sqrt() <= CG_TOLERANCE * b_norm {
            return Ok(x);
        }
        for a in 0..n {
            z[a] = r[a] / diag[a];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for a in 0..n {
            p[a] = z[a] + beta * p[a];
        }
    }
    Err(LaaksoError::Solver(format!(
        "conjugate gradient stalled at relative residual {:.3e}",
        dot(&r, &r).sqrt() / b_norm
    )))
}

/// `R(A, B)`: reciprocal of the minimal energy of `f` with `f = 0` on `A` and
/// `f = 1` on `B`.
pub fn effective_resistance(g: &ApproxGraph, form: &QuadraticForm, a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(LaaksoError::Input("effective resistance needs two nonempty sets".into()));
    }
    let mut fixed = vec![false; g.n_vertices()];
    let mut values = vec![0.0; g.n_vertices()];
    for &v in a {
        fixed[v] = true;
    }
    for &v in b {
        if fixed[v] {
            return Err(LaaksoError::Input(format!("vertex {v} lies in both sets")));
        }
        fixed[v] = true;
        values[v] = 1.0;
    }
    let interior: Vec<usize> = (0..g.n_vertices()).filter(|&v| !fixed[v]).collect();
    let potential = if interior.is_empty() {
        values
    } else {
        DirichletProblem::new(g, form, &interior)?.solve_harmonic(&values)?
    };
    Ok(1.0 / form.energy(g, &potential))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::g;
    use crate::graph::form::coordinate;
    use crate::space::Fiber;

    fn ends(graph: &ApproxGraph) -> (Vec<usize>, Vec<usize>) {
        (graph.column(0).collect(), graph.column(graph.d()).collect())
    }

    #[test]
    fn end_to_end_resistance_is_one() {
        for graph in [g(2, 1, 3), g(2, 1, 6), g(3, 1, 4), g(2, 2, 3)] {
            let form = graph.default_form();
            let (a, b) = ends(&graph);
            let r = effective_resistance(&graph, &form, &a, &b).unwrap();
            assert!((r - 1.0).abs() < 1e-10, "{r}");
            let half = effective_resistance(&graph, &form.scaled(2.0), &a, &b).unwrap();
            assert!((half - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn harmonic_solution_is_the_coordinate() {
        let graph = g(2, 1, 5);
        let form = graph.default_form();
        let (a, b) = ends(&graph);
        let interior: Vec<usize> = (0..graph.n_vertices()).filter(|v| !a.contains(v) && !b.contains(v)).collect();
        let mut bc = vec![0.0; graph.n_vertices()];
        for &v in &b {
            bc[v] = 1.0;
        }
        let x = coordinate(&graph);
        for kind in [SolverKind::Dense, SolverKind::ConjugateGradient] {
            let p = DirichletProblem::with_solver(&graph, &form, &interior, kind).unwrap();
            let h = p.solve_harmonic(&bc).unwrap();
            for v in 0..graph.n_vertices() {
                assert!((h[v] - x[v]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn maximum_principle() {
        let graph = g(2, 1, 4);
        let form = graph.default_form();
        let centre = graph.vertex_at(8, Fiber(5));
        let ball = graph.ball(centre, 0.25);
        let p = DirichletProblem::new(&graph, &form, &ball).unwrap();
        let mut bc = vec![0.0; graph.n_vertices()];
        for (k, v) in p.outer_boundary().into_iter().enumerate() {
            bc[v] = 0.3 + (k % 5) as f64;
        }
        let h = p.solve_harmonic(&bc).unwrap();
        let bvals: Vec<f64> = p.outer_boundary().iter().map(|&v| bc[v]).collect();
        let lo = bvals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = bvals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for &v in &ball {
            assert!(h[v] >= lo - 1e-12 && h[v] <= hi + 1e-12);
        }
    }

    #[test]
    fn exit_time_of_interval_middle() {
        // Open ball of radius ¼ around the ½ wormhole: E τ is of order r².
        let graph = g(2, 1, 6);
        let form = graph.default_form();
        let centre = graph.vertex_at(32, Fiber(0));
        let r = 0.25;
        let interior: Vec<usize> = graph
            .hops_from(centre)
            .iter()
            .enumerate()
            .filter(|(_, &h)| (h as f64) < r * graph.d() as f64)
            .map(|(v, _)| v)
            .collect();
        let p = DirichletProblem::new(&graph, &form, &interior).unwrap();
        let t = p.expected_exit_times().unwrap();
        let at = interior.iter().position(|&v| v == centre).unwrap();
        assert!(t[at] > 0.3 * r * r && t[at] < 3.0 * r * r, "{}", t[at]);
    }

    #[test]
    fn rejects_bad_sets() {
        let graph = g(2, 1, 2);
        let form = graph.default_form();
        assert!(effective_resistance(&graph, &form, &[], &[1]).is_err());
        assert!(effective_resistance(&graph, &form, &[1], &[1]).is_err());
        let all: Vec<usize> = (0..graph.n_vertices()).collect();
        assert!(DirichletProblem::new(&graph, &form, &all).is_err());
    }
}
