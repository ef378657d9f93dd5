use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LaaksoError, Result};
use crate::graph::{ApproxGraph, QuadraticForm, DENSE_LIMIT};

/// Modes computed by the iterative path when no count is given.
pub const LANCZOS_DEFAULT_MODES: usize = 64;

const RESIDUAL_TOL: f64 = 1e-8;

/// Eigenpairs of `−L`: `Kφ = λMφ`, ascending, with `⟨φ_a, φ_b⟩_μ = δ_ab`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    /// Column `m` is `φ_m` on the vertices.
    pub vectors: DMatrix<f64>,
    pub measure: Vec<f64>,
    /// Total number of eigenpairs of the problem (`n`); larger than
    /// `eigenvalues.len()` for a partial decomposition.
    pub dimension: usize,
    /// Largest relative residual `‖Aφ − λφ‖ / max(1, λ)` among the computed pairs.
    pub max_residual: f64,
}

impl SpectralData {
    pub fn is_complete(&self) -> bool {
        self.eigenvalues.len() == self.dimension
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn n_vertices(&self) -> usize {
        self.measure.len()
    }

    pub fn spectral_gap(&self) -> f64 {
        self.eigenvalues.get(1).copied().unwrap_or(f64::INFINITY)
    }

    pub fn phi(&self, m: usize, v: usize) -> f64 {
        self.vectors[(v, m)]
    }
}

/// Dense below [`DENSE_LIMIT`] vertices, shift-invert Lanczos for the lowest
/// [`LANCZOS_DEFAULT_MODES`] pairs above it.
pub fn eigendecompose(g: &ApproxGraph, form: &QuadraticForm) -> Result<SpectralData> {
    if g.n_vertices() <= DENSE_LIMIT {
        eigendecompose_dense(g, form)
    } else {
        eigendecompose_lanczos(g, form, LANCZOS_DEFAULT_MODES)
    }
}

pub fn eigendecompose_dense(g: &ApproxGraph, form: &QuadraticForm) -> Result<SpectralData> {
    let n = g.n_vertices();
    let inv_sqrt: Vec<f64> = g.measure().iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut a = form.stiffness_dense(g);
    for r in 0..n {
        for c in 0..n {
            a[(r, c)] *= inv_sqrt[r] * inv_sqrt[c];
        }
    }
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));

    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    let mut worst: f64 = 0.0;
    for (m, &k) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[k].max(0.0);
        let u = eig.eigenvectors.column(k);
        let res = (&a * u - u * eig.eigenvalues[k]).norm() / lambda.max(1.0);
        worst = worst.max(res);
        values.push(lambda);
        // Fix the sign so that the first nonzero entry is positive.
        let sign = u.iter().find(|x| x.abs() > 1e-12).map_or(1.0, |x| x.signum());
        for v in 0..n {
            vectors[(v, m)] = sign * u[v] * inv_sqrt[v];
        }
    }
    values[0] = 0.0;
    if worst > RESIDUAL_TOL {
        return Err(LaaksoError::NoConvergence { residual: worst, steps: 0 });
    }
    Ok(SpectralData { eigenvalues: values, vectors, measure: g.measure().to_vec(), dimension: n, max_residual: worst })
}

/// Lowest `modes` eigenpairs by Lanczos on `(A + σ)^{-1}`, with
/// `A = M^{-1/2} K M^{-1/2}`, full reorthogonalisation and conjugate-gradient
/// inner solves. A single Krylov sequence sees one copy of each repeated
/// eigenvalue, so converged vectors are locked and the iteration restarts
/// in their orthogonal complement until no new low eigenvalue appears.
pub fn eigendecompose_lanczos(g: &ApproxGraph, form: &QuadraticForm, modes: usize) -> Result<SpectralData> {
    let n = g.n_vertices();
    let modes = modes.min(n);
    let inv_sqrt: Vec<f64> = g.measure().iter().map(|m| 1.0 / m.sqrt()).collect();
    let apply_a = |x: &[f64]| -> Vec<f64> {
        let scaled: Vec<f64> = x.iter().zip(&inv_sqrt).map(|(a, s)| a * s).collect();
        form.stiffness_apply(g, &scaled).iter().zip(&inv_sqrt).map(|(a, s)| a * s).collect()
    };
    let sigma = 1.0;
    let shift_inverse = |b: &[f64]| -> Result<Vec<f64>> {
        cg(|x| apply_a(x).iter().zip(x).map(|(a, b)| a + sigma * b).collect(), b, 1e-13, 20 * n + 2000)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x1a4c_5e0f);
    let mut locked: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut total_steps = 0;
    for _ in 0..n.max(1) {
        let threshold = if locked.len() >= modes { locked[modes - 1].0 } else { f64::INFINITY };
        let want = modes.min(n - locked.len());
        if want == 0 {
            break;
        }
        let (found, steps) = lanczos_run(&shift_inverse, n, want, &locked, &mut rng)?;
        total_steps += steps;
        let mut added = 0;
        for (theta, y) in found {
            let lambda = 1.0 / theta - sigma;
            if lambda <= threshold * (1.0 + 1e-9) + 1e-9 {
                locked.push((lambda, y));
                added += 1;
            }
        }
        locked.sort_by(|a, b| a.0.total_cmp(&b.0));
        if added == 0 {
            break;
        }
    }
    locked.truncate(modes);

    let mut values = Vec::with_capacity(modes);
    let mut vectors = DMatrix::zeros(n, locked.len());
    let mut worst: f64 = 0.0;
    for (m, (lambda, y)) in locked.into_iter().enumerate() {
        let ay = apply_a(&y);
        let res = ay.iter().zip(&y).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt() / lambda.max(1.0);
        worst = worst.max(res);
        let sign = y.iter().find(|x| x.abs() > 1e-12).map_or(1.0, |x| x.signum());
        for v in 0..n {
            vectors[(v, m)] = sign * y[v] * inv_sqrt[v];
        }
        values.push(lambda.max(0.0));
    }
    if let Some(first) = values.first_mut() {
        *first = 0.0;
    }
    if worst > RESIDUAL_TOL {
        return Err(LaaksoError::NoConvergence { residual: worst, steps: total_steps });
    }
    Ok(SpectralData { eigenvalues: values, vectors, measure: g.measure().to_vec(), dimension: n, max_residual: worst })
}

/// One Lanczos sequence in the complement of `locked`; returns the `want`
/// largest converged Ritz pairs of the shift-inverted operator.
fn lanczos_run<F: Fn(&[f64]) -> Result<Vec<f64>>>(
    op: &F,
    n: usize,
    want: usize,
    locked: &[(f64, Vec<f64>)],
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<(f64, Vec<f64>)>, usize)> {
    let room = n - locked.len();
    let max_steps = room.min((4 * want + 200).max(2 * want + 50));
    let project = |w: &mut Vec<f64>, basis: &[Vec<f64>]| {
        for _ in 0..2 {
            for b in locked.iter().map(|(_, y)| y).chain(basis.iter()) {
                let c = dot(w, b);
                for (x, y) in w.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
    };
    let mut q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    project(&mut q, &[]);
    normalize(&mut q);
    let mut basis = vec![q];
    let mut alpha = Vec::with_capacity(max_steps);
    let mut beta: Vec<f64> = Vec::with_capacity(max_steps);
    let mut last_residual = f64::INFINITY;
    for step in 0..max_steps {
        let mut w = op(&basis[step])?;
        alpha.push(dot(&w, &basis[step]));
        project(&mut w, &basis);
        let b = dot(&w, &w).sqrt();
        let len = step + 1;
        let exhausted = b < 1e-10 || len == max_steps;
        if len >= want.min(len) && (len % 10 == 0 || exhausted) {
            let (theta, s) = tridiagonal_eigen(&alpha, &beta);
            let top: Vec<usize> = (0..len).rev().take(want).collect();
            let worst = top
                .iter()
                .map(|&i| (b * s[(len - 1, i)]).abs() / theta[i].abs())
                .fold(0.0f64, f64::max);
            last_residual = worst;
            if worst < 1e-11 || b < 1e-10 {
                let pairs = top
                    .iter()
                    .map(|&i| {
                        let mut y = vec![0.0; n];
                        for (j, q) in basis.iter().take(len).enumerate() {
                            let c = s[(j, i)];
                            for (a, b) in y.iter_mut().zip(q) {
                                *a += c * b;
                            }
                        }
                        project(&mut y, &[]);
                        normalize(&mut y);
                        (theta[i], y)
                    })
                    .collect();
                return Ok((pairs, len));
            }
        }
        if exhausted {
            break;
        }
        beta.push(b);
        for x in w.iter_mut() {
            *x /= b;
        }
        basis.push(w);
    }
    Err(LaaksoError::NoConvergence { residual: last_residual, steps: alpha.len() })
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(k, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(k, k);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vecs)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) {
    let n = dot(x, x).sqrt();
    for v in x.iter_mut() {
        *v /= n;
    }
}

fn cg<F: Fn(&[f64]) -> Vec<f64>>(apply: F, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_next = dot(&r, &r);
        if rr_next.sqrt() <= tol * b_norm {
            return Ok(x);
        }
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(LaaksoError::Solver(format!(
        "inner conjugate gradient stalled at relative residual {:.3e}",
        rr.sqrt() / b_norm
    )))
}
