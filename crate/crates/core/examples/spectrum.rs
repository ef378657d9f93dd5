//! Low spectrum of the generator and the heat kernel it determines.

use laakso::graph::ApproxGraph;
use laakso::space::{Identification, JSequence};
use laakso::spectral::eigendecompose;

fn main() -> laakso::Result<()> {
    let g = ApproxGraph::build(JSequence::constant(2, 1)?, 5, Identification::Diagonal)?;
    let spec = eigendecompose(&g, &g.default_form())?;
    println!("{} eigenpairs, residual {:.1e}", spec.len(), spec.max_residual);
    for (m, l) in spec.eigenvalues.iter().take(8).enumerate() {
        println!("  lambda_{m} = {l:.6}");
    }

    let x = g.vertex_at(g.d() / 2, laakso::space::Fiber(0));
    for t in [0.001, 0.01, 0.1, 1.0] {
        let p = spec.heat_kernel(t, x, x)?;
        println!("t={t:<6} p_t(x,x)={p:>10.4} trace={:>10.4}", spec.heat_trace(t));
    }

    // mass is conserved
    let row = spec.heat_kernel_row(0.05, x)?;
    let mass: f64 = row.iter().zip(g.measure()).map(|(p, m)| p * m).sum();
    println!("sum_y p_t(x,y) mu(y) = {mass:.12}");
    Ok(())
}
