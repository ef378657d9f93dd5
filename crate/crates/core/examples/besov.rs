//! Besov-type seminorm against the Dirichlet energy for a few test functions.

use laakso::folding::all_pairs_hops;
use laakso::graph::{coordinate, ApproxGraph};
use laakso::space::{Identification, JSequence};
use laakso::spectral::{besov_norm, besov_radii, eigendecompose, TimeScaling};

fn main() -> laakso::Result<()> {
    let g = ApproxGraph::build(JSequence::constant(2, 1)?, 5, Identification::Diagonal)?;
    let form = g.default_form();
    let hops = all_pairs_hops(&g);
    let spec = eigendecompose(&g, &form)?;
    let alpha = g.space().sequence().hausdorff_dimension().value;
    let radii = besov_radii(&g);

    let x = coordinate(&g);
    let sin: Vec<f64> = x.iter().map(|t| (std::f64::consts::PI * t).sin()).collect();
    let eig: Vec<f64> = (0..g.n_vertices()).map(|v| spec.phi(3, v)).collect();
    for (name, f) in [("x", x), ("sin", sin), ("phi_3", eig)] {
        let b = besov_norm(&g, &form, &hops, &f, &TimeScaling::default(), alpha, &radii)?;
        println!("{name:>6}: N_H = {:.5e}  E = {:.5e}  ratio {:.3}", b.n_h, b.energy, b.ratio());
    }
    Ok(())
}
