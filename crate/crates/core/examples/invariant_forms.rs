//! Forms invariant under every cell isometry, and the Hilbert distance
//! between forms.

use laakso::graph::ApproxGraph;
use laakso::space::{Identification, JSequence};
use laakso::verify::{hilbert_distance, invariant_form_dimension};

fn main() -> laakso::Result<()> {
    for level in 1..=4 {
        let g = ApproxGraph::build(JSequence::constant(2, 1)?, level, Identification::Diagonal)?;
        let space = invariant_form_dimension(&g)?;
        println!(
            "N={level}: {} isometries, {} rejected, invariant dimension {}",
            space.generators, space.rejected, space.dimension
        );
    }

    let g = ApproxGraph::build(JSequence::constant(2, 1)?, 3, Identification::Diagonal)?;
    let a = g.default_form();
    let b = a.scaled(3.0);
    let c = a.perturbed(0, 1.5);
    println!("h(E, 3E) = {:.2e}", hilbert_distance(&g, &a, &b)?);
    println!("h(E, E perturbed on one edge) = {:.4}", hilbert_distance(&g, &a, &c)?);
    Ok(())
}
