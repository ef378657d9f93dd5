//! Folding maps onto a cell and the averaging operator built from them.

use laakso::folding::{check_folding_lemmas, fold_edge, phi, theta};
use laakso::graph::{coordinate, ApproxGraph};
use laakso::space::{Cell, Fiber, Identification, JSequence};

fn main() -> laakso::Result<()> {
    let g = ApproxGraph::build(JSequence::constant(2, 1)?, 3, Identification::Diagonal)?;
    let space = g.space();
    let cell = Cell::new(space, 1, 0, Fiber(0))?;

    for p in g.vertices().iter().take(10) {
        let q = phi(space, &cell, p)?;
        println!("{} -> {}", space.format_point(p), space.format_point(&q));
    }
    println!("edge 5 folds onto edge {}", fold_edge(&g, &cell, 5));

    let x = coordinate(&g);
    let avg = theta(&g, 1, &x)?;
    let form = g.default_form();
    println!("E(x) = {:.4}, E(Theta x) = {:.4}", form.energy(&g, &x), form.energy(&g, &avg));

    let report = check_folding_lemmas(&g, 1..=3)?;
    println!("{} violations over {} pairs", report.violations(), report.pairs_checked);
    Ok(())
}
