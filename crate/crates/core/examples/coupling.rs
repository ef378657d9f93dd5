//! Two walkers on different fibers driven by the same folded walk.

use laakso::graph::ApproxGraph;
use laakso::space::{Cell, Fiber, Identification, JSequence};
use laakso::walker::{couple, coupling_probability, WalkConfig};

fn main() -> laakso::Result<()> {
    let g = ApproxGraph::build(JSequence::constant(2, 1)?, 6, Identification::Diagonal)?;
    let form = g.default_form();
    let layout = g.space().layout();
    let cfg = WalkConfig::new(3, 5000);
    let r = 20.0 / g.d() as f64;

    for m in 1..=4 {
        let p = g.d() / g.space().d_at(m);
        let x1 = g.vertex_at(p - 1, Fiber(0));
        let x2 = g.vertex_at(p - 1, Fiber(layout.digit_mask(m)));
        let cell = Cell::new(g.space(), m, 0, Fiber(0))?;
        let stats = coupling_probability(&cfg, &g, &form, x1, x2, &cell, r)?;
        println!(
            "m={m}: P(couple before exit) = {:.3} +- {:.3}, mean T_C = {:.5}",
            stats.probability.p, stats.probability.sigma, stats.coupling_time.mean
        );
    }

    let cell = Cell::new(g.space(), 1, 0, Fiber(0))?;
    let (x1, x2) = (g.vertex_at(31, Fiber(0)), g.vertex_at(31, Fiber(layout.digit_mask(1))));
    let one = couple(&cfg, &g, &form, x1, x2, &cell, r)?;
    println!("single run: {x1} and {x2} coupled at {:?}, exits {:?} / {:?}", one.coupling_time, one.tau1, one.tau2);
    Ok(())
}
