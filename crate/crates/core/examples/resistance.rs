//! Effective resistance across G_N and between a ball and the far field.

use laakso::graph::{effective_resistance, ApproxGraph};
use laakso::space::{Identification, JSequence};

fn main() -> laakso::Result<()> {
    for level in 1..=6 {
        let g = ApproxGraph::build(JSequence::constant(2, 1)?, level, Identification::Diagonal)?;
        let form = g.default_form();
        let left: Vec<usize> = g.column(0).collect();
        let right: Vec<usize> = g.column(g.d()).collect();
        let r = effective_resistance(&g, &form, &left, &right)?;

        let x = g.vertex_at(g.d() / 2, laakso::space::Fiber(0));
        let hops = g.hops_from(x);
        let inner = g.ball_hops(&hops, g.radius_hops(0.125));
        let outer: Vec<usize> = (0..g.n_vertices()).filter(|&v| hops[v] > g.radius_hops(0.25)).collect();
        let rb = effective_resistance(&g, &form, &inner, &outer)?;
        println!("N={level}: R(left, right) = {r:.6}  R(B(x,1/8), B(x,1/4)^c) = {rb:.6}");
    }
    Ok(())
}
