//! Mean exit times of the continuous-time walk from balls of shrinking radius.

use laakso::graph::ApproxGraph;
use laakso::space::{Fiber, Identification, JSequence};
use laakso::stats::linear_fit;
use laakso::walker::{exit_time, WalkConfig};

fn main() -> laakso::Result<()> {
    let g = ApproxGraph::build(JSequence::constant(2, 1)?, 7, Identification::Diagonal)?;
    let form = g.default_form();
    let cfg = WalkConfig::new(11, 4000);
    let x = g.vertex_at(g.d() / 2, Fiber(0));

    let mut logs = (vec![], vec![]);
    for r in [1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0] {
        let e = exit_time(&cfg, &g, &form, x, r)?;
        println!("r={r:<8} E tau = {:.6} [{:.6}, {:.6}]", e.estimate.mean, e.estimate.lo, e.estimate.hi);
        logs.0.push(r.ln());
        logs.1.push(e.estimate.mean.ln());
    }
    println!("slope {:.3}", linear_fit(&logs.0, &logs.1).slope);
    Ok(())
}
