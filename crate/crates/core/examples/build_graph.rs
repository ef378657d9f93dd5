//! Build G_N for a few sequences and print sizes, dimension and a box count.

use laakso::graph::ApproxGraph;
use laakso::space::{box_counting_dimension, Identification, JSequence};

fn main() -> laakso::Result<()> {
    for (seq, level) in [
        (JSequence::constant(2, 1)?, 6),
        (JSequence::constant(3, 1)?, 4),
        (JSequence::periodic(vec![2, 3], 1)?, 5),
        (JSequence::constant(2, 2)?, 3),
    ] {
        let mode = if seq.fibers() >= 2 { Identification::PerCoordinate } else { Identification::Diagonal };
        let q = seq.hausdorff_dimension();
        let g = ApproxGraph::build(seq, level, mode)?;
        let bc = box_counting_dimension(g.space(), g.vertices(), 1..=level);
        println!(
            "N={level} d={:>4} vertices={:>6} edges={:>6} Q={:.4} box-count={:.4} connected={}",
            g.d(),
            g.n_vertices(),
            g.n_edges(),
            q.value,
            bc.slope,
            g.is_connected()
        );
    }
    Ok(())
}
