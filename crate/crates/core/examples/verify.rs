//! Run the numerical checks on a small graph and print the constants.

use laakso::graph::ApproxGraph;
use laakso::space::{Identification, JSequence};
use laakso::verify::{run_all, CheckKind, Thresholds};

fn main() -> laakso::Result<()> {
    let g = ApproxGraph::build(JSequence::constant(2, 1)?, 4, Identification::Diagonal)?;
    let checks = [CheckKind::Vd, CheckKind::Res, CheckKind::Theta, CheckKind::Folding, CheckKind::Uniqueness];
    for report in run_all(&g, &checks, &Thresholds::default(), 1) {
        let verdict = if report.passed { "pass" } else { "FAIL" };
        println!("{verdict} {}: {:?}", report.name, report.constants);
        for note in &report.notes {
            println!("    {note}");
        }
    }
    Ok(())
}
