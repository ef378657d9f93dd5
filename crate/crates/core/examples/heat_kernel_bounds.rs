//! Fit two-sided sub-Gaussian bounds to the heat kernel of G_6.

use laakso::graph::ApproxGraph;
use laakso::space::{Identification, JSequence};
use laakso::spectral::{eigendecompose, fit_hk_bounds, on_diagonal_slope, TimeScaling, TimeWindow};
use laakso::verify::sample_centres;

fn main() -> laakso::Result<()> {
    let g = ApproxGraph::build(JSequence::constant(2, 1)?, 6, Identification::Diagonal)?;
    let spec = eigendecompose(&g, &g.default_form())?;
    let centres = sample_centres(&g, 10);

    let fit = fit_hk_bounds(&g, &spec, &TimeScaling::default(), TimeWindow::fit_default(&g), &centres)?;
    println!("c0 = {:.4} over {} points ({} excluded)", fit.c0, fit.points.len(), fit.excluded);
    for w in &fit.warnings {
        println!("warning: {w:?}");
    }

    let window = TimeWindow::diffusive(&g, spec.spectral_gap());
    let slope = on_diagonal_slope(&spec, centres[0], window)?;
    println!("log p_t(x,x) vs log t: slope {:.3} (r2 {:.4})", slope.slope, slope.r2);
    Ok(())
}
