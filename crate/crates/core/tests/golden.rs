use laakso::graph::ApproxGraph;
use laakso::space::{Identification, JSequence};
use laakso::spectral::{eigendecompose, eigendecompose_dense};
use serde::Deserialize;

#[derive(Deserialize)]
struct Golden {
    version: u32,
    cases: Vec<Case>,
    tolerance: f64,
}

#[derive(Deserialize)]
struct Case {
    level: usize,
    eigenvalues: Vec<f64>,
}

fn golden() -> Golden {
    let text = include_str!("data/v1/spectrum_j2.json");
    serde_json::from_str(text).expect("golden file parses")
}

#[test]
fn spectrum_matches_closed_form() {
    let g = golden();
    assert_eq!(g.version, 1);
    for case in &g.cases {
        let graph = ApproxGraph::build(JSequence::constant(2, 1).unwrap(), case.level, Identification::Diagonal).unwrap();
        let spec = eigendecompose_dense(&graph, &graph.default_form()).unwrap();
        assert_eq!(spec.eigenvalues.len(), case.eigenvalues.len(), "level {}", case.level);
        for (got, want) in spec.eigenvalues.iter().zip(&case.eigenvalues) {
            assert!((got - want).abs() <= g.tolerance * want.max(1.0), "level {}: {got} vs {want}", case.level);
        }
    }
}

#[test]
fn dispatching_solver_agrees_with_golden() {
    let g = golden();
    let case = g.cases.last().unwrap();
    let graph = ApproxGraph::build(JSequence::constant(2, 1).unwrap(), case.level, Identification::Diagonal).unwrap();
    let spec = eigendecompose(&graph, &graph.default_form()).unwrap();
    let gap = case.eigenvalues[1];
    assert!((spec.spectral_gap() - gap).abs() <= g.tolerance * gap);
}
