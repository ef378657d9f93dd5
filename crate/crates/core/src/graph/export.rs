//! CSV dumps of `G_N`.
//!
//! Vertex table: `vertex,position,x,fiber,measure`, where `fiber` lists the
//! `k` words separated by `|`. Edge table:
//! `edge,u,v,position,fiber,conductance`. Lines starting with `#` are
//! header comments.

use std::io::Write;

use super::{ApproxGraph, QuadraticForm};
use crate::error::Result;

fn fiber_field(g: &ApproxGraph, f: crate::space::Fiber) -> String {
    g.space()
        .layout()
        .words(f)
        .iter()
        .map(|w| w.to_string())
        .collect::<Vec<_>>()
        .join("|")
}

impl ApproxGraph {
    pub fn write_vertices_csv<W: Write>(&self, mut out: W, header: Option<&str>) -> Result<()> {
        if let Some(h) = header {
            writeln!(out, "{h}")?;
        }
        writeln!(out, "vertex,position,x,fiber,measure")?;
        for (v, p) in self.vertices().iter().enumerate() {
            writeln!(
                out,
                "{v},{},{},{},{:e}",
                p.position(),
                self.x(v),
                fiber_field(self, p.fiber()),
                self.measure()[v]
            )?;
        }
        Ok(())
    }

    pub fn write_edges_csv<W: Write>(&self, mut out: W, form: &QuadraticForm, header: Option<&str>) -> Result<()> {
        if let Some(h) = header {
            writeln!(out, "{h}")?;
        }
        writeln!(out, "edge,u,v,position,fiber,conductance")?;
        for (id, e) in self.edges().iter().enumerate() {
            let (i, w) = self.edge_label(id);
            writeln!(
                out,
                "{id},{},{},{i},{},{:e}",
                e.u,
                e.v,
                fiber_field(self, w),
                form.conductance()[id]
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use crate::graph::tests::g;

    #[test]
    fn csv_row_counts() {
        let graph = g(2, 1, 2);
        let mut v = Vec::new();
        graph.write_vertices_csv(&mut v, Some("# test")).unwrap();
        let text = String::from_utf8(v).unwrap();
        assert_eq!(text.lines().count(), 2 + 14);
        assert!(text.starts_with("# test\nvertex,"));
        let mut e = Vec::new();
        graph.write_edges_csv(&mut e, &graph.default_form(), None).unwrap();
        assert_eq!(String::from_utf8(e).unwrap().lines().count(), 1 + 16);
    }
}
