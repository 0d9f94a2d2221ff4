use std::fmt::Write;

use super::{Cfg, EdgeKind, NodeKind};

/// Graphviz rendering. Nodes are labelled with their id and span; exceptional
/// edges are dashed.
pub fn to_dot(cfg: &Cfg, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", name.replace('"', "'"));
    for n in &cfg.nodes {
        let label = match (n.kind, n.span) {
            (NodeKind::Entry, _) => format!("{} entry", n.id.0),
            (NodeKind::Exit, _) => format!("{} exit", n.id.0),
            (NodeKind::Eval, Some(s)) => format!("{} eval {s}", n.id.0),
            (_, Some(s)) => format!("{} stmt {s}", n.id.0),
            (_, None) => format!("{}", n.id.0),
        };
        let _ = writeln!(out, "  n{} [label=\"{label}\"];", n.id.0);
    }
    for (a, b, k) in cfg.edges() {
        let attrs = match k {
            EdgeKind::Normal => "",
            EdgeKind::True => " [label=\"T\"]",
            EdgeKind::False => " [label=\"F\"]",
            EdgeKind::Exceptional => " [style=dashed]",
        };
        let _ = writeln!(out, "  n{} -> n{}{attrs};", a.0, b.0);
    }
    out.push_str("}\n");
    out
}
