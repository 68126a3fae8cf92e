use std::fmt::Write as _;

use super::TopoGraph;

/// GraphML export: topology plus relative transforms as edge attributes.
pub fn to_graphml(g: &TopoGraph) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    out.push_str(
        "  <key id=\"created_at\" for=\"node\" attr.name=\"created_at\" attr.type=\"double\"/>\n",
    );
    out.push_str("  <key id=\"dx\" for=\"edge\" attr.name=\"dx\" attr.type=\"double\"/>\n");
    out.push_str("  <key id=\"dy\" for=\"edge\" attr.name=\"dy\" attr.type=\"double\"/>\n");
    out.push_str("  <key id=\"dtheta\" for=\"edge\" attr.name=\"dtheta\" attr.type=\"double\"/>\n");
    out.push_str("  <graph id=\"G\" edgedefault=\"undirected\">\n");
    for n in g.nodes() {
        let _ = writeln!(
            out,
            "    <node id=\"n{}\"><data key=\"created_at\">{}</data></node>",
            n.id, n.created_at
        );
    }
    for e in g.edges() {
        let _ = writeln!(
            out,
            "    <edge source=\"n{}\" target=\"n{}\"><data key=\"dx\">{}</data><data key=\"dy\">{}</data><data key=\"dtheta\">{}</data></edge>",
            e.from, e.to, e.rel_transform.dx, e.rel_transform.dy, e.rel_transform.dtheta
        );
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

/// DOT export for quick visualization.
pub fn to_dot(g: &TopoGraph) -> String {
    let mut out = String::from("graph locations {\n  node [shape=circle];\n");
    for n in g.nodes() {
        let _ = writeln!(out, "  n{};", n.id);
    }
    for e in g.edges() {
        let _ = writeln!(
            out,
            "  n{} -- n{} [label=\"{:.2},{:.2},{:.2}\"];",
            e.from, e.to, e.rel_transform.dx, e.rel_transform.dy, e.rel_transform.dtheta
        );
    }
    out.push_str("}\n");
    out
}
