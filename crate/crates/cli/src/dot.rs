use abducer_core::CausalNetwork;
use std::fmt::Write;

/// Causal edges solid with their probability, isa edges dashed, disorders
/// double-circled. Nodes come out in name order, edges in declaration
/// order.
pub fn render(net: &CausalNetwork) -> String {
    let mut out = String::from("digraph network {\n    node [shape=circle];\n");
    for id in net.ids() {
        let e = net.event(id);
        let mut attrs = Vec::new();
        if e.is_disorder {
            attrs.push("shape=doublecircle".to_string());
        }
        if let Some(p) = e.prior {
            attrs.push(format!("xlabel=\"{p}\""));
        }
        if attrs.is_empty() {
            let _ = writeln!(out, "    \"{}\";", e.name);
        } else {
            let _ = writeln!(out, "    \"{}\" [{}];", e.name, attrs.join(", "));
        }
    }
    for l in net.causal_links() {
        let _ = writeln!(
            out,
            "    \"{}\" -> \"{}\" [label=\"{}\"];",
            net.name(l.cause),
            net.name(l.effect),
            l.cond_prob
        );
    }
    for l in net.isa_links() {
        let _ = writeln!(
            out,
            "    \"{}\" -> \"{}\" [style=dashed, label=\"isa\"];",
            net.name(l.child),
            net.name(l.parent)
        );
    }
    out.push_str("}\n");
    out
}
