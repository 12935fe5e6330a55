use super::CausalNetwork;
use std::fmt::Write;

/// Renders the network as a Graphviz digraph.
///
/// Causal edges are solid and labelled with their probability, isa edges are
/// dashed, disorders are double circles. Output order follows event names.
pub fn to_dot(net: &CausalNetwork) -> String {
    let mut out = String::from("digraph network {\n    rankdir=BT;\n");
    for id in net.ids() {
        let shape = if net.is_disorder(id) { "doublecircle" } else { "circle" };
        writeln!(out, "    \"{}\" [shape={shape}];", net.name(id)).unwrap();
    }
    for l in net.isa_links() {
        writeln!(
            out,
            "    \"{}\" -> \"{}\" [style=dashed, label=\"isa\"];",
            net.name(l.child),
            net.name(l.parent)
        )
        .unwrap();
    }
    for l in net.causal_links() {
        writeln!(
            out,
            "    \"{}\" -> \"{}\" [style=solid, label=\"{}\"];",
            net.name(l.cause),
            net.name(l.effect),
            l.cond_prob
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::parse_network;

    #[test]
    fn fig2_dot_counts() {
        let net = parse_network(include_str!("../../../../fixtures/fig2.cnet")).unwrap();
        let dot = to_dot(&net);
        assert_eq!(dot.matches("[shape=").count(), 7);
        assert_eq!(dot.matches(" -> ").count(), 8);
        assert_eq!(dot.matches("doublecircle").count(), 3);
        assert_eq!(dot.matches("style=dashed").count(), 4);
        assert!(dot.contains("\"b\" -> \"e\" [style=solid, label=\"0.4\"];"));
        assert_eq!(dot, to_dot(&net));
    }

    #[test]
    fn topped_network_shows_top_links() {
        let net = parse_network(include_str!("../../../../fixtures/fig2.cnet")).unwrap();
        let dot = to_dot(&net.add_top().unwrap());
        assert!(dot.contains("\"TOP\" [shape=doublecircle];"));
        assert_eq!(dot.matches("\"TOP\" -> ").count(), 3);
    }
}
