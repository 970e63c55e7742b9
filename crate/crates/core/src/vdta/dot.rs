use std::fmt::Write;

use super::automaton::Vdta;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Renders the automaton as a Graphviz digraph. Accepting locations are
/// double circles; resets are appended to edge labels.
pub fn to_dot(vdta: &Vdta) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", escape(&vdta.name));
    let _ = writeln!(out, "  rankdir=LR;");
    let _ = writeln!(out, "  __start [shape=point];");
    for l in &vdta.locations {
        let shape = if l.accepting { "doublecircle" } else { "circle" };
        let _ = writeln!(out, "  \"{}\" [shape={shape}];", escape(&l.name));
    }
    let _ = writeln!(out, "  __start -> \"{}\";", escape(&vdta.locations[vdta.initial].name));
    for t in &vdta.transitions {
        let mut label = t.label.clone();
        if !t.resets.is_empty() {
            let names: Vec<&str> = t.resets.iter().map(|&r| vdta.clocks[r].as_str()).collect();
            let _ = write!(label, " / {} := 0", names.join(", "));
        }
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"{}\"];",
            escape(&vdta.locations[t.from].name),
            escape(&vdta.locations[t.to].name),
            escape(&label)
        );
    }
    out.push_str("}\n");
    out
}
