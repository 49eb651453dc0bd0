//! Graphviz rendering.

use std::fmt::Write;

use crate::automaton::{kind_of_name, ArtifactKind, Automaton, StateSet};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// DOT text for `a`. Unsafe states are boxes, marked states have a double
/// border, attack events are dashed.
pub fn to_dot(a: &Automaton, unsafe_states: &StateSet) -> String {
    let mut out = String::new();
    writeln!(out, "digraph G {{").unwrap();
    writeln!(out, "  rankdir=LR;").unwrap();
    writeln!(out, "  __start [shape=point];").unwrap();
    for x in a.states() {
        let mut attrs = vec![format!("label={}", quote(a.name(x)))];
        match (unsafe_states.contains(&x), a.is_marked(x)) {
            (true, true) => attrs.push("shape=box, peripheries=2".into()),
            (true, false) => attrs.push("shape=box".into()),
            (false, true) => attrs.push("shape=doublecircle".into()),
            (false, false) => attrs.push("shape=circle".into()),
        }
        writeln!(out, "  s{} [{}];", x.0, attrs.join(", ")).unwrap();
    }
    writeln!(out, "  __start -> s{};", a.initial().0).unwrap();
    for (f, e, t) in a.transitions() {
        let style = match kind_of_name(e) {
            ArtifactKind::Genuine => "",
            _ => ", style=dashed",
        };
        writeln!(out, "  s{} -> s{} [label={}{}];", f.0, t.0, quote(e), style).unwrap();
    }
    writeln!(out, "}}").unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::build_ae_model;
    use crate::fixtures;

    #[test]
    fn example_one_plant() {
        let (g, h, spec) = fixtures::ex1();
        let four = StateSet::from([g.state_id("4").unwrap()]);
        let dot = to_dot(&g, &four);
        assert_eq!(dot.matches("shape=circle").count(), 3);
        assert_eq!(dot.matches("shape=box").count(), 1);
        assert_eq!(dot.matches(" -> s").count(), 4);
        assert!(!dot.contains("doublecircle"));

        let m = build_ae_model(&g, &h, &spec).unwrap();
        let dot = to_dot(&m.model, &m.unsafe_states);
        assert!(dot.contains("label=\"b#a\", style=dashed"));
        assert_eq!(dot, to_dot(&m.model, &m.unsafe_states));
    }
}
