//! Bounded enumeration and sampling of generated languages.

use std::collections::BTreeSet;

use rand::Rng;

use crate::automaton::{Automaton, StateId, Trace};

/// Every trace of `a` with at most `max_len` events.
pub fn traces_up_to(a: &Automaton, max_len: usize) -> BTreeSet<Trace> {
    let mut out = BTreeSet::new();
    let mut frontier: Vec<(Trace, StateId)> = vec![(Vec::new(), a.initial())];
    out.insert(Vec::new());
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (trace, x) in &frontier {
            for (e, t) in a.outgoing(*x) {
                let mut longer = trace.clone();
                longer.push(e.to_string());
                out.insert(longer.clone());
                next.push((longer, t));
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    out
}

/// A random walk of at most `max_len` events from the initial state.
pub fn random_trace<R: Rng>(a: &Automaton, max_len: usize, rng: &mut R) -> Trace {
    let mut x = a.initial();
    let mut trace = Vec::new();
    for _ in 0..max_len {
        let moves: Vec<(&str, StateId)> = a.outgoing(x).collect();
        if moves.is_empty() {
            break;
        }
        let (e, t) = moves[rng.gen_range(0..moves.len())];
        trace.push(e.to_string());
        x = t;
    }
    trace
}
