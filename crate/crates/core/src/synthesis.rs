//! Supervisor synthesis under partial observation: supremal controllable
//! sublanguage, the observability test, and observer-based realization.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::automaton::{Automaton, EventSet, StateId, StateSet, Trace};
use crate::error::{Error, Result};
use crate::ops::{induced, observer, parallel_compose, Composition};

/// Product of a specification with the plant over the plant alphabet, so that
/// events the specification never mentions are disabled rather than free.
fn spec_product(g: &Automaton, spec: &Automaton) -> Result<Composition> {
    let alphabet = g.alphabet().merge(spec.alphabet())?;
    if alphabet.len() != g.alphabet().len() {
        return Err(Error::InvalidInput(
            "specification uses events outside the plant alphabet".into(),
        ));
    }
    parallel_compose(&spec.clone().with_alphabet(alphabet), g)
}

/// Supremal controllable sublanguage of `L(spec) ∩ L(G)` by iterative pruning.
///
/// `Ok(None)` means the supremal sublanguage is empty.
pub fn supremal_controllable(
    g: &Automaton,
    spec: &Automaton,
    uncontrollable: &EventSet,
) -> Result<Option<Automaton>> {
    let prod = spec_product(g, spec)?;
    let k = &prod.automaton;
    let mut good = vec![true; k.num_states()];
    loop {
        let mut changed = false;
        for x in k.states() {
            if !good[x.0] {
                continue;
            }
            let gx = prod.right(x);
            let violates = g.outgoing(gx).any(|(e, _)| {
                uncontrollable.contains(e) && k.target(x, e).is_none_or(|t| !good[t.0])
            });
            if violates {
                good[x.0] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(induced(k, |x| good[x.0], |_, _, _| true).map(|s| s.automaton))
}

/// Definitional controllability check: `K̄ E_uc ∩ L(G) ⊆ K̄`.
pub fn is_controllable(g: &Automaton, k: &Automaton, uncontrollable: &EventSet) -> Result<bool> {
    let prod = spec_product(g, k)?;
    let p = &prod.automaton;
    let ok = p.states().all(|x| {
        g.outgoing(prod.right(x))
            .all(|(e, _)| !uncontrollable.contains(e) || p.target(x, e).is_some())
    });
    Ok(ok)
}

/// Two strings with equal projection that require conflicting control of `event`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObservabilityWitness {
    /// `s·event` is feasible in the plant but leaves the specification.
    pub disabled_after: Trace,
    /// `s'·event` stays inside the specification.
    pub enabled_after: Trace,
    pub event: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObservabilityReport {
    pub observable: bool,
    pub witness: Option<ObservabilityWitness>,
}

/// Decides observability of `L(spec) ∩ L(G)` with respect to `L(G)`, the
/// projection onto `observable` and the controllable events.
pub fn check_observability(
    g: &Automaton,
    spec: &Automaton,
    observable: &EventSet,
    controllable: &EventSet,
) -> Result<ObservabilityReport> {
    let prod = spec_product(g, spec)?;
    let k = &prod.automaton;

    // pairs of K-states reached by strings with the same projection
    type Pair = (StateId, StateId);
    let start: Pair = (k.initial(), k.initial());
    let mut parent: HashMap<Pair, Option<(Pair, String, u8)>> = HashMap::from([(start, None)]);
    let mut queue = VecDeque::from([start]);

    let trace_to = |parent: &HashMap<Pair, Option<(Pair, String, u8)>>, mut at: Pair| {
        let (mut s1, mut s2) = (Vec::new(), Vec::new());
        while let Some(Some((prev, e, who))) = parent.get(&at) {
            if who & 1 != 0 {
                s1.push(e.clone());
            }
            if who & 2 != 0 {
                s2.push(e.clone());
            }
            at = *prev;
        }
        s1.reverse();
        s2.reverse();
        (s1, s2)
    };

    while let Some((p1, p2)) = queue.pop_front() {
        for e in controllable {
            let leaves = k.target(p1, e).is_none() && g.target(prod.right(p1), e).is_some();
            if leaves && k.target(p2, e).is_some() {
                let (s1, s2) = trace_to(&parent, (p1, p2));
                return Ok(ObservabilityReport {
                    observable: false,
                    witness: Some(ObservabilityWitness {
                        disabled_after: s1,
                        enabled_after: s2,
                        event: e.clone(),
                    }),
                });
            }
        }
        let mut next: Vec<(Pair, String, u8)> = Vec::new();
        for (e, t1) in k.outgoing(p1) {
            if observable.contains(e) {
                if let Some(t2) = k.target(p2, e) {
                    next.push(((t1, t2), e.to_string(), 3));
                }
            } else {
                next.push(((t1, p2), e.to_string(), 1));
            }
        }
        for (e, t2) in k.outgoing(p2) {
            if !observable.contains(e) {
                next.push(((p1, t2), e.to_string(), 2));
            }
        }
        for (pair, e, who) in next {
            if let std::collections::hash_map::Entry::Vacant(slot) = parent.entry(pair) {
                slot.insert(Some(((p1, p2), e, who)));
                queue.push_back(pair);
            }
        }
    }
    Ok(ObservabilityReport {
        observable: true,
        witness: None,
    })
}

/// Observer-based realization of a controllable and observable `K`.
///
/// States are numbered in discovery order; enabled unobservable events appear
/// as self-loops. Every state is marked, so marking in a closed loop follows
/// the plant.
pub fn realize_supervisor(
    g: &Automaton,
    k: &Automaton,
    observable: &EventSet,
) -> Result<Automaton> {
    let controllable = g.alphabet().controllable();
    let report = check_observability(g, k, observable, &controllable)?;
    if let Some(w) = report.witness {
        return Err(Error::RealizationRefused(format!(
            "`{}` must be disabled after [{}] but enabled after [{}]",
            w.event,
            w.disabled_after.join(" "),
            w.enabled_after.join(" ")
        )));
    }
    let prod = spec_product(g, k)?;
    let closed = &prod.automaton;
    let hidden: EventSet = g.events().difference(observable).cloned().collect();
    let obs = observer(closed, &hidden)?;

    let mut h = Automaton::new(g.alphabet().clone(), "0");
    for q in obs.automaton.states().skip(1) {
        h.add_state(q.0.to_string());
    }
    for (f, e, t) in obs.automaton.transitions() {
        h.add_transition(f, e, t)?;
    }
    for (q, members) in obs.subsets.iter().enumerate() {
        let enabled: EventSet = members
            .iter()
            .flat_map(|x| closed.outgoing(*x).map(|(e, _)| e.to_string()))
            .filter(|e| hidden.contains(e))
            .collect();
        for e in enabled {
            h.add_transition(StateId(q), &e, StateId(q))?;
        }
        h.set_marked(StateId(q), true)?;
    }
    Ok(h)
}

/// States of `spec` whose removal a caller asked for, as a helper for
/// building state-avoidance specifications.
pub fn avoid_states(g: &Automaton, forbidden: &StateSet) -> Option<Automaton> {
    induced(g, |x| !forbidden.contains(&x), |_, _, _| true).map(|s| s.automaton)
}
