//! Graph algorithms over [`Automaton`]: composition, observers, reachability
//! and deadlock analysis.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::automaton::{
    set_name, tuple_name, Automaton, EventSet, StateId, StateSet, Trace, DEFAULT_STATE_CAP,
};
use crate::error::{Error, Result};

/// Result of [`parallel_compose`]: the accessible product plus the component
/// pair behind every composed state.
#[derive(Debug, Clone)]
pub struct Composition {
    pub automaton: Automaton,
    pub pairs: Vec<(StateId, StateId)>,
}

impl Composition {
    pub fn left(&self, id: StateId) -> StateId {
        self.pairs[id.0].0
    }

    pub fn right(&self, id: StateId) -> StateId {
        self.pairs[id.0].1
    }
}

/// Parallel composition `a || b`: shared events synchronize, private events
/// interleave. Only the accessible part is built.
pub fn parallel_compose(a: &Automaton, b: &Automaton) -> Result<Composition> {
    parallel_compose_capped(a, b, DEFAULT_STATE_CAP)
}

pub fn parallel_compose_capped(a: &Automaton, b: &Automaton, cap: usize) -> Result<Composition> {
    let alphabet = a.alphabet().merge(b.alphabet())?;
    let in_a = a.events();
    let in_b = b.events();

    let (a0, b0) = (a.initial(), b.initial());
    let mut out = Automaton::new(alphabet, tuple_name(&[a.name(a0), b.name(b0)]));
    let mut pairs = vec![(a0, b0)];
    let mut seen: HashMap<(StateId, StateId), StateId> = HashMap::from([((a0, b0), StateId(0))]);
    let mut queue = VecDeque::from([StateId(0)]);

    while let Some(cur) = queue.pop_front() {
        let (xa, xb) = pairs[cur.0];
        // candidate moves keyed by event, in sorted order
        let mut moves: BTreeMap<&str, (StateId, StateId)> = BTreeMap::new();
        for (e, ta) in a.outgoing(xa) {
            if !in_b.contains(e) {
                moves.insert(e, (ta, xb));
            } else if let Some(tb) = b.target(xb, e) {
                moves.insert(e, (ta, tb));
            }
        }
        for (e, tb) in b.outgoing(xb) {
            if !in_a.contains(e) {
                moves.insert(e, (xa, tb));
            }
        }
        for (e, next) in moves {
            let id = match seen.get(&next) {
                Some(id) => *id,
                None => {
                    if pairs.len() >= cap {
                        return Err(Error::ResourceLimit { limit: cap });
                    }
                    let id = out.add_fresh_state(tuple_name(&[a.name(next.0), b.name(next.1)]))?;
                    seen.insert(next, id);
                    pairs.push(next);
                    queue.push_back(id);
                    id
                }
            };
            out.add_transition(cur, e, id)?;
        }
    }
    for (i, (xa, xb)) in pairs.iter().enumerate() {
        if a.is_marked(*xa) && b.is_marked(*xb) {
            out.set_marked(StateId(i), true)?;
        }
    }
    Ok(Composition {
        automaton: out,
        pairs,
    })
}

/// Subset-construction observer plus the member set behind every state.
#[derive(Debug, Clone)]
pub struct Observer {
    pub automaton: Automaton,
    pub subsets: Vec<StateSet>,
}

/// All states reachable from `from` through `allowed` events, `from` included.
pub fn reach(a: &Automaton, from: StateId, allowed: &EventSet) -> Result<StateSet> {
    if from.0 >= a.num_states() {
        return Err(Error::UnknownState(format!("#{}", from.0)));
    }
    Ok(reach_set(a, &StateSet::from([from]), allowed))
}

pub fn reach_set(a: &Automaton, from: &StateSet, allowed: &EventSet) -> StateSet {
    let mut out = from.clone();
    let mut stack: Vec<StateId> = from.iter().copied().collect();
    while let Some(x) = stack.pop() {
        for (e, t) in a.outgoing(x) {
            if allowed.contains(e) && out.insert(t) {
                stack.push(t);
            }
        }
    }
    out
}

/// Successor of an observer state on a visible event, closed under `hidden`.
pub fn observer_successor(
    a: &Automaton,
    current: &StateSet,
    event: &str,
    hidden: &EventSet,
) -> Option<StateSet> {
    let step: StateSet = current.iter().filter_map(|x| a.target(*x, event)).collect();
    if step.is_empty() {
        None
    } else {
        Some(reach_set(a, &step, hidden))
    }
}

/// Observer of `a` with respect to the unobservable set `hidden`.
pub fn observer(a: &Automaton, hidden: &EventSet) -> Result<Observer> {
    observer_capped(a, hidden, DEFAULT_STATE_CAP)
}

pub fn observer_capped(a: &Automaton, hidden: &EventSet, cap: usize) -> Result<Observer> {
    if let Some(e) = hidden.iter().find(|e| !a.alphabet().contains(e)) {
        return Err(Error::UnknownEvent(e.clone()));
    }
    let visible: Vec<String> = a.events().difference(hidden).cloned().collect();
    let name_of = |set: &StateSet| {
        let names: Vec<&str> = set.iter().map(|x| a.name(*x)).collect();
        set_name(&names)
    };

    let start = reach_set(a, &StateSet::from([a.initial()]), hidden);
    let mut out = Automaton::new(a.alphabet().without(hidden), name_of(&start));
    let mut subsets = vec![start.clone()];
    let mut seen: HashMap<StateSet, StateId> = HashMap::from([(start, StateId(0))]);
    let mut queue = VecDeque::from([StateId(0)]);

    while let Some(cur) = queue.pop_front() {
        for e in &visible {
            let Some(next) = observer_successor(a, &subsets[cur.0], e, hidden) else {
                continue;
            };
            let id = match seen.get(&next) {
                Some(id) => *id,
                None => {
                    if subsets.len() >= cap {
                        return Err(Error::ResourceLimit { limit: cap });
                    }
                    let id = out.add_fresh_state(name_of(&next))?;
                    seen.insert(next.clone(), id);
                    subsets.push(next);
                    queue.push_back(id);
                    id
                }
            };
            out.add_transition(cur, e, id)?;
        }
    }
    for (i, s) in subsets.iter().enumerate() {
        if s.iter().any(|x| a.is_marked(*x)) {
            out.set_marked(StateId(i), true)?;
        }
    }
    Ok(Observer {
        automaton: out,
        subsets,
    })
}

/// Natural projection: erases events outside `observable`.
pub fn project<S: AsRef<str>>(trace: &[S], observable: &EventSet) -> Trace {
    trace
        .iter()
        .map(AsRef::as_ref)
        .filter(|e| observable.contains(*e))
        .map(str::to_string)
        .collect()
}

/// States reachable from the initial state.
pub fn reachable(a: &Automaton) -> StateSet {
    reach_set(a, &StateSet::from([a.initial()]), &a.events())
}

/// States from which some state in `targets` is reachable.
pub fn coreachable(a: &Automaton, targets: &StateSet) -> StateSet {
    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); a.num_states()];
    for (f, _, t) in a.transitions() {
        preds[t.0].push(f);
    }
    let mut out = targets.clone();
    let mut stack: Vec<StateId> = targets.iter().copied().collect();
    while let Some(x) = stack.pop() {
        for p in &preds[x.0] {
            if out.insert(*p) {
                stack.push(*p);
            }
        }
    }
    out
}

/// Reachable states with an empty active event set that are not marked.
pub fn deadlock_states(a: &Automaton) -> StateSet {
    reachable(a)
        .into_iter()
        .filter(|x| a.outgoing(*x).next().is_none() && !a.is_marked(*x))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeadlockReport {
    pub deadlocks: StateSet,
    /// Reachable states that cannot reach a marked state; empty when the
    /// automaton has no marked states.
    pub blocking_states: StateSet,
    pub blocking: bool,
}

pub fn deadlock_report(a: &Automaton) -> DeadlockReport {
    let deadlocks = deadlock_states(a);
    let blocking_states: StateSet = if a.marked().is_empty() {
        StateSet::new()
    } else {
        let good = coreachable(a, a.marked());
        reachable(a)
            .into_iter()
            .filter(|x| !good.contains(x))
            .collect()
    };
    DeadlockReport {
        blocking: !blocking_states.is_empty(),
        deadlocks,
        blocking_states,
    }
}

/// A sub-automaton together with the origin of each of its states.
#[derive(Debug, Clone)]
pub struct SubAutomaton {
    pub automaton: Automaton,
    pub origin: Vec<StateId>,
}

/// Accessible part of `a` restricted to states in `keep` and transitions
/// accepted by `allow`. `None` if the initial state is not kept.
pub fn induced(
    a: &Automaton,
    keep: impl Fn(StateId) -> bool,
    allow: impl Fn(StateId, &str, StateId) -> bool,
) -> Option<SubAutomaton> {
    let x0 = a.initial();
    if !keep(x0) {
        return None;
    }
    let mut out = Automaton::new(a.alphabet().clone(), a.name(x0));
    let mut origin = vec![x0];
    let mut map: HashMap<StateId, StateId> = HashMap::from([(x0, StateId(0))]);
    let mut queue = VecDeque::from([x0]);
    while let Some(x) = queue.pop_front() {
        let from = map[&x];
        for (e, t) in a.outgoing(x) {
            if !keep(t) || !allow(x, e, t) {
                continue;
            }
            let to = *map.entry(t).or_insert_with(|| {
                origin.push(t);
                queue.push_back(t);
                out.add_state(a.name(t))
            });
            out.add_transition(from, e, to)
                .expect("subautomaton of a deterministic automaton");
        }
    }
    for (i, o) in origin.iter().enumerate() {
        if a.is_marked(*o) {
            out.set_marked(StateId(i), true).unwrap();
        }
    }
    Some(SubAutomaton {
        automaton: out,
        origin,
    })
}

/// Prunes unreachable states. Reachable states keep their names; ids follow
/// breadth-first order from the initial state.
pub fn accessible(a: &Automaton) -> Automaton {
    induced(a, |_| true, |_, _, _| true).unwrap().automaton
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::Alphabet;

    fn names(a: &Automaton, set: &StateSet) -> Vec<String> {
        set.iter().map(|x| a.name(*x).to_string()).collect()
    }

    fn ev(list: &[&str]) -> EventSet {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn compose_synchronizes_shared_event() {
        let al = Alphabet::from_flags([("a", true, true)]).unwrap();
        let loop_a = Automaton::from_transitions(al.clone(), "1", &[("1", "a", "1")]).unwrap();
        let chain = Automaton::from_transitions(al, "1", &[("1", "a", "2")]).unwrap();
        let c = parallel_compose(&loop_a, &chain).unwrap().automaton;
        assert_eq!(c.num_states(), 2);
        assert_eq!(c.name(c.run(&["a"]).unwrap()), "(1,2)");
        assert!(!c.accepts(&["a", "a"]));
    }

    #[test]
    fn compose_interleaves_private_events() {
        let a = Automaton::from_transitions(
            Alphabet::from_flags([("x", true, true)]).unwrap(),
            "0",
            &[("0", "x", "1")],
        )
        .unwrap();
        let b = Automaton::from_transitions(
            Alphabet::from_flags([("y", true, true)]).unwrap(),
            "0",
            &[("0", "y", "1")],
        )
        .unwrap();
        let c = parallel_compose(&a, &b).unwrap().automaton;
        assert_eq!(c.num_states(), 4);
        assert!(c.accepts(&["x", "y"]) && c.accepts(&["y", "x"]));
    }

    #[test]
    fn compose_attribute_conflict() {
        let a = Automaton::new(Alphabet::from_flags([("x", true, true)]).unwrap(), "0");
        let b = Automaton::new(Alphabet::from_flags([("x", false, true)]).unwrap(), "0");
        assert!(matches!(
            parallel_compose(&a, &b),
            Err(Error::AttributeConflict(_))
        ));
    }

    #[test]
    fn compose_respects_cap() {
        let al = Alphabet::from_flags([("x", true, true)]).unwrap();
        let a = Automaton::from_transitions(al, "0", &[("0", "x", "1"), ("1", "x", "2")]).unwrap();
        let b = Automaton::from_transitions(
            Alphabet::from_flags([("y", true, true)]).unwrap(),
            "0",
            &[("0", "y", "1")],
        )
        .unwrap();
        let err = parallel_compose_capped(&a, &b, 3).unwrap_err();
        assert_eq!(err, Error::ResourceLimit { limit: 3 });
    }

    #[test]
    fn observer_epsilon_closure() {
        let al = Alphabet::from_flags([("u", false, false), ("a", true, false)]).unwrap();
        let a = Automaton::from_transitions(al, "1", &[("1", "u", "2"), ("2", "a", "3")]).unwrap();
        let obs = observer(&a, &ev(&["u"])).unwrap().automaton;
        assert_eq!(obs.num_states(), 2);
        assert_eq!(obs.name(obs.initial()), "{1,2}");
        assert_eq!(obs.name(obs.run(&["a"]).unwrap()), "{3}");
        assert!(!obs.alphabet().contains("u"));
    }

    #[test]
    fn observer_identity_when_nothing_hidden() {
        let al = Alphabet::from_flags([("a", true, false), ("b", true, false)]).unwrap();
        let a = Automaton::from_transitions(
            al,
            "1",
            &[("1", "a", "2"), ("2", "b", "1"), ("3", "a", "1")],
        )
        .unwrap();
        let obs = observer(&a, &EventSet::new()).unwrap().automaton;
        let acc = accessible(&a);
        assert_eq!(obs.num_states(), acc.num_states());
        assert_eq!(obs.num_transitions(), acc.num_transitions());
    }

    #[test]
    fn observer_rejects_unknown_hidden_event() {
        let a = Automaton::new(Alphabet::from_flags([("a", true, false)]).unwrap(), "1");
        assert!(observer(&a, &ev(&["zz"])).is_err());
    }

    #[test]
    fn reach_with_no_events_is_singleton() {
        let al = Alphabet::from_flags([("a", true, false)]).unwrap();
        let a = Automaton::from_transitions(al, "1", &[("1", "a", "2")]).unwrap();
        assert_eq!(
            reach(&a, StateId(0), &EventSet::new()).unwrap(),
            StateSet::from([StateId(0)])
        );
        assert!(matches!(
            reach(&a, StateId(9), &EventSet::new()),
            Err(Error::UnknownState(_))
        ));
    }

    #[test]
    fn projection() {
        let obs = ev(&["a", "b"]);
        assert!(project::<&str>(&[], &obs).is_empty());
        assert_eq!(project(&["a", "u", "b"], &obs), vec!["a", "b"]);
    }

    #[test]
    fn deadlocks_and_blocking() {
        let al = Alphabet::from_flags([("a", true, false), ("b", true, false)]).unwrap();
        let chain = Automaton::from_transitions(al.clone(), "1", &[("1", "a", "2")]).unwrap();
        assert_eq!(names(&chain, &deadlock_states(&chain)), vec!["2"]);
        assert!(!deadlock_report(&chain).blocking);

        let mut g = Automaton::from_transitions(
            al,
            "1",
            &[("1", "a", "2"), ("1", "b", "3"), ("3", "b", "3")],
        )
        .unwrap();
        g.mark("2").unwrap();
        let rep = deadlock_report(&g);
        // the marked terminal state is not a deadlock; the b-livelock blocks
        assert!(rep.deadlocks.is_empty());
        assert!(rep.blocking);
        assert_eq!(names(&g, &rep.blocking_states), vec!["3"]);
    }

    #[test]
    fn accessible_prunes_and_is_idempotent() {
        let al = Alphabet::from_flags([("a", true, false)]).unwrap();
        let a = Automaton::from_transitions(al, "1", &[("1", "a", "2"), ("3", "a", "1")]).unwrap();
        let acc = accessible(&a);
        assert_eq!(acc.num_states(), 2);
        assert!(acc.find_state("3").is_none());
        assert_eq!(accessible(&acc), acc);
    }
}
