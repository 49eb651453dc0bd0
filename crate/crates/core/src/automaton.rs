//! Deterministic finite automata with per-event attributes.
//!
//! States are dense indices with preserved display names; the transition
//! function is partial and stored explicitly, so a missing entry means the
//! event is infeasible (or disabled) at that state.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on the number of states any construction may create.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

pub type EventSet = BTreeSet<String>;
pub type StateSet = BTreeSet<StateId>;
pub type Trace = Vec<String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateId(pub usize);

impl StateId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// How an event came into existence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArtifactKind {
    Genuine,
    AeAttacked,
    SeErased,
    SiOnset,
    Renamed,
}

impl ArtifactKind {
    pub const ALL_ARTIFACTS: [ArtifactKind; 4] = [
        ArtifactKind::AeAttacked,
        ArtifactKind::SeErased,
        ArtifactKind::SiOnset,
        ArtifactKind::Renamed,
    ];

    /// Name suffix reserved for this kind (`None` for genuine events).
    pub fn suffix(self) -> Option<&'static str> {
        match self {
            ArtifactKind::Genuine => None,
            ArtifactKind::AeAttacked => Some("#a"),
            ArtifactKind::SeErased => Some("#e"),
            ArtifactKind::SiOnset => Some("#i"),
            ArtifactKind::Renamed => Some("#r"),
        }
    }

    pub fn is_artifact(self) -> bool {
        self != ArtifactKind::Genuine
    }

    /// Name of the artifact derived from `base`.
    pub fn derive(self, base: &str) -> String {
        match self.suffix() {
            Some(s) => format!("{base}{s}"),
            None => base.to_string(),
        }
    }
}

/// Kind inferred from an event name's suffix.
pub fn kind_of_name(name: &str) -> ArtifactKind {
    ArtifactKind::ALL_ARTIFACTS
        .into_iter()
        .find(|k| name.ends_with(k.suffix().unwrap()))
        .unwrap_or(ArtifactKind::Genuine)
}

/// Strips one artifact suffix, if any.
pub fn base_event(name: &str) -> &str {
    match kind_of_name(name).suffix() {
        Some(s) => &name[..name.len() - s.len()],
        None => name,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventAttrs {
    pub observable: bool,
    pub controllable: bool,
    #[serde(default)]
    pub vulnerable: bool,
    #[serde(default = "genuine")]
    pub kind: ArtifactKind,
}

fn genuine() -> ArtifactKind {
    ArtifactKind::Genuine
}

impl EventAttrs {
    pub fn new(observable: bool, controllable: bool) -> Self {
        EventAttrs {
            observable,
            controllable,
            vulnerable: false,
            kind: ArtifactKind::Genuine,
        }
    }
}

/// Per-event attribute table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Alphabet {
    events: BTreeMap<String, EventAttrs>,
}

impl Alphabet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a genuine alphabet from `(name, observable, controllable)` triples.
    pub fn from_flags<'a>(events: impl IntoIterator<Item = (&'a str, bool, bool)>) -> Result<Self> {
        let mut alphabet = Alphabet::new();
        for (name, o, c) in events {
            alphabet.insert(name, EventAttrs::new(o, c))?;
        }
        Ok(alphabet)
    }

    /// Inserts an event. Re-inserting with identical attributes is a no-op.
    pub fn insert(&mut self, name: impl Into<String>, attrs: EventAttrs) -> Result<()> {
        let name = name.into();
        check_artifact_attrs(&name, &attrs)?;
        match self.events.get(&name) {
            Some(existing) if *existing != attrs => Err(Error::AttributeConflict(name)),
            Some(_) => Ok(()),
            None => {
                self.events.insert(name, attrs);
                Ok(())
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&EventAttrs> {
        self.events.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.events.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &EventAttrs)> {
        self.events.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> EventSet {
        self.events.keys().cloned().collect()
    }

    fn select(&self, pred: impl Fn(&EventAttrs) -> bool) -> EventSet {
        self.events
            .iter()
            .filter(|(_, a)| pred(a))
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn observable(&self) -> EventSet {
        self.select(|a| a.observable)
    }

    pub fn unobservable(&self) -> EventSet {
        self.select(|a| !a.observable)
    }

    pub fn controllable(&self) -> EventSet {
        self.select(|a| a.controllable)
    }

    pub fn uncontrollable(&self) -> EventSet {
        self.select(|a| !a.controllable)
    }

    pub fn vulnerable(&self) -> EventSet {
        self.select(|a| a.vulnerable)
    }

    pub fn of_kind(&self, kind: ArtifactKind) -> EventSet {
        self.select(|a| a.kind == kind)
    }

    pub fn is_observable(&self, name: &str) -> bool {
        self.get(name).is_some_and(|a| a.observable)
    }

    pub fn is_controllable(&self, name: &str) -> bool {
        self.get(name).is_some_and(|a| a.controllable)
    }

    /// Union of two tables; shared names must carry equal attributes.
    pub fn merge(&self, other: &Alphabet) -> Result<Alphabet> {
        let mut out = self.clone();
        for (name, attrs) in &other.events {
            out.insert(name.clone(), *attrs)?;
        }
        Ok(out)
    }

    /// Keeps only the named events.
    pub fn restrict(&self, keep: &EventSet) -> Alphabet {
        Alphabet {
            events: self
                .events
                .iter()
                .filter(|(n, _)| keep.contains(*n))
                .map(|(n, a)| (n.clone(), *a))
                .collect(),
        }
    }

    /// Drops the named events.
    pub fn without(&self, drop: &EventSet) -> Alphabet {
        Alphabet {
            events: self
                .events
                .iter()
                .filter(|(n, _)| !drop.contains(*n))
                .map(|(n, a)| (n.clone(), *a))
                .collect(),
        }
    }
}

fn check_artifact_attrs(name: &str, attrs: &EventAttrs) -> Result<()> {
    if attrs.kind.is_artifact() && kind_of_name(name) != attrs.kind {
        return Err(Error::InvalidInput(format!(
            "artifact event `{name}` must carry suffix `{}`",
            attrs.kind.suffix().unwrap()
        )));
    }
    match attrs.kind {
        ArtifactKind::SeErased | ArtifactKind::Renamed if attrs.observable => Err(
            Error::InvalidInput(format!("artifact event `{name}` must be unobservable")),
        ),
        ArtifactKind::SiOnset if attrs.observable || attrs.controllable => {
            Err(Error::InvalidInput(format!(
                "onset event `{name}` must be unobservable and uncontrollable"
            )))
        }
        _ => Ok(()),
    }
}

/// A deterministic automaton with a partial transition function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automaton {
    alphabet: Alphabet,
    names: Vec<String>,
    index: HashMap<String, StateId>,
    delta: Vec<BTreeMap<String, StateId>>,
    initial: StateId,
    marked: StateSet,
}

impl Automaton {
    /// Creates an automaton holding only its initial state.
    pub fn new(alphabet: Alphabet, initial: impl Into<String>) -> Self {
        let initial = initial.into();
        let mut index = HashMap::new();
        index.insert(initial.clone(), StateId(0));
        Automaton {
            alphabet,
            names: vec![initial],
            index,
            delta: vec![BTreeMap::new()],
            initial: StateId(0),
            marked: StateSet::new(),
        }
    }

    /// Convenience constructor from `(from, event, to)` triples.
    pub fn from_transitions(
        alphabet: Alphabet,
        initial: &str,
        transitions: &[(&str, &str, &str)],
    ) -> Result<Self> {
        let mut a = Automaton::new(alphabet, initial);
        for (from, ev, to) in transitions {
            let f = a.add_state(*from);
            let t = a.add_state(*to);
            a.add_transition(f, ev, t)?;
        }
        Ok(a)
    }

    /// Returns the id of `name`, creating the state if needed.
    pub fn add_state(&mut self, name: impl Into<String>) -> StateId {
        let name = name.into();
        if let Some(id) = self.index.get(&name) {
            return *id;
        }
        let id = StateId(self.names.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.delta.push(BTreeMap::new());
        id
    }

    /// Adds a state whose name must be fresh.
    pub fn add_fresh_state(&mut self, name: impl Into<String>) -> Result<StateId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::DuplicateState(name));
        }
        Ok(self.add_state(name))
    }

    pub fn add_transition(&mut self, from: StateId, event: &str, to: StateId) -> Result<()> {
        if !self.alphabet.contains(event) {
            return Err(Error::UnknownEvent(event.to_string()));
        }
        self.check_id(from)?;
        self.check_id(to)?;
        match self.delta[from.0].get(event) {
            Some(existing) if *existing != to => Err(Error::Nondeterministic {
                state: self.names[from.0].clone(),
                event: event.to_string(),
            }),
            _ => {
                self.delta[from.0].insert(event.to_string(), to);
                Ok(())
            }
        }
    }

    pub fn set_marked(&mut self, id: StateId, marked: bool) -> Result<()> {
        self.check_id(id)?;
        if marked {
            self.marked.insert(id);
        } else {
            self.marked.remove(&id);
        }
        Ok(())
    }

    pub fn mark(&mut self, name: &str) -> Result<()> {
        let id = self.state_id(name)?;
        self.set_marked(id, true)
    }

    fn check_id(&self, id: StateId) -> Result<()> {
        if id.0 < self.names.len() {
            Ok(())
        } else {
            Err(Error::UnknownState(format!("#{}", id.0)))
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn events(&self) -> EventSet {
        self.alphabet.names()
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.delta.iter().map(BTreeMap::len).sum()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.names.len()).map(StateId)
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn marked(&self) -> &StateSet {
        &self.marked
    }

    pub fn is_marked(&self, id: StateId) -> bool {
        self.marked.contains(&id)
    }

    pub fn name(&self, id: StateId) -> &str {
        &self.names[id.0]
    }

    pub fn state_id(&self, name: &str) -> Result<StateId> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    pub fn find_state(&self, name: &str) -> Option<StateId> {
        self.index.get(name).copied()
    }

    pub fn target(&self, from: StateId, event: &str) -> Option<StateId> {
        self.delta[from.0].get(event).copied()
    }

    /// Outgoing transitions of `from`, ordered by event name.
    pub fn outgoing(&self, from: StateId) -> impl Iterator<Item = (&str, StateId)> + '_ {
        self.delta[from.0].iter().map(|(e, t)| (e.as_str(), *t))
    }

    /// Active event set Γ(x).
    pub fn active_events(&self, from: StateId) -> EventSet {
        self.delta[from.0].keys().cloned().collect()
    }

    /// All transitions as `(from, event, to)`.
    pub fn transitions(&self) -> impl Iterator<Item = (StateId, &str, StateId)> + '_ {
        self.delta
            .iter()
            .enumerate()
            .flat_map(|(i, m)| m.iter().map(move |(e, t)| (StateId(i), e.as_str(), *t)))
    }

    /// State reached from the initial state by `trace`, if defined.
    pub fn run<S: AsRef<str>>(&self, trace: &[S]) -> Option<StateId> {
        self.run_from(self.initial, trace)
    }

    pub fn run_from<S: AsRef<str>>(&self, from: StateId, trace: &[S]) -> Option<StateId> {
        trace
            .iter()
            .try_fold(from, |x, e| self.target(x, e.as_ref()))
    }

    pub fn accepts<S: AsRef<str>>(&self, trace: &[S]) -> bool {
        self.run(trace).is_some()
    }

    /// Same automaton with every state renamed by `f`; names must stay unique.
    pub fn rename_states(&self, f: impl Fn(StateId, &str) -> String) -> Result<Automaton> {
        let names: Vec<String> = self.states().map(|x| f(x, self.name(x))).collect();
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), StateId(i)).is_some() {
                return Err(Error::DuplicateState(n.clone()));
            }
        }
        Ok(Automaton {
            names,
            index,
            ..self.clone()
        })
    }

    /// Replaces the alphabet; used by constructions that extend the event set.
    pub(crate) fn with_alphabet(mut self, alphabet: Alphabet) -> Self {
        self.alphabet = alphabet;
        self
    }
}

impl fmt::Display for Automaton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "automaton: {} states, {} transitions, initial {}",
            self.num_states(),
            self.num_transitions(),
            self.name(self.initial)
        )?;
        for (from, ev, to) in self.transitions() {
            writeln!(f, "  {} -{}-> {}", self.name(from), ev, self.name(to))?;
        }
        Ok(())
    }
}

/// Renders a tuple of component names as `(s1,s2,...)`.
pub fn tuple_name<S: AsRef<str>>(parts: &[S]) -> String {
    let inner: Vec<&str> = parts.iter().map(AsRef::as_ref).collect();
    format!("({})", inner.join(","))
}

/// Renders a set of names as `{a,b,...}` in lexicographic order.
pub fn set_name<S: AsRef<str>>(parts: &[S]) -> String {
    let mut inner: Vec<&str> = parts.iter().map(AsRef::as_ref).collect();
    inner.sort_unstable();
    format!("{{{}}}", inner.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> Alphabet {
        Alphabet::from_flags([("a", true, false), ("b", true, true), ("c", true, false)]).unwrap()
    }

    #[test]
    fn rejects_nondeterminism() {
        let mut a = Automaton::new(abc(), "1");
        let two = a.add_state("2");
        let three = a.add_state("3");
        a.add_transition(StateId(0), "a", two).unwrap();
        // same target is idempotent
        a.add_transition(StateId(0), "a", two).unwrap();
        let err = a.add_transition(StateId(0), "a", three).unwrap_err();
        assert!(matches!(err, Error::Nondeterministic { .. }));
    }

    #[test]
    fn rejects_unknown_event() {
        let err = Automaton::from_transitions(abc(), "1", &[("1", "z", "2")]).unwrap_err();
        assert_eq!(err, Error::UnknownEvent("z".into()));
    }

    #[test]
    fn attribute_conflict_on_merge() {
        let other = Alphabet::from_flags([("a", false, false)]).unwrap();
        assert_eq!(
            abc().merge(&other).unwrap_err(),
            Error::AttributeConflict("a".into())
        );
    }

    #[test]
    fn suffix_helpers() {
        assert_eq!(base_event("b#a"), "b");
        assert_eq!(base_event("b4#i"), "b4");
        assert_eq!(base_event("plain"), "plain");
        assert_eq!(kind_of_name("x#r"), ArtifactKind::Renamed);
        assert_eq!(ArtifactKind::SeErased.derive("a3"), "a3#e");
    }

    #[test]
    fn artifact_attribute_rules() {
        let mut al = Alphabet::new();
        let erased = EventAttrs {
            observable: true,
            controllable: false,
            vulnerable: false,
            kind: ArtifactKind::SeErased,
        };
        assert!(al.insert("b#e", erased).is_err());
        let onset = EventAttrs {
            observable: false,
            controllable: true,
            vulnerable: false,
            kind: ArtifactKind::SiOnset,
        };
        assert!(al.insert("b#i", onset).is_err());
        let misnamed = EventAttrs {
            observable: false,
            controllable: false,
            vulnerable: false,
            kind: ArtifactKind::SiOnset,
        };
        assert!(al.insert("b", misnamed).is_err());
    }

    #[test]
    fn run_and_active_set() {
        let g = Automaton::from_transitions(
            abc(),
            "1",
            &[("1", "a", "2"), ("2", "b", "3"), ("3", "c", "4")],
        )
        .unwrap();
        assert_eq!(g.name(g.run(&["a", "b"]).unwrap()), "3");
        assert!(!g.accepts(&["b"]));
        assert_eq!(
            g.active_events(g.state_id("2").unwrap()),
            EventSet::from(["b".to_string()])
        );
        assert_eq!(set_name(&["b", "a"]), "{a,b}");
        assert_eq!(tuple_name(&["1", "2"]), "(1,2)");
    }
}
