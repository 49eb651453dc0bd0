//! Attack diagnosis: the labeled closed loop, the diagnoser (observer of the
//! labeled automaton) and the verifier-based construction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::attack::AttackedModel;
use crate::automaton::{set_name, Alphabet, ArtifactKind, Automaton, EventSet, StateId, StateSet};
use crate::error::Result;
use crate::ops::{coreachable, induced, observer, observer_successor, parallel_compose, reach_set};

/// Whether an attack event has occurred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Label {
    N,
    Y,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::N => "N",
            Label::Y => "Y",
        })
    }
}

/// `G_M || A_l`, with the closed-loop state and label of every state.
#[derive(Debug, Clone)]
pub struct LabeledAutomaton {
    pub automaton: Automaton,
    pub base: Vec<StateId>,
    pub labels: Vec<Label>,
}

impl LabeledAutomaton {
    pub fn label(&self, x: StateId) -> Label {
        self.labels[x.0]
    }

    pub fn base(&self, x: StateId) -> StateId {
        self.base[x.0]
    }

    pub fn labeled_states(&self, label: Label) -> StateSet {
        self.automaton
            .states()
            .filter(|x| self.label(*x) == label)
            .collect()
    }
}

/// Two-state label automaton: `N` moves to `Y` on any attack event, `Y` is absorbing.
pub fn label_automaton(model: &AttackedModel) -> Automaton {
    let alphabet = model.alphabet().restrict(&model.attack_events);
    let mut a = Automaton::new(alphabet, "N");
    let y = a.add_state("Y");
    for e in &model.attack_events {
        a.add_transition(StateId(0), e, y).unwrap();
        a.add_transition(y, e, y).unwrap();
    }
    a
}

pub fn label_compose(model: &AttackedModel) -> Result<LabeledAutomaton> {
    let label = label_automaton(model);
    let comp = parallel_compose(&model.model, &label)?;
    let base = comp.pairs.iter().map(|p| p.0).collect();
    let labels = comp
        .pairs
        .iter()
        .map(|p| {
            if p.1 == StateId(0) {
                Label::N
            } else {
                Label::Y
            }
        })
        .collect();
    Ok(LabeledAutomaton {
        automaton: comp.automaton,
        base,
        labels,
    })
}

/// Classification of a diagnoser state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Class {
    /// Every member is labeled `N`.
    Normal,
    /// Every member is labeled `Y`: the attack is detected.
    Certain,
    /// Both labels occur.
    Uncertain,
}

fn classify(labeled: &LabeledAutomaton, members: &StateSet) -> Class {
    let y = members
        .iter()
        .filter(|x| labeled.label(**x) == Label::Y)
        .count();
    if y == 0 {
        Class::Normal
    } else if y == members.len() {
        Class::Certain
    } else {
        Class::Uncertain
    }
}

/// Observer of the labeled closed loop.
#[derive(Debug, Clone)]
pub struct Diagnoser {
    pub labeled: LabeledAutomaton,
    pub automaton: Automaton,
    /// Labeled-automaton states behind every diagnoser state.
    pub members: Vec<StateSet>,
    pub classes: Vec<Class>,
}

impl Diagnoser {
    pub fn class(&self, q: StateId) -> Class {
        self.classes[q.0]
    }

    pub fn states_of_class(&self, class: Class) -> StateSet {
        self.automaton
            .states()
            .filter(|q| self.class(*q) == class)
            .collect()
    }

    /// `(closed-loop state, label)` pairs of `q`.
    pub fn pairs(&self, q: StateId) -> Vec<(StateId, Label)> {
        self.members[q.0]
            .iter()
            .map(|x| (self.labeled.base(*x), self.labeled.label(*x)))
            .collect()
    }

    /// Certain states entered from a non-certain state.
    pub fn first_entered_certain(&self) -> StateSet {
        self.automaton
            .transitions()
            .filter(|(f, _, t)| {
                self.class(*f) != Class::Certain && self.class(*t) == Class::Certain
            })
            .map(|(_, _, t)| t)
            .collect()
    }

    /// For every first-entered certain state, the closed-loop states in which
    /// the detecting observation can arrive: targets of that event from the
    /// members of the preceding non-certain state.
    pub fn detection_entries(&self, model: &Automaton) -> BTreeMap<StateId, StateSet> {
        let mut out: BTreeMap<StateId, StateSet> = BTreeMap::new();
        for (f, e, t) in self.automaton.transitions() {
            if self.class(f) == Class::Certain || self.class(t) != Class::Certain {
                continue;
            }
            let entry = out.entry(t).or_default();
            for x in &self.members[f.0] {
                if let Some(y) = model.target(self.labeled.base(*x), e) {
                    entry.insert(y);
                }
            }
        }
        out
    }
}

pub fn build_diagnoser(labeled: LabeledAutomaton, unobservable: &EventSet) -> Result<Diagnoser> {
    let hidden: EventSet = unobservable
        .iter()
        .filter(|e| labeled.automaton.alphabet().contains(e))
        .cloned()
        .collect();
    let obs = observer(&labeled.automaton, &hidden)?;
    let classes = obs.subsets.iter().map(|s| classify(&labeled, s)).collect();
    Ok(Diagnoser {
        labeled,
        automaton: obs.automaton,
        members: obs.subsets,
        classes,
    })
}

/// Diagnoser of an attacked model.
pub fn diagnoser_for(model: &AttackedModel) -> Result<Diagnoser> {
    build_diagnoser(label_compose(model)?, &model.unobservable())
}

/// Diagnoser computed on the fly, one observation at a time.
#[derive(Debug, Clone)]
pub struct OnlineDiagnoser {
    pub labeled: LabeledAutomaton,
    hidden: EventSet,
}

impl OnlineDiagnoser {
    pub fn new(model: &AttackedModel) -> Result<Self> {
        Ok(OnlineDiagnoser {
            labeled: label_compose(model)?,
            hidden: model.unobservable(),
        })
    }

    pub fn initial(&self) -> StateSet {
        let a = &self.labeled.automaton;
        reach_set(a, &StateSet::from([a.initial()]), &self.hidden)
    }

    /// Estimate after observing `event`; `None` if the observation is impossible.
    pub fn successor(&self, estimate: &StateSet, event: &str) -> Option<StateSet> {
        observer_successor(&self.labeled.automaton, estimate, event, &self.hidden)
    }

    pub fn classify(&self, estimate: &StateSet) -> Class {
        classify(&self.labeled, estimate)
    }

    pub fn name(&self, estimate: &StateSet) -> String {
        let names: Vec<&str> = estimate
            .iter()
            .map(|x| self.labeled.automaton.name(*x))
            .collect();
        set_name(&names)
    }
}

/// A composition that remembers the two component states of every state.
#[derive(Debug, Clone)]
pub struct Product {
    pub automaton: Automaton,
    pub pairs: Vec<(StateId, StateId)>,
}

/// Intermediate automata of the verifier construction. The automata that
/// depend on attacked behavior are `None` when no attack string exists.
#[derive(Debug, Clone)]
pub struct VerifierArtifacts {
    /// Attack-free behavior with unobservable events renamed apart. Observable
    /// attack events belong to its alphabet but never occur.
    pub g_n: Automaton,
    /// Closed-loop state of every `g_n` state.
    pub g_n_origin: Vec<StateId>,
    /// Labeled automaton trimmed to states that can still reach a `Y` label.
    pub g_f: Option<LabeledAutomaton>,
    /// `g_n || g_f`: pairs of normal and faulty runs with the same observation.
    pub g_v: Option<Product>,
    /// `g_v` completed with a sink `A` on observations the normal side cannot follow.
    pub g_v_cd: Option<Automaton>,
    /// `g_v_cd || g_f`.
    pub g_t: Option<Product>,
}

/// Name of the sink added by completion.
pub const SINK: &str = "A";

pub fn build_verifier(model: &AttackedModel) -> Result<VerifierArtifacts> {
    let labeled = label_compose(model)?;
    let attack = &model.attack_events;
    let al = model.alphabet();

    // normal part, unobservable genuine events renamed
    let normal = induced(&model.model, |_| true, |_, e, _| !attack.contains(e)).unwrap();
    let rename = |e: &str| -> String {
        if al.is_observable(e) {
            e.to_string()
        } else {
            ArtifactKind::Renamed.derive(e)
        }
    };
    let mut n_alphabet = Alphabet::new();
    for (e, attrs) in al.iter() {
        // observable attack events stay in the alphabet without transitions,
        // so a normal run can never match them
        if attack.contains(e) && !attrs.observable {
            continue;
        }
        let mut renamed = *attrs;
        if !attrs.observable {
            renamed.kind = ArtifactKind::Renamed;
            renamed.vulnerable = false;
        }
        n_alphabet.insert(rename(e), renamed)?;
    }
    let src = &normal.automaton;
    let mut g_n = Automaton::new(n_alphabet, src.name(src.initial()));
    for x in src.states().skip(1) {
        g_n.add_state(src.name(x));
    }
    for (f, e, t) in src.transitions() {
        g_n.add_transition(f, &rename(e), t)?;
    }

    let ys = labeled.labeled_states(Label::Y);
    let live = coreachable(&labeled.automaton, &ys);
    let g_f = induced(&labeled.automaton, |x| live.contains(&x), |_, _, _| true).map(|sub| {
        LabeledAutomaton {
            base: sub.origin.iter().map(|o| labeled.base(*o)).collect(),
            labels: sub.origin.iter().map(|o| labeled.label(*o)).collect(),
            automaton: sub.automaton,
        }
    });

    let mut out = VerifierArtifacts {
        g_n,
        g_n_origin: normal.origin,
        g_f: None,
        g_v: None,
        g_v_cd: None,
        g_t: None,
    };
    let Some(g_f) = g_f else {
        return Ok(out);
    };

    let v = parallel_compose(&out.g_n, &g_f.automaton)?;
    let v_name =
        |n: StateId, f: StateId| format!("{{({},N),{}}}", out.g_n.name(n), g_f.automaton.name(f));
    let g_v = Product {
        automaton: v
            .automaton
            .rename_states(|x, _| v_name(v.pairs[x.0].0, v.pairs[x.0].1))?,
        pairs: v.pairs,
    };

    // completion with the sink
    let mut cd = g_v.automaton.clone();
    let sink = cd.add_fresh_state(SINK)?;
    let observable = model.observable();
    for x in g_v.automaton.states() {
        for e in &observable {
            if g_v.automaton.target(x, e).is_none() {
                cd.add_transition(x, e, sink)?;
            }
        }
    }
    for e in model.uncontrollable() {
        cd.add_transition(sink, &e, sink)?;
    }

    let t = parallel_compose(&cd, &g_f.automaton)?;
    let t_name = |x: StateId| {
        let (vx, fx) = t.pairs[x.0];
        if vx == sink {
            format!("{{{SINK},{}}}", g_f.automaton.name(fx))
        } else {
            format!("({},{})", cd.name(vx), g_f.automaton.name(fx))
        }
    };
    let g_t = Product {
        automaton: t.automaton.rename_states(|x, _| t_name(x))?,
        pairs: t.pairs.clone(),
    };

    out.g_f = Some(g_f);
    out.g_v = Some(g_v);
    out.g_v_cd = Some(cd);
    out.g_t = Some(g_t);
    Ok(out)
}

impl VerifierArtifacts {
    /// `g_v` states pairing a normal run with a faulty run in an unsafe state.
    pub fn unsafe_pairs(&self, model: &AttackedModel) -> BTreeSet<StateId> {
        let (Some(v), Some(f)) = (&self.g_v, &self.g_f) else {
            return BTreeSet::new();
        };
        v.automaton
            .states()
            .filter(|x| {
                let fx = v.pairs[x.0].1;
                f.label(fx) == Label::Y && model.is_unsafe(f.base(fx))
            })
            .collect()
    }

    /// `g_t` states where the sink is paired with a faulty unsafe state.
    pub fn unsafe_after_detection(&self, model: &AttackedModel) -> BTreeSet<StateId> {
        let (Some(t), Some(f), Some(cd)) = (&self.g_t, &self.g_f, &self.g_v_cd) else {
            return BTreeSet::new();
        };
        t.automaton
            .states()
            .filter(|x| {
                let (vx, fx) = t.pairs[x.0];
                cd.name(vx) == SINK && f.label(fx) == Label::Y && model.is_unsafe(f.base(fx))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{build_ae_model, build_se_model};
    use crate::fixtures;

    fn names(a: &Automaton, set: &StateSet) -> Vec<String> {
        set.iter().map(|x| a.name(*x).to_string()).collect()
    }

    #[test]
    fn example_one_diagnoser() {
        let (g, h, spec) = fixtures::ex1();
        let m = build_ae_model(&g, &h, &spec).unwrap();
        let d = diagnoser_for(&m).unwrap();
        assert_eq!(d.automaton.name(d.automaton.initial()), "{((1,1),N)}");
        let certain = d.states_of_class(Class::Certain);
        assert_eq!(
            names(&d.automaton, &certain),
            ["{((2,3),Y)}", "{((2,4),Y)}"]
        );
        assert_eq!(
            names(&d.automaton, &d.first_entered_certain()),
            ["{((2,3),Y)}"]
        );
        assert!(d.states_of_class(Class::Uncertain).is_empty());
        let entries = d.detection_entries(&m.model);
        let only: Vec<&StateSet> = entries.values().collect();
        assert_eq!(names(&m.model, only[0]), ["(2,3)"]);
    }

    #[test]
    fn example_four_uncertain_state() {
        let (g, h, spec) = fixtures::ex4();
        let m = build_se_model(&g, &h, &spec).unwrap();
        let d = diagnoser_for(&m).unwrap();
        let q = d.automaton.run(&["a", "c"]).unwrap();
        assert_eq!(d.automaton.name(q), "{((3,3),N),((3,5),Y)}");
        assert_eq!(d.class(q), Class::Uncertain);
    }

    #[test]
    fn labels_are_absorbing() {
        let (g, h, spec) = fixtures::ex1();
        let l = label_compose(&build_ae_model(&g, &h, &spec).unwrap()).unwrap();
        for (f, _, t) in l.automaton.transitions() {
            assert!(l.label(f) <= l.label(t));
        }
    }

    #[test]
    fn online_diagnoser_matches_offline() {
        let (g, h, spec) = fixtures::ex4();
        let m = build_se_model(&g, &h, &spec).unwrap();
        let d = diagnoser_for(&m).unwrap();
        let online = OnlineDiagnoser::new(&m).unwrap();
        let mut est = online.initial();
        let mut q = d.automaton.initial();
        for e in ["a", "c"] {
            est = online.successor(&est, e).unwrap();
            q = d.automaton.target(q, e).unwrap();
            assert_eq!(est, d.members[q.0]);
            assert_eq!(online.name(&est), d.automaton.name(q));
        }
        assert!(online.successor(&est, "a").is_none());
    }

    #[test]
    fn example_one_verifier() {
        let (g, h, spec) = fixtures::ex1();
        let m = build_ae_model(&g, &h, &spec).unwrap();
        let v = build_verifier(&m).unwrap();
        assert_eq!(v.g_n.num_states(), 2);
        assert!(v.unsafe_pairs(&m).is_empty());
        let t = v.g_t.as_ref().unwrap();
        let hits = v.unsafe_after_detection(&m);
        assert_eq!(names(&t.automaton, &hits), ["{A,((2,4),Y)}"]);
    }

    #[test]
    fn verifier_without_attack_events_is_trivial() {
        let (g, h, spec) = fixtures::ex1();
        let mut spec = spec;
        spec.vulnerable_actuators.clear();
        let m = build_ae_model(&g, &h, &spec).unwrap();
        let v = build_verifier(&m).unwrap();
        assert!(v.g_f.is_none() && v.g_v.is_none() && v.g_t.is_none());
    }
}
