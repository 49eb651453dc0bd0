//! Small worked systems used by tests, examples and the command line demos.

use crate::attack::VulnerabilitySpec;
use crate::automaton::{Alphabet, Automaton, EventAttrs};
use crate::ops::{induced, parallel_compose};
use crate::synthesis::{realize_supervisor, supremal_controllable};

fn alphabet(events: &[(&str, bool, bool)]) -> Alphabet {
    Alphabet::from_flags(events.iter().copied()).expect("fixture alphabet")
}

fn build(al: &Alphabet, init: &str, edges: &[(&str, &str, &str)], marked: &[&str]) -> Automaton {
    let mut a = Automaton::from_transitions(al.clone(), init, edges).expect("fixture automaton");
    for m in marked {
        a.mark(m).expect("fixture marked state");
    }
    a
}

/// A three-step line where actuator `b` is disabled after `a` and state 4 is
/// dangerous.
pub fn ex1() -> (Automaton, Automaton, VulnerabilitySpec) {
    let al = alphabet(&[("a", true, false), ("b", true, true), ("c", true, false)]);
    let g = build(
        &al,
        "1",
        &[("1", "a", "2"), ("2", "b", "3"), ("3", "c", "4")],
        &[],
    );
    let h = build(&al, "1", &[("1", "a", "2")], &[]);
    (g, h, VulnerabilitySpec::actuators(["b"]).with_unsafe(["4"]))
}

/// Sensor `b` can be erased so that the supervisor enables `c` in the wrong state.
pub fn ex4() -> (Automaton, Automaton, VulnerabilitySpec) {
    let al = alphabet(&[("a", true, true), ("b", true, false), ("c", true, true)]);
    let g = build(
        &al,
        "1",
        &[
            ("1", "a", "2"),
            ("2", "c", "3"),
            ("2", "b", "4"),
            ("4", "c", "5"),
        ],
        &[],
    );
    let h = build(
        &al,
        "1",
        &[("1", "a", "2"), ("2", "b", "4"), ("2", "c", "3")],
        &[],
    );
    (g, h, VulnerabilitySpec::sensors(["b"]).with_unsafe(["5"]))
}

/// Erasing `b` leaves the supervisor one step behind, where nothing the plant
/// can do is enabled.
pub fn ex_blocking() -> (Automaton, Automaton, VulnerabilitySpec) {
    let al = alphabet(&[
        ("a", true, true),
        ("b", true, true),
        ("c", true, true),
        ("d", true, true),
        ("e", true, true),
    ]);
    let g = build(
        &al,
        "1",
        &[
            ("1", "a", "2"),
            ("2", "c", "3"),
            ("2", "d", "4"),
            ("4", "b", "5"),
            ("5", "c", "6"),
            ("4", "e", "7"),
        ],
        &["3", "6"],
    );
    let h = build(
        &al,
        "1",
        &[
            ("1", "a", "2"),
            ("2", "c", "3"),
            ("2", "d", "4"),
            ("4", "b", "5"),
            ("5", "c", "6"),
        ],
        &["1", "2", "3", "4", "5", "6"],
    );
    (g, h, VulnerabilitySpec::sensors(["b"]).with_unsafe(["7"]))
}

/// A fake `b` reading makes the supervisor enable `c` before the plant moved.
pub fn ex6() -> (Automaton, Automaton, VulnerabilitySpec) {
    let al = alphabet(&[("a", true, true), ("b", true, true), ("c", true, true)]);
    let g = build(
        &al,
        "1",
        &[
            ("1", "a", "2"),
            ("2", "b", "3"),
            ("3", "c", "4"),
            ("2", "c", "5"),
        ],
        &[],
    );
    let h = build(
        &al,
        "1",
        &[("1", "a", "2"), ("2", "b", "3"), ("3", "c", "4")],
        &[],
    );
    (g, h, VulnerabilitySpec::sensors(["b"]).with_unsafe(["5"]))
}

/// A plant with an unobservable move after which `c` must be disabled, while
/// `c` is allowed initially.
pub fn unobservable_spec() -> (Automaton, Automaton) {
    let mut al = Alphabet::new();
    al.insert("u", EventAttrs::new(false, false)).unwrap();
    al.insert("c", EventAttrs::new(true, true)).unwrap();
    let g = build(
        &al,
        "0",
        &[("0", "u", "1"), ("0", "c", "2"), ("1", "c", "3")],
        &[],
    );
    let k = build(&al, "0", &[("0", "u", "1"), ("0", "c", "2")], &[]);
    (g, k)
}

const SEGMENTS: usize = 5;

fn vehicle(prefix: &str) -> Automaton {
    let mut al = Alphabet::new();
    for i in 1..=SEGMENTS {
        let observable = i != 2;
        let controllable = matches!(i, 1 | 2 | 4);
        al.insert(
            format!("{prefix}{i}"),
            EventAttrs::new(observable, controllable),
        )
        .unwrap();
    }
    let mut v = Automaton::new(al, "0");
    for i in 1..=SEGMENTS {
        let from = v.add_state((i - 1).to_string());
        let to = v.add_state(i.to_string());
        v.add_transition(from, &format!("{prefix}{i}"), to).unwrap();
    }
    v.mark(&SEGMENTS.to_string()).unwrap();
    v
}

/// Two vehicles crossing a shared road; state `(i,j)` gives both positions.
pub fn traffic_plant() -> Automaton {
    parallel_compose(&vehicle("a"), &vehicle("b"))
        .unwrap()
        .automaton
}

/// Positions where both vehicles occupy the same segment.
pub fn traffic_collisions() -> Vec<String> {
    (1..SEGMENTS).map(|i| format!("({i},{i})")).collect()
}

/// Collision avoidance, with the two adjacent starts also excluded.
pub fn traffic_spec() -> Automaton {
    let g = traffic_plant();
    let mut forbidden = traffic_collisions();
    forbidden.push("(1,2)".into());
    forbidden.push("(2,1)".into());
    induced(
        &g,
        |x| !forbidden.iter().any(|f| f == g.name(x)),
        |_, _, _| true,
    )
    .unwrap()
    .automaton
}

/// Supervisor realizing the supremal controllable sublanguage of the spec.
pub fn traffic_supervisor() -> Automaton {
    let g = traffic_plant();
    let sup = supremal_controllable(&g, &traffic_spec(), &g.alphabet().uncontrollable())
        .unwrap()
        .expect("traffic specification has a nonempty supremal sublanguage");
    realize_supervisor(&g, &sup, &g.alphabet().observable()).unwrap()
}

/// Plant, supervisor and a specification with no vulnerable events.
pub fn traffic_plant_and_supervisor() -> (Automaton, Automaton, VulnerabilitySpec) {
    let collisions = traffic_collisions();
    let spec = VulnerabilitySpec::default().with_unsafe(collisions.iter().map(String::as_str));
    (traffic_plant(), traffic_supervisor(), spec)
}

fn traffic_with(actuators: &[&str], sensors: &[&str]) -> VulnerabilitySpec {
    let mut spec = traffic_plant_and_supervisor().2;
    spec.vulnerable_actuators = actuators.iter().map(|s| s.to_string()).collect();
    spec.vulnerable_sensors = sensors.iter().map(|s| s.to_string()).collect();
    spec
}

pub fn traffic_ae_spec() -> VulnerabilitySpec {
    traffic_with(&["a2", "b2"], &[])
}

pub fn traffic_se_spec() -> VulnerabilitySpec {
    traffic_with(&[], &["a3", "b3"])
}

pub fn traffic_si_spec() -> VulnerabilitySpec {
    traffic_with(&[], &["a4", "b4"])
}
