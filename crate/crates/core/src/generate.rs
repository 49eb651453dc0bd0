//! Random small plants and supervisors for property tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attack::{AttackMode, VulnerabilitySpec};
use crate::automaton::{Alphabet, Automaton, EventAttrs, EventSet, StateId};
use crate::ops::{accessible, observer, parallel_compose};

#[derive(Debug, Clone, Copy)]
pub struct GeneratorConfig {
    pub max_states: usize,
    pub max_events: usize,
    /// Probability of a transition for each (state, event).
    pub density: f64,
    /// Probability that the supervisor disables a controllable event.
    pub disable: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            max_states: 8,
            max_events: 5,
            density: 0.35,
            disable: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub plant: Automaton,
    pub supervisor: Automaton,
    pub spec: VulnerabilitySpec,
}

fn random_plant(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig) -> Automaton {
    let n = rng.gen_range(2..=cfg.max_states);
    let k = rng.gen_range(2..=cfg.max_events);
    let mut al = Alphabet::new();
    for i in 0..k {
        let attrs = EventAttrs::new(rng.gen_bool(0.7), rng.gen_bool(0.5));
        al.insert(format!("e{i}"), attrs).unwrap();
    }
    let events: Vec<String> = al.names().into_iter().collect();
    let mut g = Automaton::new(al, "0");
    for i in 1..n {
        g.add_state(i.to_string());
    }
    // a spanning path keeps most states reachable
    for i in 1..n {
        let e = events.choose(rng).unwrap();
        let from = StateId(rng.gen_range(0..i));
        if g.target(from, e).is_none() {
            g.add_transition(from, e, StateId(i)).unwrap();
        }
    }
    for x in 0..n {
        for e in &events {
            if g.target(StateId(x), e).is_none() && rng.gen_bool(cfg.density) {
                g.add_transition(StateId(x), e, StateId(rng.gen_range(0..n)))
                    .unwrap();
            }
        }
    }
    accessible(&g)
}

/// Observer-shaped supervisor that randomly disables controllable events.
fn random_supervisor(rng: &mut ChaCha8Rng, g: &Automaton, cfg: &GeneratorConfig) -> Automaton {
    let al = g.alphabet();
    let obs = observer(g, &al.unobservable()).unwrap();
    let mut h = Automaton::new(al.clone(), "0");
    for q in obs.automaton.states().skip(1) {
        h.add_state(q.0.to_string());
    }
    for q in obs.automaton.states() {
        let active: EventSet = obs.subsets[q.0]
            .iter()
            .flat_map(|x| g.active_events(*x))
            .collect();
        for e in active {
            if al.is_controllable(&e) && rng.gen_bool(cfg.disable) {
                continue;
            }
            let to = if al.is_observable(&e) {
                obs.automaton.target(q, &e).unwrap()
            } else {
                q
            };
            h.add_transition(q, &e, to).unwrap();
        }
    }
    accessible(&h)
}

/// A random instance whose attack-free closed loop avoids the unsafe states.
pub fn random_instance(seed: u64, mode: AttackMode, cfg: &GeneratorConfig) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plant = random_plant(&mut rng, cfg);
    let supervisor = random_supervisor(&mut rng, &plant, cfg);

    let nominal = parallel_compose(&supervisor, &plant).unwrap();
    let visited: std::collections::BTreeSet<StateId> = nominal.pairs.iter().map(|p| p.1).collect();
    // states one plant move outside nominal behavior are the interesting ones
    let frontier: Vec<&str> = plant
        .states()
        .filter(|x| !visited.contains(x))
        .filter(|x| {
            visited
                .iter()
                .any(|v| plant.outgoing(*v).any(|(_, t)| t == *x))
        })
        .map(|x| plant.name(x))
        .collect();
    let candidates: Vec<&str> = if !frontier.is_empty() && rng.gen_bool(0.7) {
        frontier
    } else {
        plant
            .states()
            .filter(|x| !visited.contains(x))
            .map(|x| plant.name(x))
            .collect()
    };
    let count = if candidates.is_empty() {
        0
    } else {
        rng.gen_range(1..=candidates.len().min(2))
    };
    let unsafe_states: Vec<&str> = candidates
        .choose_multiple(&mut rng, count)
        .copied()
        .collect();

    let al = plant.alphabet();
    let eligible = match mode {
        AttackMode::Ae => al.controllable(),
        AttackMode::Se | AttackMode::Si => al.observable(),
    };
    let mut vulnerable: EventSet = eligible
        .iter()
        .filter(|_| rng.gen_bool(0.5))
        .cloned()
        .collect();
    if vulnerable.is_empty() {
        if let Some(e) = eligible.iter().collect::<Vec<_>>().choose(&mut rng) {
            vulnerable.insert((*e).clone());
        }
    }
    let mut spec = VulnerabilitySpec::default().with_unsafe(unsafe_states);
    match mode {
        AttackMode::Ae => spec.vulnerable_actuators = vulnerable,
        AttackMode::Se | AttackMode::Si => spec.vulnerable_sensors = vulnerable,
    }
    RandomInstance {
        plant,
        supervisor,
        spec,
    }
}
