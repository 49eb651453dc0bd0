//! Closed-loop execution with an online diagnoser and the safe-mode defense:
//! once the diagnoser is certain an attack happened, every controllable event
//! is disabled.

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attack::AttackedModel;
use crate::automaton::{StateId, StateSet, Trace, DEFAULT_STATE_CAP};
use crate::diagnosis::{Class, Label, OnlineDiagnoser};
use crate::error::{Error, Result};

/// When the attacker uses an available attack event.
#[derive(Debug, Clone, PartialEq)]
pub enum AttackerPolicy {
    /// Attack at every opportunity.
    AllOut,
    /// One decision per opportunity, in order; `false` once exhausted.
    Scripted(Vec<bool>),
    /// Attack with the given probability at each opportunity.
    SeededRandom(f64),
}

impl AttackerPolicy {
    /// Parses `all-out`, `random:<p>`, or the lines of a script
    /// (`attack` / `skip`, blank lines and `#` comments ignored).
    pub fn parse_script(text: &str) -> Result<AttackerPolicy> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "attack" => out.push(true),
                "skip" => out.push(false),
                other => {
                    return Err(Error::InvalidInput(format!(
                        "script line {}: expected `attack` or `skip`, found `{other}`",
                        i + 1
                    )))
                }
            }
        }
        Ok(AttackerPolicy::Scripted(out))
    }

    pub fn random(p: f64) -> Result<AttackerPolicy> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!(
                "attack probability {p} is outside [0, 1]"
            )));
        }
        Ok(AttackerPolicy::SeededRandom(p))
    }
}

/// Snapshot of a closed-loop execution.
#[derive(Debug, Clone)]
pub struct ExecutionState {
    /// State of the labeled closed loop.
    pub labeled: StateId,
    pub estimate: StateSet,
    pub safe_mode: bool,
    pub trace: Trace,
    pub observed: Trace,
    script_cursor: usize,
    rng: ChaCha8Rng,
}

impl ExecutionState {
    pub fn step_index(&self) -> usize {
        self.trace.len()
    }
}

/// One line of the execution log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRecord {
    pub step: usize,
    pub event: Option<String>,
    pub observable: bool,
    pub plant: String,
    pub supervisor: String,
    pub diagnoser: String,
    pub class: Class,
    pub safe_mode: bool,
    pub unsafe_state: bool,
}

/// Executes an attacked model step by step.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub model: AttackedModel,
    pub diagnoser: OnlineDiagnoser,
    pub policy: AttackerPolicy,
}

impl Simulator {
    pub fn new(model: AttackedModel, policy: AttackerPolicy) -> Result<Self> {
        if let AttackerPolicy::SeededRandom(p) = policy {
            AttackerPolicy::random(p)?;
        }
        Ok(Simulator {
            diagnoser: OnlineDiagnoser::new(&model)?,
            model,
            policy,
        })
    }

    pub fn initial_state(&self, seed: u64) -> ExecutionState {
        let estimate = self.diagnoser.initial();
        ExecutionState {
            labeled: self.diagnoser.labeled.automaton.initial(),
            safe_mode: self.diagnoser.classify(&estimate) == Class::Certain,
            estimate,
            trace: Vec::new(),
            observed: Vec::new(),
            script_cursor: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn closed_loop_state(&self, state: &ExecutionState) -> StateId {
        self.diagnoser.labeled.base(state.labeled)
    }

    /// Events the defended closed loop allows, split into genuine and attack moves.
    pub fn candidates(&self, state: &ExecutionState) -> (Vec<String>, Vec<String>) {
        let x = self.closed_loop_state(state);
        let al = self.model.alphabet();
        let (mut genuine, mut attack) = (Vec::new(), Vec::new());
        for (e, _) in self.model.model.outgoing(x) {
            if state.safe_mode && al.is_controllable(e) {
                continue;
            }
            if self.model.is_attack_event(e) {
                attack.push(e.to_string());
            } else {
                genuine.push(e.to_string());
            }
        }
        (genuine, attack)
    }

    fn decide(&self, state: &mut ExecutionState) -> bool {
        match &self.policy {
            AttackerPolicy::AllOut => true,
            AttackerPolicy::Scripted(d) => {
                let v = d.get(state.script_cursor).copied().unwrap_or(false);
                state.script_cursor += 1;
                v
            }
            AttackerPolicy::SeededRandom(p) => state.rng.gen_bool(*p),
        }
    }

    /// Advances one step. With `choice == None` the event is picked at random
    /// (preferring attack moves when the attacker decides to attack). Returns
    /// `Ok(None)` when nothing is enabled.
    pub fn step(
        &self,
        state: &ExecutionState,
        choice: Option<&str>,
    ) -> Result<Option<ExecutionState>> {
        let mut next = state.clone();
        let (genuine, attack) = self.candidates(state);
        let attacking = !attack.is_empty() && self.decide(&mut next);
        let event = match choice {
            Some(e) => {
                let legal =
                    genuine.iter().any(|g| g == e) || (attacking && attack.iter().any(|a| a == e));
                if !legal {
                    let mut enabled = genuine.clone();
                    if attacking {
                        enabled.extend(attack.iter().cloned());
                    }
                    return Err(Error::IllegalEvent {
                        event: e.to_string(),
                        enabled,
                    });
                }
                e.to_string()
            }
            None => {
                let pool = if attacking { &attack } else { &genuine };
                match pool.choose(&mut next.rng) {
                    Some(e) => e.clone(),
                    None => return Ok(None),
                }
            }
        };
        self.apply(&mut next, &event)?;
        Ok(Some(next))
    }

    fn apply(&self, state: &mut ExecutionState, event: &str) -> Result<()> {
        let l = &self.diagnoser.labeled.automaton;
        state.labeled = l
            .target(state.labeled, event)
            .ok_or_else(|| Error::UnknownEvent(event.to_string()))?;
        state.trace.push(event.to_string());
        if self.model.alphabet().is_observable(event) {
            state.observed.push(event.to_string());
            state.estimate = self
                .diagnoser
                .successor(&state.estimate, event)
                .expect("the true state is always in the estimate");
        }
        if self.diagnoser.classify(&state.estimate) == Class::Certain {
            state.safe_mode = true;
        }
        Ok(())
    }

    pub fn record(&self, state: &ExecutionState) -> LogRecord {
        let x = self.closed_loop_state(state);
        let event = state.trace.last().cloned();
        LogRecord {
            step: state.step_index(),
            observable: event
                .as_deref()
                .is_some_and(|e| self.model.alphabet().is_observable(e)),
            event,
            plant: self.model.plant_component(x).to_string(),
            supervisor: self.model.supervisor_component(x).to_string(),
            diagnoser: self.diagnoser.name(&state.estimate),
            class: self.diagnoser.classify(&state.estimate),
            safe_mode: state.safe_mode,
            unsafe_state: self.model.is_unsafe(x),
        }
    }

    /// Runs until no event is enabled or `max_steps` is reached, logging each state.
    pub fn simulate(&self, seed: u64, max_steps: usize) -> Result<Vec<LogRecord>> {
        let mut state = self.initial_state(seed);
        let mut log = vec![self.record(&state)];
        for _ in 0..max_steps {
            match self.step(&state, None)? {
                Some(next) => {
                    state = next;
                    log.push(self.record(&state));
                }
                None => break,
            }
        }
        Ok(log)
    }
}

/// How a run that ended in an unsafe state relates to detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// The diagnoser was not certain when the unsafe state was reached.
    Undetected,
    /// The observation that made the diagnoser certain also reached the unsafe state.
    DetectedOnArrival,
    /// Detected earlier; uncontrollable events still led to damage.
    DetectedTooLate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub trace: Trace,
    pub final_state: String,
    pub plant_state: String,
    pub attacked: bool,
    pub detected: bool,
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    /// Distinct (state, estimate, policy position) configurations visited.
    pub explored: usize,
    /// Shortest run to each unsafe configuration.
    pub unsafe_runs: Vec<RunRecord>,
    /// Shortest run to each configuration where the closed loop deadlocks.
    pub deadlocked_runs: Vec<RunRecord>,
    /// Events between the first attack event and detection, per detection configuration.
    pub detection_latencies: Vec<usize>,
    /// Whether an attacked run reaches an unsafe state despite the defense.
    pub defense_defeated: bool,
}

impl RunReport {
    pub fn shortest_defeat(&self, outcome: Option<Outcome>) -> Option<&RunRecord> {
        self.unsafe_runs
            .iter()
            .filter(|r| r.attacked && (outcome.is_none() || r.outcome == outcome))
            .min_by_key(|r| r.trace.len())
    }
}

type Node = (StateId, usize, usize);

/// Explores every behavior the attacker `policy` allows under the safe-mode
/// defense. Random policies with positive probability allow every attack.
pub fn run_exhaustive(model: &AttackedModel, policy: &AttackerPolicy) -> Result<RunReport> {
    run_exhaustive_capped(model, policy, DEFAULT_STATE_CAP)
}

pub fn run_exhaustive_capped(
    model: &AttackedModel,
    policy: &AttackerPolicy,
    cap: usize,
) -> Result<RunReport> {
    let diag = OnlineDiagnoser::new(model)?;
    let l = &diag.labeled;
    let al = model.alphabet();
    let deadlocks = crate::ops::deadlock_states(&model.model);

    let mut estimates: Vec<StateSet> = vec![diag.initial()];
    let mut est_index: HashMap<StateSet, usize> = HashMap::from([(estimates[0].clone(), 0)]);
    let certain = |est: &StateSet| diag.classify(est) == Class::Certain;

    let start: Node = (l.automaton.initial(), 0, 0);
    let mut parent: HashMap<Node, Option<(Node, String)>> = HashMap::from([(start, None)]);
    let mut order = vec![start];
    let mut queue = VecDeque::from([start]);

    while let Some(node) = queue.pop_front() {
        let (xl, ei, cursor) = node;
        let safe_mode = certain(&estimates[ei]);
        let x = l.base(xl);
        let has_attack = model
            .model
            .outgoing(x)
            .any(|(e, _)| model.is_attack_event(e) && !(safe_mode && al.is_controllable(e)));
        let (may_attack, may_refrain, next_cursor) = match policy {
            AttackerPolicy::AllOut => (true, true, cursor),
            AttackerPolicy::SeededRandom(p) => (*p > 0.0, true, cursor),
            AttackerPolicy::Scripted(d) if has_attack => {
                let v = d.get(cursor).copied().unwrap_or(false);
                (v, true, cursor + 1)
            }
            AttackerPolicy::Scripted(_) => (false, true, cursor),
        };
        for (e, tl) in l.automaton.outgoing(xl) {
            if safe_mode && al.is_controllable(e) {
                continue;
            }
            let is_attack = model.is_attack_event(e);
            if (is_attack && !may_attack) || (!is_attack && !may_refrain) {
                continue;
            }
            let ne = if al.is_observable(e) {
                let est = diag
                    .successor(&estimates[ei], e)
                    .expect("true state is in the estimate");
                match est_index.get(&est) {
                    Some(i) => *i,
                    None => {
                        estimates.push(est.clone());
                        est_index.insert(est, estimates.len() - 1);
                        estimates.len() - 1
                    }
                }
            } else {
                ei
            };
            let next: Node = (tl, ne, next_cursor);
            if parent.contains_key(&next) {
                continue;
            }
            if parent.len() >= cap {
                return Err(Error::ResourceLimit { limit: cap });
            }
            parent.insert(next, Some((node, e.to_string())));
            order.push(next);
            queue.push_back(next);
        }
    }

    let trace_of = |mut n: Node| {
        let mut t = Vec::new();
        while let Some(Some((p, e))) = parent.get(&n) {
            t.push(e.clone());
            n = *p;
        }
        t.reverse();
        t
    };

    let mut report = RunReport {
        explored: order.len(),
        unsafe_runs: Vec::new(),
        deadlocked_runs: Vec::new(),
        detection_latencies: Vec::new(),
        defense_defeated: false,
    };
    for &node in &order {
        let (xl, ei, _) = node;
        let x = l.base(xl);
        let detected = certain(&estimates[ei]);
        let parent_detected = match parent[&node] {
            Some(((_, pe, _), _)) => certain(&estimates[pe]),
            None => false,
        };
        let attacked = l.label(xl) == Label::Y;
        let make = |outcome| {
            let trace = trace_of(node);
            RunRecord {
                final_state: model.model.name(x).to_string(),
                plant_state: model.plant_component(x).to_string(),
                attacked,
                detected,
                outcome,
                trace,
            }
        };
        if detected && !parent_detected {
            let trace = trace_of(node);
            if let Some(first) = trace.iter().position(|e| model.is_attack_event(e)) {
                report.detection_latencies.push(trace.len() - first);
            }
        }
        if model.is_unsafe(x) {
            let outcome = if !detected {
                Outcome::Undetected
            } else if !parent_detected {
                Outcome::DetectedOnArrival
            } else {
                Outcome::DetectedTooLate
            };
            report.defense_defeated |= attacked;
            report.unsafe_runs.push(make(Some(outcome)));
        }
        if deadlocks.contains(&x) {
            report.deadlocked_runs.push(make(None));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::{build_ae_model, build_se_model};
    use crate::fixtures;

    fn ex1_sim(policy: AttackerPolicy) -> Simulator {
        let (g, h, spec) = fixtures::ex1();
        Simulator::new(build_ae_model(&g, &h, &spec).unwrap(), policy).unwrap()
    }

    #[test]
    fn all_out_reaches_damage_in_example_one() {
        let sim = ex1_sim(AttackerPolicy::AllOut);
        let log = sim.simulate(0, 10).unwrap();
        let last = log.last().unwrap();
        assert_eq!(last.plant, "4");
        assert!(last.unsafe_state && last.safe_mode);
        assert_eq!(log[2].diagnoser, "{((2,3),Y)}");
    }

    #[test]
    fn scripted_skip_stays_nominal() {
        let sim = ex1_sim(AttackerPolicy::Scripted(vec![false]));
        let log = sim.simulate(0, 10).unwrap();
        assert_eq!(log.last().unwrap().plant, "2");
    }

    #[test]
    fn illegal_choice_is_rejected() {
        let sim = ex1_sim(AttackerPolicy::AllOut);
        let s0 = sim.initial_state(1);
        match sim.step(&s0, Some("c")) {
            Err(Error::IllegalEvent { event, enabled }) => {
                assert_eq!(event, "c");
                assert_eq!(enabled, ["a"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn same_seed_same_log() {
        let (g, h, spec) = fixtures::ex4();
        let m = build_se_model(&g, &h, &spec).unwrap();
        let sim = Simulator::new(m, AttackerPolicy::SeededRandom(0.5)).unwrap();
        assert_eq!(sim.simulate(42, 20).unwrap(), sim.simulate(42, 20).unwrap());
    }

    #[test]
    fn script_parsing() {
        let p = AttackerPolicy::parse_script("attack\n# note\n\nskip\n").unwrap();
        assert_eq!(p, AttackerPolicy::Scripted(vec![true, false]));
        assert!(AttackerPolicy::parse_script("maybe").is_err());
        assert!(AttackerPolicy::random(1.5).is_err());
    }

    #[test]
    fn exhaustive_example_one() {
        let (g, h, spec) = fixtures::ex1();
        let m = build_ae_model(&g, &h, &spec).unwrap();
        let r = run_exhaustive(&m, &AttackerPolicy::AllOut).unwrap();
        assert!(r.defense_defeated);
        let run = r.shortest_defeat(None).unwrap();
        assert_eq!(run.trace, ["a", "b#a", "c"]);
        assert_eq!(run.outcome, Some(Outcome::DetectedTooLate));
        assert_eq!(r.detection_latencies, [1]);

        let never = run_exhaustive(&m, &AttackerPolicy::SeededRandom(0.0)).unwrap();
        assert!(!never.defense_defeated);
    }
}
