//! Safe-controllability decisions: the diagnoser test, the verifier test and
//! an exhaustive simulation of the defense used as an oracle.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attack::{sub_attacker, AttackMode, AttackedModel, SiteSelection};
use crate::automaton::{StateId, StateSet, Trace};
use crate::diagnosis::{build_verifier, diagnoser_for, Class, Label};
use crate::error::{Error, Result};
use crate::ops::{project, reach_set};
use crate::runtime::{run_exhaustive, AttackerPolicy, Outcome, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Diagnoser,
    Verifier,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Diagnoser, Method::Verifier, Method::Oracle];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Diagnoser => "diagnoser",
            Method::Verifier => "verifier",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method `{s}`")))
    }
}

/// Which condition made a model unsafe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// An uncertain diagnoser state contains an attacked unsafe state.
    UncertainUnsafe,
    /// Detection happens only on arrival in an unsafe state.
    FirstCertainUnsafe,
    /// After detection, uncontrollable events still reach an unsafe state.
    UncontrollableUnsafe,
    /// A normal and an attacked run look alike while the attacked one is unsafe.
    VerifierPairUnsafe,
    /// The attack is told apart from normal runs too late.
    VerifierPostDetectionUnsafe,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::UncertainUnsafe => "uncertain-unsafe",
            Condition::FirstCertainUnsafe => "first-certain-unsafe",
            Condition::UncontrollableUnsafe => "uncontrollable-unsafe",
            Condition::VerifierPairUnsafe => "verifier-pair-unsafe",
            Condition::VerifierPostDetectionUnsafe => "verifier-post-detection-unsafe",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of a safe-controllability test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub safe: bool,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub violated_condition: Option<Condition>,
    /// Shortest attacked run that defeats the defense.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counterexample: Option<Trace>,
    /// Attack-free run with the same observation as the counterexample.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub normal_twin: Option<Trace>,
    /// Diagnoser or verifier state exhibiting the violation.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness_state: Option<String>,
    /// States reachable by uncontrollable events from where detection happens.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub x_uc: Option<BTreeSet<String>>,
}

impl Verdict {
    fn safe(method: Method) -> Verdict {
        Verdict {
            safe: true,
            method,
            violated_condition: None,
            counterexample: None,
            normal_twin: None,
            witness_state: None,
            x_uc: None,
        }
    }

    fn unsafe_by(method: Method, condition: Condition) -> Verdict {
        Verdict {
            safe: false,
            violated_condition: Some(condition),
            ..Verdict::safe(method)
        }
    }
}

fn attach_counterexample(
    verdict: &mut Verdict,
    model: &AttackedModel,
    report: &RunReport,
    prefer: &[Outcome],
) {
    let run = prefer
        .iter()
        .find_map(|o| report.shortest_defeat(Some(*o)))
        .or_else(|| report.shortest_defeat(None));
    if let Some(run) = run {
        verdict.counterexample = Some(run.trace.clone());
        if run.outcome == Some(Outcome::Undetected) {
            verdict.normal_twin = normal_twin(model, &run.trace);
        }
    }
}

fn names(model: &AttackedModel, set: &StateSet) -> BTreeSet<String> {
    set.iter()
        .map(|x| model.model.name(*x).to_string())
        .collect()
}

/// Diagnoser-based test.
///
/// The three conditions are checked in order: an uncertain state holding an
/// attacked unsafe state; detection that arrives in an unsafe state; and an
/// unsafe state reachable through uncontrollable events from a state where
/// detection happens. Detection states are the closed-loop states in which the
/// detecting observation can land.
pub fn check_gf_safe_diagnoser(model: &AttackedModel) -> Result<Verdict> {
    let d = diagnoser_for(model)?;

    let detection = d.detection_entries(&model.model);
    let mut entered = StateSet::new();
    for xs in detection.values() {
        entered.extend(xs.iter().copied());
    }
    let x_uc = reach_set(&model.model, &entered, &model.uncontrollable());

    let cond1 = d.states_of_class(Class::Uncertain).into_iter().find(|q| {
        d.pairs(*q)
            .iter()
            .any(|(x, l)| *l == Label::Y && model.is_unsafe(*x))
    });
    let cond2 = detection
        .iter()
        .find(|(_, xs)| xs.iter().any(|x| model.is_unsafe(*x)))
        .map(|(q, _)| *q);
    let cond3 = x_uc.iter().any(|x| model.is_unsafe(*x));

    let (condition, witness, prefer) = if let Some(q) = cond1 {
        (
            Condition::UncertainUnsafe,
            Some(q),
            vec![Outcome::Undetected],
        )
    } else if let Some(q) = cond2 {
        (
            Condition::FirstCertainUnsafe,
            Some(q),
            vec![Outcome::DetectedOnArrival],
        )
    } else if cond3 {
        (
            Condition::UncontrollableUnsafe,
            None,
            vec![Outcome::DetectedTooLate, Outcome::DetectedOnArrival],
        )
    } else {
        let mut v = Verdict::safe(Method::Diagnoser);
        v.x_uc = Some(names(model, &x_uc));
        return Ok(v);
    };
    let mut v = Verdict::unsafe_by(Method::Diagnoser, condition);
    v.x_uc = Some(names(model, &x_uc));
    v.witness_state = witness.map(|q| d.automaton.name(q).to_string());
    let report = run_exhaustive(model, &AttackerPolicy::AllOut)?;
    attach_counterexample(&mut v, model, &report, &prefer);
    Ok(v)
}

/// Verifier-based test; polynomial in the size of the closed loop.
pub fn check_ae_safe_verifier(model: &AttackedModel) -> Result<Verdict> {
    let art = build_verifier(model)?;
    let pairs = art.unsafe_pairs(model);
    let (condition, witness, prefer) = if let Some(x) = pairs.first() {
        let v = art.g_v.as_ref().unwrap();
        (
            Condition::VerifierPairUnsafe,
            v.automaton.name(*x).to_string(),
            vec![Outcome::Undetected],
        )
    } else if let Some(x) = art.unsafe_after_detection(model).first() {
        let t = art.g_t.as_ref().unwrap();
        (
            Condition::VerifierPostDetectionUnsafe,
            t.automaton.name(*x).to_string(),
            vec![Outcome::DetectedTooLate, Outcome::DetectedOnArrival],
        )
    } else {
        return Ok(Verdict::safe(Method::Verifier));
    };
    let mut v = Verdict::unsafe_by(Method::Verifier, condition);
    v.witness_state = Some(witness);
    let report = run_exhaustive(model, &AttackerPolicy::AllOut)?;
    attach_counterexample(&mut v, model, &report, &prefer);
    Ok(v)
}

/// Brute-force oracle: every run of the closed loop under the defense.
pub fn oracle_defense_simulation(model: &AttackedModel) -> Result<Verdict> {
    let report = run_exhaustive(model, &AttackerPolicy::AllOut)?;
    if !report.defense_defeated {
        return Ok(Verdict::safe(Method::Oracle));
    }
    let run = report
        .shortest_defeat(None)
        .expect("defeated implies a defeating run");
    let condition = match run.outcome {
        Some(Outcome::Undetected) => Condition::UncertainUnsafe,
        Some(Outcome::DetectedOnArrival) => Condition::FirstCertainUnsafe,
        _ => Condition::UncontrollableUnsafe,
    };
    let mut v = Verdict::unsafe_by(Method::Oracle, condition);
    attach_counterexample(&mut v, model, &report, &[]);
    Ok(v)
}

pub fn check(model: &AttackedModel, method: Method) -> Result<Verdict> {
    match method {
        Method::Diagnoser => check_gf_safe_diagnoser(model),
        Method::Verifier => check_ae_safe_verifier(model),
        Method::Oracle => oracle_defense_simulation(model),
    }
}

/// Runs all three methods; `agree` is false if their safe flags differ.
#[derive(Debug, Clone, Serialize)]
pub struct Agreement {
    pub verdicts: Vec<Verdict>,
    pub agree: bool,
}

pub fn check_all(model: &AttackedModel) -> Result<Agreement> {
    let verdicts = Method::ALL
        .into_iter()
        .map(|m| check(model, m))
        .collect::<Result<Vec<_>>>()?;
    let agree = verdicts.iter().all(|v| v.safe == verdicts[0].safe);
    Ok(Agreement { verdicts, agree })
}

/// An attack-free run of the closed loop whose observation equals that of `trace`.
pub fn normal_twin<S: AsRef<str>>(model: &AttackedModel, trace: &[S]) -> Option<Trace> {
    let observable = model.observable();
    let target = project(trace, &observable);
    let g = &model.model;
    let start = (g.initial(), 0usize);
    type Node = (StateId, usize);
    let mut parent: HashMap<Node, Option<(Node, String)>> = HashMap::from([(start, None)]);
    let mut queue = VecDeque::from([start]);
    while let Some((x, k)) = queue.pop_front() {
        if k == target.len() {
            let mut out = Vec::new();
            let mut at = (x, k);
            while let Some(Some((p, e))) = parent.get(&at) {
                out.push(e.clone());
                at = *p;
            }
            out.reverse();
            return Some(out);
        }
        for (e, t) in g.outgoing(x) {
            if model.is_attack_event(e) {
                continue;
            }
            let next = if observable.contains(e) {
                if e != target[k] {
                    continue;
                }
                (t, k + 1)
            } else {
                (t, k)
            };
            if let std::collections::hash_map::Entry::Vacant(slot) = parent.entry(next) {
                slot.insert(Some(((x, k), e.to_string())));
                queue.push_back(next);
            }
        }
    }
    None
}

/// Outcome of sampling sub-attackers of a safe all-out model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MonotonicityReport {
    /// Why no trials were run, if none were.
    pub skipped: Option<String>,
    pub trials: usize,
    /// Kept attack sites of every sub-attacker found unsafe, as `(supervisor state, event)`.
    pub violations: Vec<Vec<(String, String)>>,
}

pub fn check_sub_attacker_monotonicity(
    model: &AttackedModel,
    trials: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    let skip = |why: &str| MonotonicityReport {
        skipped: Some(why.to_string()),
        trials: 0,
        violations: Vec::new(),
    };
    if model.mode != AttackMode::Ae {
        return Ok(skip(
            "sub-attackers are defined for actuator enablement only",
        ));
    }
    if !check_gf_safe_diagnoser(model)?.safe {
        return Ok(skip("the all-out model is not safe"));
    }
    let mut violations = Vec::new();
    for i in 0..trials {
        let sub = sub_attacker(model, &SiteSelection::Random(seed.wrapping_add(i as u64)))?;
        if !check_gf_safe_diagnoser(&sub)?.safe {
            let sites = sub
                .attack_sites()
                .into_iter()
                .map(|(x, e)| (sub.attacked_supervisor.name(x).to_string(), e))
                .collect();
            violations.push(sites);
        }
    }
    Ok(MonotonicityReport {
        skipped: None,
        trials,
        violations,
    })
}
