//! JSON documents: plain model files, attacked-model files and verdicts.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::attack::{AttackMode, AttackedModel, VulnerabilitySpec};
use crate::automaton::{kind_of_name, Alphabet, ArtifactKind, Automaton, EventAttrs, StateId};
use crate::error::{Error, Result};
use crate::ops::deadlock_report;
use crate::safety::Verdict;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const ATTACKED_FORMAT: &str = "scguard-attacked-model";
pub const VERDICT_FORMAT: &str = "scguard-verdict";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventDecl {
    pub name: String,
    pub observable: bool,
    pub controllable: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub vulnerable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionDecl {
    pub from: String,
    pub event: String,
    pub to: String,
}

/// An automaton as written in files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub states: Vec<String>,
    pub initial: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub marked: Vec<String>,
    pub events: Vec<EventDecl>,
    pub transitions: Vec<TransitionDecl>,
    #[serde(default, rename = "unsafe", skip_serializing_if = "Vec::is_empty")]
    pub unsafe_states: Vec<String>,
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<ModelFile> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    /// Canonical document for `a`: states in id order, events sorted,
    /// transitions by source state then event.
    pub fn from_automaton(a: &Automaton, unsafe_states: &[String]) -> ModelFile {
        ModelFile {
            states: a.states().map(|x| a.name(x).to_string()).collect(),
            initial: a.name(a.initial()).to_string(),
            marked: a.marked().iter().map(|x| a.name(*x).to_string()).collect(),
            events: a
                .alphabet()
                .iter()
                .map(|(name, attrs)| EventDecl {
                    name: name.to_string(),
                    observable: attrs.observable,
                    controllable: attrs.controllable,
                    vulnerable: attrs.vulnerable,
                })
                .collect(),
            transitions: a
                .transitions()
                .map(|(f, e, t)| TransitionDecl {
                    from: a.name(f).to_string(),
                    event: e.to_string(),
                    to: a.name(t).to_string(),
                })
                .collect(),
            unsafe_states: unsafe_states.to_vec(),
        }
    }

    /// Parses and builds a user automaton, reporting the source line of
    /// semantic errors such as `transitions[2]: undeclared state`.
    pub fn load(text: &str) -> Result<(Automaton, Vec<String>)> {
        let f = ModelFile::parse(text)?;
        let a = f.to_automaton().map_err(|e| with_line(text, e))?;
        Ok((a, f.unsafe_states))
    }

    /// Builds a user automaton; attack-artifact event names are rejected.
    pub fn to_automaton(&self) -> Result<Automaton> {
        self.build(false)
    }

    fn build(&self, allow_artifacts: bool) -> Result<Automaton> {
        let mut al = Alphabet::new();
        for (i, ev) in self.events.iter().enumerate() {
            let kind = kind_of_name(&ev.name);
            if kind != ArtifactKind::Genuine && !allow_artifacts {
                return Err(Error::Format(format!(
                    "events[{i}]: `{}` uses a reserved suffix (#a, #e, #i, #r)",
                    ev.name
                )));
            }
            if al.contains(&ev.name) {
                return Err(Error::Format(format!(
                    "events[{i}]: duplicate event `{}`",
                    ev.name
                )));
            }
            let mut attrs = EventAttrs::new(ev.observable, ev.controllable);
            attrs.vulnerable = ev.vulnerable;
            attrs.kind = kind;
            al.insert(ev.name.clone(), attrs)
                .map_err(|e| Error::Format(format!("events[{i}]: {e}")))?;
        }
        if !self.states.contains(&self.initial) {
            return Err(Error::Format(format!(
                "initial state `{}` is not declared",
                self.initial
            )));
        }
        let mut a = Automaton::new(al, self.initial.clone());
        for (i, s) in self.states.iter().enumerate() {
            if s == &self.initial {
                continue;
            }
            a.add_fresh_state(s.clone())
                .map_err(|e| Error::Format(format!("states[{i}]: {e}")))?;
        }
        let lookup = |what: &str, name: &str| -> Result<StateId> {
            a.find_state(name)
                .ok_or_else(|| Error::Format(format!("{what}: undeclared state `{name}`")))
        };
        let mut edges = Vec::with_capacity(self.transitions.len());
        for (i, t) in self.transitions.iter().enumerate() {
            let at = format!("transitions[{i}]");
            edges.push((
                lookup(&at, &t.from)?,
                t.event.as_str(),
                lookup(&at, &t.to)?,
                at,
            ));
        }
        let marked = self
            .marked
            .iter()
            .enumerate()
            .map(|(i, m)| lookup(&format!("marked[{i}]"), m))
            .collect::<Result<Vec<_>>>()?;
        for (i, u) in self.unsafe_states.iter().enumerate() {
            lookup(&format!("unsafe[{i}]"), u)?;
        }
        for (f, e, t, at) in edges {
            a.add_transition(f, e, t)
                .map_err(|err| Error::Format(format!("{at}: {err}")))?;
        }
        for m in marked {
            a.set_marked(m, true)?;
        }
        Ok(a)
    }
}

/// Appends the line of the element a `key[i]: ...` message refers to.
fn with_line(text: &str, err: Error) -> Error {
    let Error::Format(msg) = &err else { return err };
    let Some((path, _)) = msg.split_once(':') else {
        return err;
    };
    let Some((key, rest)) = path.split_once('[') else {
        return err;
    };
    let Ok(index) = rest.trim_end_matches(']').parse::<usize>() else {
        return err;
    };
    match element_line(text, key, index) {
        Some(line) => Error::Format(format!("line {line}: {msg}")),
        None => err,
    }
}

/// 1-based line where element `index` of the top-level array `key` starts.
fn element_line(text: &str, key: &str, index: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut line = 1;
    let mut in_string = false;
    let mut escaped = false;
    let mut token = String::new();
    let mut last_key = String::new();
    let mut in_array = false;
    let mut element = 0;
    let mut expecting = false;
    for c in text.chars() {
        if c == '\n' {
            line += 1;
        }
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            } else {
                token.push(c);
            }
            continue;
        }
        if in_array && expecting && !c.is_whitespace() {
            if element == index {
                return Some(line);
            }
            expecting = false;
        }
        match c {
            '"' => {
                in_string = true;
                token.clear();
            }
            ':' if depth == 1 => last_key = token.clone(),
            '{' | '[' => {
                depth += 1;
                if c == '[' && depth == 2 && last_key == key {
                    in_array = true;
                    expecting = true;
                }
            }
            '}' | ']' => {
                if in_array && depth == 2 {
                    return None;
                }
                depth = depth.saturating_sub(1);
            }
            ',' if in_array && depth == 2 => {
                element += 1;
                expecting = true;
            }
            _ => {}
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub mode: AttackMode,
    pub vulnerable: BTreeSet<String>,
    pub tool_version: String,
}

/// An attacked closed loop with the components it was assembled from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackedModelFile {
    pub format: String,
    pub version: u32,
    pub provenance: Provenance,
    pub spec: VulnerabilitySpec,
    pub attacked_plant: ModelFile,
    pub attacked_supervisor: ModelFile,
    /// The closed loop, stored for inspection and checked on load.
    pub closed_loop: ModelFile,
}

impl AttackedModelFile {
    pub fn from_model(m: &AttackedModel) -> AttackedModelFile {
        let unsafe_names: Vec<String> = m
            .unsafe_states
            .iter()
            .map(|x| m.model.name(*x).to_string())
            .collect();
        let plant_unsafe: Vec<String> = m.spec.unsafe_plant_states.iter().cloned().collect();
        AttackedModelFile {
            format: ATTACKED_FORMAT.into(),
            version: FORMAT_VERSION,
            provenance: Provenance {
                mode: m.mode,
                vulnerable: m.spec.vulnerable_for(m.mode).clone(),
                tool_version: TOOL_VERSION.into(),
            },
            spec: m.spec.clone(),
            attacked_plant: ModelFile::from_automaton(&m.attacked_plant, &plant_unsafe),
            attacked_supervisor: ModelFile::from_automaton(&m.attacked_supervisor, &[]),
            closed_loop: ModelFile::from_automaton(&m.model, &unsafe_names),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<AttackedModelFile> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    /// Reassembles the model and checks the stored closed loop against it.
    pub fn to_model(&self) -> Result<AttackedModel> {
        if self.format != ATTACKED_FORMAT {
            return Err(Error::Format(format!(
                "unexpected format tag `{}`",
                self.format
            )));
        }
        if self.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported version {}",
                self.version
            )));
        }
        let plant = self.attacked_plant.build(true)?;
        let supervisor = self.attacked_supervisor.build(true)?;
        let m =
            AttackedModel::assemble(self.provenance.mode, self.spec.clone(), supervisor, plant)?;
        if AttackedModelFile::from_model(&m).closed_loop != self.closed_loop {
            return Err(Error::Format(
                "stored closed loop does not match its components".into(),
            ));
        }
        Ok(m)
    }
}

/// Loads either a plain model file or an attacked-model file.
pub enum AnyModel {
    Plain(Automaton, Vec<String>),
    Attacked(Box<AttackedModel>),
}

pub fn parse_any(text: &str) -> Result<AnyModel> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    if value.get("format").is_some() {
        Ok(AnyModel::Attacked(Box::new(
            AttackedModelFile::parse(text)?.to_model()?,
        )))
    } else {
        let (a, unsafe_states) = ModelFile::load(text)?;
        Ok(AnyModel::Plain(a, unsafe_states))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadlockEntry {
    pub state: String,
    pub plant: String,
    pub supervisor: String,
}

/// Machine-readable result of `check`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictDocument {
    pub format: String,
    pub version: u32,
    pub mode: AttackMode,
    pub safe: bool,
    pub verdicts: Vec<Verdict>,
    /// Present when several methods ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agree: Option<bool>,
    pub deadlocks: Vec<DeadlockEntry>,
    pub blocking: bool,
}

impl VerdictDocument {
    pub fn new(model: &AttackedModel, verdicts: Vec<Verdict>) -> VerdictDocument {
        let report = deadlock_report(&model.model);
        let deadlocks = report
            .deadlocks
            .iter()
            .map(|x| DeadlockEntry {
                state: model.model.name(*x).to_string(),
                plant: model.plant_component(*x).to_string(),
                supervisor: model.supervisor_component(*x).to_string(),
            })
            .collect();
        let agree =
            (verdicts.len() > 1).then(|| verdicts.iter().all(|v| v.safe == verdicts[0].safe));
        VerdictDocument {
            format: VERDICT_FORMAT.into(),
            version: FORMAT_VERSION,
            mode: model.mode,
            safe: verdicts.iter().all(|v| v.safe),
            verdicts,
            agree,
            deadlocks,
            blocking: report.blocking,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }
}
