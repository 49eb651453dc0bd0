//! Closed-loop models of a plant and its supervisor under actuator-enablement,
//! sensor-erasure and sensor-insertion attacks.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::automaton::{
    base_event, kind_of_name, Alphabet, ArtifactKind, Automaton, EventAttrs, EventSet, StateId,
    StateSet, Trace,
};
use crate::error::{Error, Result};
use crate::ops::{induced, parallel_compose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackMode {
    Ae,
    Se,
    Si,
}

impl AttackMode {
    pub const ALL: [AttackMode; 3] = [AttackMode::Ae, AttackMode::Se, AttackMode::Si];

    /// Kind of the attack events this mode introduces.
    pub fn artifact_kind(self) -> ArtifactKind {
        match self {
            AttackMode::Ae => ArtifactKind::AeAttacked,
            AttackMode::Se => ArtifactKind::SeErased,
            AttackMode::Si => ArtifactKind::SiOnset,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttackMode::Ae => "ae",
            AttackMode::Se => "se",
            AttackMode::Si => "si",
        }
    }
}

impl fmt::Display for AttackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str().to_uppercase())
    }
}

impl FromStr for AttackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ae" => Ok(AttackMode::Ae),
            "se" => Ok(AttackMode::Se),
            "si" => Ok(AttackMode::Si),
            other => Err(Error::InvalidInput(format!(
                "unknown attack mode `{other}`"
            ))),
        }
    }
}

/// Which actuators and sensors an attacker controls, and which plant states
/// count as damage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VulnerabilitySpec {
    #[serde(default)]
    pub vulnerable_actuators: EventSet,
    #[serde(default)]
    pub vulnerable_sensors: EventSet,
    #[serde(default)]
    pub unsafe_plant_states: BTreeSet<String>,
}

impl VulnerabilitySpec {
    pub fn actuators<'a>(events: impl IntoIterator<Item = &'a str>) -> Self {
        VulnerabilitySpec {
            vulnerable_actuators: events.into_iter().map(String::from).collect(),
            ..Default::default()
        }
    }

    pub fn sensors<'a>(events: impl IntoIterator<Item = &'a str>) -> Self {
        VulnerabilitySpec {
            vulnerable_sensors: events.into_iter().map(String::from).collect(),
            ..Default::default()
        }
    }

    pub fn with_unsafe<'a>(mut self, states: impl IntoIterator<Item = &'a str>) -> Self {
        self.unsafe_plant_states = states.into_iter().map(String::from).collect();
        self
    }

    /// Checks the subset relations against the plant.
    pub fn validate(&self, plant: &Automaton) -> Result<()> {
        let al = plant.alphabet();
        for e in &self.vulnerable_actuators {
            match al.get(e) {
                None => {
                    return Err(Error::Spec(format!(
                        "vulnerable actuator `{e}` is not a plant event"
                    )))
                }
                Some(a) if !a.controllable => {
                    return Err(Error::Spec(format!(
                        "vulnerable actuator `{e}` is not controllable"
                    )))
                }
                Some(a) if a.kind.is_artifact() => {
                    return Err(Error::Spec(format!("`{e}` is an attack artifact")))
                }
                _ => {}
            }
        }
        for e in &self.vulnerable_sensors {
            match al.get(e) {
                None => {
                    return Err(Error::Spec(format!(
                        "vulnerable sensor `{e}` is not a plant event"
                    )))
                }
                Some(a) if !a.observable => {
                    return Err(Error::Spec(format!(
                        "vulnerable sensor `{e}` is not observable"
                    )))
                }
                Some(a) if a.kind.is_artifact() => {
                    return Err(Error::Spec(format!("`{e}` is an attack artifact")))
                }
                _ => {}
            }
        }
        for x in &self.unsafe_plant_states {
            plant.state_id(x)?;
        }
        Ok(())
    }

    /// Vulnerable set relevant to `mode`.
    pub fn vulnerable_for(&self, mode: AttackMode) -> &EventSet {
        match mode {
            AttackMode::Ae => &self.vulnerable_actuators,
            AttackMode::Se | AttackMode::Si => &self.vulnerable_sensors,
        }
    }
}

/// Dilation with the actuator-attack suffix: every vulnerable occurrence
/// branches into the genuine event and its attacked copy.
pub fn dilate<S: AsRef<str>>(trace: &[S], vulnerable: &EventSet) -> BTreeSet<Trace> {
    dilate_as(trace, vulnerable, ArtifactKind::AeAttacked)
}

/// Dilation producing artifacts of the given kind.
pub fn dilate_as<S: AsRef<str>>(
    trace: &[S],
    vulnerable: &EventSet,
    kind: ArtifactKind,
) -> BTreeSet<Trace> {
    let mut out: Vec<Trace> = vec![Vec::new()];
    for e in trace {
        let e = e.as_ref();
        if vulnerable.contains(e) {
            let attacked = kind.derive(e);
            out = out
                .into_iter()
                .flat_map(|t| {
                    let mut plain = t.clone();
                    plain.push(e.to_string());
                    let mut hit = t;
                    hit.push(attacked.clone());
                    [plain, hit]
                })
                .collect();
        } else {
            for t in &mut out {
                t.push(e.to_string());
            }
        }
    }
    out.into_iter().collect()
}

/// Inverse of dilation: maps every dilation artifact back to its base event.
pub fn compress<S: AsRef<str>>(trace: &[S]) -> Result<Trace> {
    trace
        .iter()
        .map(|e| {
            let e = e.as_ref();
            match kind_of_name(e) {
                ArtifactKind::Genuine => Ok(e.to_string()),
                ArtifactKind::AeAttacked | ArtifactKind::SeErased => Ok(base_event(e).to_string()),
                ArtifactKind::SiOnset | ArtifactKind::Renamed => Err(Error::InvalidInput(format!(
                    "`{e}` is not a dilation artifact"
                ))),
            }
        })
        .collect()
}

/// The closed-loop model `H_a || G_a` with its bookkeeping.
#[derive(Debug, Clone)]
pub struct AttackedModel {
    pub mode: AttackMode,
    pub spec: VulnerabilitySpec,
    /// Plant extended with attack transitions.
    pub attacked_plant: Automaton,
    /// Supervisor realization extended with attack and uncontrollable self-loops.
    pub attacked_supervisor: Automaton,
    /// The closed loop.
    pub model: Automaton,
    /// `(supervisor, plant)` components of every closed-loop state.
    pub pairs: Vec<(StateId, StateId)>,
    /// Attack events `E_f`.
    pub attack_events: EventSet,
    /// Closed-loop states whose plant component is unsafe.
    pub unsafe_states: StateSet,
}

impl AttackedModel {
    /// Composes the attacked supervisor and plant and derives the bookkeeping.
    pub fn assemble(
        mode: AttackMode,
        spec: VulnerabilitySpec,
        attacked_supervisor: Automaton,
        attacked_plant: Automaton,
    ) -> Result<Self> {
        let comp = parallel_compose(&attacked_supervisor, &attacked_plant)?;
        let kind = mode.artifact_kind();
        let attack_events = comp.automaton.alphabet().of_kind(kind);
        for e in &attack_events {
            let base = base_event(e);
            if !comp
                .automaton
                .alphabet()
                .get(base)
                .is_some_and(|a| a.vulnerable)
            {
                return Err(Error::Spec(format!(
                    "attack event `{e}` has no vulnerable base event"
                )));
            }
        }
        let unsafe_states = comp
            .pairs
            .iter()
            .enumerate()
            .filter(|(_, (_, g))| spec.unsafe_plant_states.contains(attacked_plant.name(*g)))
            .map(|(i, _)| StateId(i))
            .collect();
        Ok(AttackedModel {
            mode,
            spec,
            attacked_plant,
            attacked_supervisor,
            model: comp.automaton,
            pairs: comp.pairs,
            attack_events,
            unsafe_states,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        self.model.alphabet()
    }

    /// Events hidden from the supervisor and the detector.
    pub fn unobservable(&self) -> EventSet {
        self.alphabet().unobservable()
    }

    pub fn observable(&self) -> EventSet {
        self.alphabet().observable()
    }

    /// Events the supervisor cannot disable (includes attacker moves).
    pub fn uncontrollable(&self) -> EventSet {
        self.alphabet().uncontrollable()
    }

    pub fn is_unsafe(&self, x: StateId) -> bool {
        self.unsafe_states.contains(&x)
    }

    pub fn plant_component(&self, x: StateId) -> &str {
        self.attacked_plant.name(self.pairs[x.0].1)
    }

    pub fn supervisor_component(&self, x: StateId) -> &str {
        self.attacked_supervisor.name(self.pairs[x.0].0)
    }

    pub fn is_attack_event(&self, e: &str) -> bool {
        self.attack_events.contains(e)
    }

    /// Attack self-loops of the attacked supervisor, as `(state, event)`.
    pub fn attack_sites(&self) -> Vec<(StateId, String)> {
        self.attacked_supervisor
            .transitions()
            .filter(|(f, e, t)| f == t && self.attack_events.contains(*e))
            .map(|(f, e, _)| (f, e.to_string()))
            .collect()
    }
}

fn check_supervisor(g: &Automaton, h: &Automaton) -> Result<Alphabet> {
    for (e, _) in h.alphabet().iter() {
        if !g.alphabet().contains(e) {
            return Err(Error::InvalidInput(format!(
                "supervisor event `{e}` is not a plant event"
            )));
        }
    }
    let merged = g.alphabet().merge(h.alphabet())?;
    if let Some(e) = merged
        .iter()
        .find(|(_, a)| a.kind.is_artifact())
        .map(|(e, _)| e)
    {
        return Err(Error::InvalidInput(format!(
            "input event `{e}` carries a reserved suffix"
        )));
    }
    Ok(merged)
}

/// Alphabet of the attacked system: vulnerable events flagged, artifacts added.
fn attacked_alphabet(
    base: &Alphabet,
    vulnerable: &EventSet,
    kind: ArtifactKind,
) -> Result<Alphabet> {
    let mut out = Alphabet::new();
    for (e, a) in base.iter() {
        let mut a = *a;
        a.vulnerable = vulnerable.contains(e);
        out.insert(e, a)?;
    }
    for e in vulnerable {
        let base_attrs = base.get(e).ok_or_else(|| Error::UnknownEvent(e.clone()))?;
        let attrs = match kind {
            ArtifactKind::AeAttacked => EventAttrs {
                observable: base_attrs.observable,
                controllable: false,
                vulnerable: false,
                kind,
            },
            ArtifactKind::SeErased => EventAttrs {
                observable: false,
                controllable: base_attrs.controllable,
                vulnerable: false,
                kind,
            },
            ArtifactKind::SiOnset => EventAttrs {
                observable: false,
                controllable: false,
                vulnerable: false,
                kind,
            },
            _ => unreachable!("not an attack kind"),
        };
        out.insert(kind.derive(e), attrs)?;
    }
    Ok(out)
}

/// Copies every `σ` transition of the plant as a parallel `σ^a`.
fn mirror_plant(
    g: &Automaton,
    alphabet: Alphabet,
    vulnerable: &EventSet,
    kind: ArtifactKind,
) -> Result<Automaton> {
    let mut ga = g.clone().with_alphabet(alphabet);
    let mirrored: Vec<(StateId, String, StateId)> = g
        .transitions()
        .filter(|(_, e, _)| vulnerable.contains(*e))
        .map(|(f, e, t)| (f, kind.derive(e), t))
        .collect();
    for (f, e, t) in mirrored {
        ga.add_transition(f, &e, t)?;
    }
    Ok(ga)
}

/// Adds self-loops for genuine uncontrollable events the supervisor leaves undefined.
fn add_uncontrollable_loops(ha: &mut Automaton, uncontrollable: &EventSet) -> Result<()> {
    let states: Vec<StateId> = ha.states().collect();
    for x in states {
        for e in uncontrollable {
            if ha.target(x, e).is_none() {
                ha.add_transition(x, e, x)?;
            }
        }
    }
    Ok(())
}

/// Closed loop under actuator-enablement attacks on `spec.vulnerable_actuators`.
pub fn build_ae_model(
    g: &Automaton,
    h: &Automaton,
    spec: &VulnerabilitySpec,
) -> Result<AttackedModel> {
    spec.validate(g)?;
    let base = check_supervisor(g, h)?;
    let vulnerable = &spec.vulnerable_actuators;
    let kind = ArtifactKind::AeAttacked;
    let alphabet = attacked_alphabet(&base, vulnerable, kind)?;
    let ga = mirror_plant(g, alphabet.clone(), vulnerable, kind)?;

    let mut ha = h.clone().with_alphabet(alphabet);
    let states: Vec<StateId> = ha.states().collect();
    for &x in &states {
        for e in vulnerable {
            if h.target(x, e).is_none() {
                ha.add_transition(x, &kind.derive(e), x)?;
            }
        }
    }
    let uncontrollable: EventSet = base.uncontrollable();
    add_uncontrollable_loops(&mut ha, &uncontrollable)?;
    AttackedModel::assemble(AttackMode::Ae, spec.clone(), ha, ga)
}

/// Closed loop under sensor-erasure attacks on `spec.vulnerable_sensors`.
pub fn build_se_model(
    g: &Automaton,
    h: &Automaton,
    spec: &VulnerabilitySpec,
) -> Result<AttackedModel> {
    spec.validate(g)?;
    let base = check_supervisor(g, h)?;
    let vulnerable = &spec.vulnerable_sensors;
    let kind = ArtifactKind::SeErased;
    let alphabet = attacked_alphabet(&base, vulnerable, kind)?;
    let ga = mirror_plant(g, alphabet.clone(), vulnerable, kind)?;

    let mut ha = h.clone().with_alphabet(alphabet.clone());
    let states: Vec<StateId> = ha.states().collect();
    for &x in &states {
        for e in vulnerable {
            if h.target(x, e).is_some() {
                ha.add_transition(x, &kind.derive(e), x)?;
            }
        }
    }
    // E_uc together with the erased copies of uncontrollable vulnerable events
    let uncontrollable: EventSet = alphabet
        .iter()
        .filter(|(_, a)| {
            !a.controllable && matches!(a.kind, ArtifactKind::Genuine | ArtifactKind::SeErased)
        })
        .map(|(e, _)| e.to_string())
        .collect();
    add_uncontrollable_loops(&mut ha, &uncontrollable)?;
    AttackedModel::assemble(AttackMode::Se, spec.clone(), ha, ga)
}

/// Name of the fresh plant state used to stage an inserted `σ` at `j`.
pub fn insertion_state_name(state: &str, event: &str) -> String {
    format!("ins({state},{event})")
}

/// Closed loop under sensor-insertion attacks on `spec.vulnerable_sensors`.
///
/// The attacker only inserts an observation the supervisor currently expects;
/// nothing prevents it from inserting several in a row.
pub fn build_si_model(
    g: &Automaton,
    h: &Automaton,
    spec: &VulnerabilitySpec,
) -> Result<AttackedModel> {
    spec.validate(g)?;
    let base = check_supervisor(g, h)?;
    let vulnerable = &spec.vulnerable_sensors;
    let kind = ArtifactKind::SiOnset;
    let alphabet = attacked_alphabet(&base, vulnerable, kind)?;

    let mut ga = g.clone().with_alphabet(alphabet.clone());
    let plant_states: Vec<StateId> = g.states().collect();
    for j in plant_states {
        for e in vulnerable {
            let staged = ga.add_fresh_state(insertion_state_name(g.name(j), e))?;
            ga.add_transition(j, &kind.derive(e), staged)?;
            ga.add_transition(staged, e, j)?;
        }
    }

    let mut ha = h.clone().with_alphabet(alphabet);
    let states: Vec<StateId> = ha.states().collect();
    for &x in &states {
        for e in vulnerable {
            if h.target(x, e).is_some() {
                ha.add_transition(x, &kind.derive(e), x)?;
            }
        }
    }
    add_uncontrollable_loops(&mut ha, &base.uncontrollable())?;
    AttackedModel::assemble(AttackMode::Si, spec.clone(), ha, ga)
}

/// Dispatches on `mode`.
pub fn build_model(
    mode: AttackMode,
    g: &Automaton,
    h: &Automaton,
    spec: &VulnerabilitySpec,
) -> Result<AttackedModel> {
    match mode {
        AttackMode::Ae => build_ae_model(g, h, spec),
        AttackMode::Se => build_se_model(g, h, spec),
        AttackMode::Si => build_si_model(g, h, spec),
    }
}

/// Which attack self-loops a sub-attacker keeps.
#[derive(Debug, Clone)]
pub enum SiteSelection {
    All,
    Keep(BTreeSet<(StateId, String)>),
    /// Each site is kept independently with probability one half.
    Random(u64),
}

/// An attacker that does not attack at every opportunity: the attacked
/// supervisor keeps only the selected attack self-loops.
pub fn sub_attacker(model: &AttackedModel, selection: &SiteSelection) -> Result<AttackedModel> {
    if model.mode != AttackMode::Ae {
        return Err(Error::UnsupportedMode(model.mode.to_string()));
    }
    let sites = model.attack_sites();
    let keep: BTreeSet<(StateId, String)> = match selection {
        SiteSelection::All => sites.into_iter().collect(),
        SiteSelection::Keep(k) => k.clone(),
        SiteSelection::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            sites.into_iter().filter(|_| rng.gen_bool(0.5)).collect()
        }
    };
    let ha = &model.attacked_supervisor;
    let attack = &model.attack_events;
    let sub = induced(
        ha,
        |_| true,
        |f, e, _| !attack.contains(e) || keep.contains(&(f, e.to_string())),
    )
    .expect("initial state is always kept");
    AttackedModel::assemble(
        model.mode,
        model.spec.clone(),
        sub.automaton,
        model.attacked_plant.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn t(s: &[&str]) -> Trace {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn dilation_cases() {
        let b: EventSet = ["b".to_string()].into();
        assert_eq!(dilate::<&str>(&[], &b), BTreeSet::from([t(&[])]));
        assert_eq!(dilate(&["a"], &b), BTreeSet::from([t(&["a"])]));
        let expect = BTreeSet::from([
            t(&["a", "b", "b"]),
            t(&["a", "b#a", "b"]),
            t(&["a", "b", "b#a"]),
            t(&["a", "b#a", "b#a"]),
        ]);
        assert_eq!(dilate(&["a", "b", "b"], &b), expect);
    }

    #[test]
    fn compression_cases() {
        assert!(compress::<&str>(&[]).unwrap().is_empty());
        assert_eq!(compress(&["a", "b#a", "c"]).unwrap(), t(&["a", "b", "c"]));
        assert_eq!(compress(&["a3#e"]).unwrap(), t(&["a3"]));
        assert!(matches!(compress(&["b#i"]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn ae_model_of_example_one() {
        let (g, h, spec) = fixtures::ex1();
        let m = build_ae_model(&g, &h, &spec).unwrap();
        let gm = &m.model;
        assert_eq!(gm.num_states(), 4);
        let path = ["a", "b#a", "c"];
        let names: Vec<&str> = (0..=path.len())
            .map(|k| gm.name(gm.run(&path[..k]).unwrap()))
            .collect();
        assert_eq!(names, ["(1,1)", "(2,2)", "(2,3)", "(2,4)"]);
        assert_eq!(gm.num_transitions(), 3);
        let unsafe_names: Vec<&str> = m.unsafe_states.iter().map(|x| gm.name(*x)).collect();
        assert_eq!(unsafe_names, ["(2,4)"]);
        let ba = m.alphabet().get("b#a").unwrap();
        assert!(ba.observable && !ba.controllable);
        assert!(m.alphabet().get("b").unwrap().vulnerable);
    }

    #[test]
    fn ae_rejects_uncontrollable_vulnerable_event() {
        let (g, h, _) = fixtures::ex1();
        let spec = VulnerabilitySpec::actuators(["c"]);
        assert!(matches!(build_ae_model(&g, &h, &spec), Err(Error::Spec(_))));
    }

    #[test]
    fn se_rejects_unobservable_sensor() {
        let (g, h, _) = fixtures::traffic_plant_and_supervisor();
        let spec = VulnerabilitySpec::sensors(["a2"]);
        assert!(matches!(build_se_model(&g, &h, &spec), Err(Error::Spec(_))));
    }

    #[test]
    fn se_model_of_example_four() {
        let (g, h, spec) = fixtures::ex4();
        let m = build_se_model(&g, &h, &spec).unwrap();
        let x = m.model.run(&["a", "b#e", "c"]).unwrap();
        assert_eq!(m.plant_component(x), "5");
        assert!(m.is_unsafe(x));
        let be = m.alphabet().get("b#e").unwrap();
        assert!(!be.observable && !be.controllable);
    }

    #[test]
    fn si_model_of_example_six() {
        let (g, h, spec) = fixtures::ex6();
        let m = build_si_model(&g, &h, &spec).unwrap();
        let x = m.model.run(&["a", "b#i", "b", "c"]).unwrap();
        assert_eq!(m.plant_component(x), "5");
        assert!(m.is_unsafe(x));
        let mid = m.model.run(&["a", "b#i"]).unwrap();
        assert_eq!(m.plant_component(mid), "ins(2,b)");
        let bi = m.alphabet().get("b#i").unwrap();
        assert!(!bi.observable && !bi.controllable);
    }

    #[test]
    fn empty_vulnerable_set_adds_no_attack_events() {
        let (g, h, _) = fixtures::ex1();
        for mode in AttackMode::ALL {
            let m = build_model(
                mode,
                &g,
                &h,
                &VulnerabilitySpec::default().with_unsafe(["4"]),
            )
            .unwrap();
            assert!(m.attack_events.is_empty());
            assert!(m
                .model
                .transitions()
                .all(|(_, e, _)| kind_of_name(e) == ArtifactKind::Genuine));
        }
    }

    #[test]
    fn sub_attacker_extremes() {
        let (g, h, spec) = fixtures::ex1();
        let m = build_ae_model(&g, &h, &spec).unwrap();
        let all = sub_attacker(&m, &SiteSelection::All).unwrap();
        assert_eq!(all.model, m.model);
        let none = sub_attacker(&m, &SiteSelection::Keep(BTreeSet::new())).unwrap();
        assert!(none
            .model
            .transitions()
            .all(|(_, e, _)| !m.attack_events.contains(e)));

        let se =
            build_se_model(&fixtures::ex4().0, &fixtures::ex4().1, &fixtures::ex4().2).unwrap();
        assert!(matches!(
            sub_attacker(&se, &SiteSelection::All),
            Err(Error::UnsupportedMode(_))
        ));
    }
}
