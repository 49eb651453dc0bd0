//! Python bindings for the scguard toolkit.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use scguard_core::dot::to_dot;
use scguard_core::io::{AttackedModelFile, ModelFile, VerdictDocument};
use scguard_core::runtime::{AttackerPolicy, Simulator};
use scguard_core::safety::{self, Method};
use scguard_core::synthesis::{check_observability, realize_supervisor, supremal_controllable};
use scguard_core::{fixtures, AttackMode, StateSet, VulnerabilitySpec};

create_exception!(scguard, ScguardError, PyException);

fn err(e: scguard_core::Error) -> PyErr {
    ScguardError::new_err(e.to_string())
}

/// Converts through JSON so that Python sees plain dicts and lists.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_mode(mode: &str) -> PyResult<AttackMode> {
    mode.parse()
        .map_err(|e: scguard_core::Error| PyValueError::new_err(e.to_string()))
}

/// A plant, supervisor or specification with its unsafe states.
#[pyclass(module = "scguard", frozen)]
struct Automaton {
    inner: scguard_core::Automaton,
    unsafe_states: Vec<String>,
}

#[pymethods]
impl Automaton {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let (inner, unsafe_states) = ModelFile::load(text).map_err(err)?;
        Ok(Automaton {
            inner,
            unsafe_states,
        })
    }

    fn to_json(&self) -> String {
        ModelFile::from_automaton(&self.inner, &self.unsafe_states).to_json()
    }

    fn to_dot(&self) -> String {
        let set: StateSet = self
            .unsafe_states
            .iter()
            .filter_map(|s| self.inner.find_state(s))
            .collect();
        to_dot(&self.inner, &set)
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    #[getter]
    fn num_transitions(&self) -> usize {
        self.inner.num_transitions()
    }

    #[getter]
    fn states(&self) -> Vec<String> {
        self.inner
            .states()
            .map(|x| self.inner.name(x).to_string())
            .collect()
    }

    #[getter]
    fn events(&self) -> Vec<String> {
        self.inner.events().into_iter().collect()
    }

    #[getter]
    fn unsafe_states(&self) -> Vec<String> {
        self.unsafe_states.clone()
    }

    fn accepts(&self, trace: Vec<String>) -> bool {
        self.inner.accepts(&trace)
    }

    fn __repr__(&self) -> String {
        format!(
            "Automaton(states={}, transitions={})",
            self.inner.num_states(),
            self.inner.num_transitions()
        )
    }
}

/// Closed loop of a plant and supervisor under one attack mode.
#[pyclass(module = "scguard", frozen)]
struct AttackedModel {
    inner: scguard_core::AttackedModel,
}

#[pymethods]
impl AttackedModel {
    #[staticmethod]
    fn build(
        plant: &Automaton,
        supervisor: &Automaton,
        mode: &str,
        vulnerable: Vec<String>,
    ) -> PyResult<Self> {
        let mode = parse_mode(mode)?;
        if vulnerable.is_empty() {
            return Err(PyValueError::new_err("vulnerable set empty"));
        }
        let names = vulnerable.iter().map(String::as_str);
        let spec = match mode {
            AttackMode::Ae => VulnerabilitySpec::actuators(names),
            AttackMode::Se | AttackMode::Si => VulnerabilitySpec::sensors(names),
        }
        .with_unsafe(plant.unsafe_states.iter().map(String::as_str));
        let inner =
            scguard_core::build_model(mode, &plant.inner, &supervisor.inner, &spec).map_err(err)?;
        Ok(AttackedModel { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = AttackedModelFile::parse(text)
            .and_then(|f| f.to_model())
            .map_err(err)?;
        Ok(AttackedModel { inner })
    }

    fn to_json(&self) -> String {
        AttackedModelFile::from_model(&self.inner).to_json()
    }

    fn to_dot(&self) -> String {
        to_dot(&self.inner.model, &self.inner.unsafe_states)
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode.as_str()
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.model.num_states()
    }

    #[getter]
    fn num_transitions(&self) -> usize {
        self.inner.model.num_transitions()
    }

    #[getter]
    fn attack_events(&self) -> Vec<String> {
        self.inner.attack_events.iter().cloned().collect()
    }

    #[getter]
    fn unsafe_states(&self) -> Vec<String> {
        self.inner
            .unsafe_states
            .iter()
            .map(|x| self.inner.model.name(*x).to_string())
            .collect()
    }

    fn accepts(&self, trace: Vec<String>) -> bool {
        self.inner.model.accepts(&trace)
    }

    /// Verdict document for one method (`diagnoser`, `verifier`, `oracle`) or `all`.
    #[pyo3(signature = (method = "all"))]
    fn check<'py>(&self, py: Python<'py>, method: &str) -> PyResult<Bound<'py, PyAny>> {
        let methods = if method == "all" {
            Method::ALL.to_vec()
        } else {
            vec![method
                .parse()
                .map_err(|e: scguard_core::Error| PyValueError::new_err(e.to_string()))?]
        };
        let model = &self.inner;
        let verdicts = py
            .detach(|| {
                methods
                    .iter()
                    .map(|m| safety::check(model, *m))
                    .collect::<Result<Vec<_>, _>>()
            })
            .map_err(err)?;
        to_py(py, &VerdictDocument::new(model, verdicts))
    }

    fn is_safe(&self, py: Python<'_>) -> PyResult<bool> {
        let model = &self.inner;
        let v = py
            .detach(|| safety::check_gf_safe_diagnoser(model))
            .map_err(err)?;
        Ok(v.safe)
    }

    /// Attack-free run with the same observation as `trace`, if one exists.
    fn normal_twin(&self, trace: Vec<String>) -> Option<Vec<String>> {
        safety::normal_twin(&self.inner, &trace)
    }

    /// Execution log under the online defense, one dict per step.
    #[pyo3(signature = (policy = "all-out", seed = 0, max_steps = 100))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        policy: &str,
        seed: u64,
        max_steps: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let policy = if policy == "all-out" {
            AttackerPolicy::AllOut
        } else if let Some(p) = policy.strip_prefix("random:") {
            let p: f64 = p
                .parse()
                .map_err(|_| PyValueError::new_err(format!("bad probability `{p}`")))?;
            AttackerPolicy::random(p).map_err(|e| PyValueError::new_err(e.to_string()))?
        } else {
            AttackerPolicy::parse_script(policy)
                .map_err(|e| PyValueError::new_err(e.to_string()))?
        };
        let sim = Simulator::new(self.inner.clone(), policy).map_err(err)?;
        let log = sim.simulate(seed, max_steps).map_err(err)?;
        to_py(py, &log)
    }

    fn __repr__(&self) -> String {
        format!(
            "AttackedModel(mode={}, states={}, transitions={})",
            self.inner.mode.as_str(),
            self.inner.model.num_states(),
            self.inner.model.num_transitions()
        )
    }
}

/// Supervisor realizing the supremal controllable sublanguage of `spec`.
///
/// Raises `ScguardError` when that sublanguage is empty or not observable.
#[pyfunction]
fn synthesize(plant: &Automaton, spec: &Automaton) -> PyResult<Automaton> {
    let g = &plant.inner;
    let al = g.alphabet();
    let sup = supremal_controllable(g, &spec.inner, &al.uncontrollable())
        .map_err(err)?
        .ok_or_else(|| ScguardError::new_err("the supremal controllable sublanguage is empty"))?;
    let report = check_observability(g, &sup, &al.observable(), &al.controllable()).map_err(err)?;
    if let Some(w) = report.witness {
        return Err(ScguardError::new_err(format!(
            "not observable: `{}` must be disabled after [{}] but enabled after [{}]",
            w.event,
            w.disabled_after.join(" "),
            w.enabled_after.join(" ")
        )));
    }
    let inner = realize_supervisor(g, &sup, &al.observable()).map_err(err)?;
    Ok(Automaton {
        inner,
        unsafe_states: Vec::new(),
    })
}

/// Built-in worked systems: `(plant, supervisor, mode, vulnerable)`.
#[pyfunction]
fn fixture(name: &str) -> PyResult<(Automaton, Automaton, &'static str, Vec<String>)> {
    let (g, h, spec, mode) = match name {
        "ex1" => {
            let (g, h, s) = fixtures::ex1();
            (g, h, s, AttackMode::Ae)
        }
        "ex4" => {
            let (g, h, s) = fixtures::ex4();
            (g, h, s, AttackMode::Se)
        }
        "ex6" => {
            let (g, h, s) = fixtures::ex6();
            (g, h, s, AttackMode::Si)
        }
        "traffic-ae" | "traffic-se" | "traffic-si" => {
            let (g, h, _) = fixtures::traffic_plant_and_supervisor();
            let (spec, mode) = match name {
                "traffic-ae" => (fixtures::traffic_ae_spec(), AttackMode::Ae),
                "traffic-se" => (fixtures::traffic_se_spec(), AttackMode::Se),
                _ => (fixtures::traffic_si_spec(), AttackMode::Si),
            };
            (g, h, spec, mode)
        }
        other => return Err(PyValueError::new_err(format!("unknown fixture `{other}`"))),
    };
    let plant = Automaton {
        inner: g,
        unsafe_states: spec.unsafe_plant_states.iter().cloned().collect(),
    };
    let supervisor = Automaton {
        inner: h,
        unsafe_states: Vec::new(),
    };
    let vulnerable = spec.vulnerable_for(mode).iter().cloned().collect();
    Ok((plant, supervisor, mode.as_str(), vulnerable))
}

#[pymodule]
fn scguard(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ScguardError", m.py().get_type::<ScguardError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Automaton>()?;
    m.add_class::<AttackedModel>()?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(fixture, m)?)?;
    Ok(())
}
