use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use scguard_core::fixtures;
use scguard_core::io::{AttackedModelFile, ModelFile};
use scguard_core::language::traces_up_to;
use scguard_core::ops::{parallel_compose, reachable};
use scguard_core::{build_model, AttackMode};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn data(name: &str) -> String {
    root().join("data").join(name).display().to_string()
}

fn scguard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scguard"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

/// Runs `build` into a temporary file and returns its path.
fn built(dir: &TempDir, name: &str, mode: &str, vulnerable: &str) -> String {
    let out = dir
        .path()
        .join(format!("{name}-{mode}.json"))
        .display()
        .to_string();
    let r = scguard(&[
        "build",
        &data(&format!("{name}_plant.json")),
        &data(&format!("{name}_supervisor.json")),
        "--mode",
        mode,
        "--vulnerable",
        vulnerable,
        "--out",
        &out,
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    out
}

fn validate_verdict(doc: &Value) {
    let schema: Value = serde_json::from_str(
        &std::fs::read_to_string(root().join("schema/verdict.schema.json")).unwrap(),
    )
    .unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn data_files_match_library_fixtures() {
    let load = |n: &str| ModelFile::load(&std::fs::read_to_string(data(n)).unwrap()).unwrap();
    let (g, h, spec) = fixtures::ex1();
    assert_eq!(load("ex1_plant.json").0, g);
    assert_eq!(
        load("ex1_plant.json").1,
        spec.unsafe_plant_states.into_iter().collect::<Vec<_>>()
    );
    assert_eq!(load("ex1_supervisor.json").0, h);
    let (g, h, _) = fixtures::ex6();
    assert_eq!(load("ex6_plant.json").0, g);
    assert_eq!(load("ex6_supervisor.json").0, h);
    assert_eq!(load("traffic_plant.json").0, fixtures::traffic_plant());
    assert_eq!(load("traffic_plant.json").1, fixtures::traffic_collisions());
    assert_eq!(load("traffic_spec.json").0, fixtures::traffic_spec());
    assert_eq!(
        load("traffic_supervisor.json").0,
        fixtures::traffic_supervisor()
    );
}

#[test]
fn build_matches_library_construction() {
    let dir = TempDir::new().unwrap();
    let path = built(&dir, "ex1", "ae", "b");
    let m = AttackedModelFile::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(m.provenance.mode, AttackMode::Ae);
    assert_eq!(m.provenance.vulnerable.iter().collect::<Vec<_>>(), ["b"]);
    let (g, h, spec) = fixtures::ex1();
    let lib = build_model(AttackMode::Ae, &g, &h, &spec).unwrap();
    let m = m.to_model().unwrap();
    assert_eq!(m.model.num_states(), 4);
    assert_eq!(m.model, lib.model);
    assert_eq!(m.unsafe_states, lib.unsafe_states);

    let path = built(&dir, "traffic", "se", "a3,b3");
    let m = AttackedModelFile::parse(&std::fs::read_to_string(&path).unwrap())
        .unwrap()
        .to_model()
        .unwrap();
    let (g, h, _) = fixtures::traffic_plant_and_supervisor();
    let lib = build_model(AttackMode::Se, &g, &h, &fixtures::traffic_se_spec()).unwrap();
    assert_eq!(m.model.num_states(), lib.model.num_states());
    assert_eq!(m.model, lib.model);
}

#[test]
fn build_rejects_bad_input() {
    let r = scguard(&[
        "build",
        &data("ex1_plant.json"),
        &data("ex1_supervisor.json"),
        "--mode",
        "ae",
        "--vulnerable",
        "",
    ]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("vulnerable set empty"));

    let r = scguard(&[
        "build",
        &data("ex1_plant.json"),
        &data("ex1_supervisor.json"),
        "--mode",
        "ae",
        "--vulnerable",
        "a",
    ]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("not controllable"), "{}", stderr(&r));

    let dir = TempDir::new().unwrap();
    let mut f = ModelFile::from_automaton(&fixtures::ex1().0, &[]);
    f.transitions[1].from = "7".into();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, f.to_json()).unwrap();
    let r = scguard(&[
        "build",
        bad.to_str().unwrap(),
        &data("ex1_supervisor.json"),
        "--mode",
        "ae",
        "--vulnerable",
        "b",
    ]);
    assert_eq!(code(&r), 2);
    let err = stderr(&r);
    assert!(
        err.contains("line ") && err.contains("transitions[1]") && err.contains("`7`"),
        "{err}"
    );

    let mut f = ModelFile::from_automaton(&fixtures::ex1().0, &[]);
    f.events[0].name = "a#r".into();
    std::fs::write(&bad, f.to_json()).unwrap();
    let r = scguard(&[
        "build",
        bad.to_str().unwrap(),
        &data("ex1_supervisor.json"),
        "--mode",
        "ae",
        "--vulnerable",
        "b",
    ]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("reserved suffix"));
}

#[test]
fn check_example_one_is_unsafe() {
    let dir = TempDir::new().unwrap();
    let path = built(&dir, "ex1", "ae", "b");
    let r = scguard(&["check", &path]);
    assert_eq!(code(&r), 1, "{}", stderr(&r));
    let doc: Value = serde_json::from_str(&stdout(&r)).unwrap();
    validate_verdict(&doc);
    assert_eq!(doc["agree"], true);
    assert_eq!(
        doc["verdicts"][0]["violated_condition"],
        "uncontrollable-unsafe"
    );
    assert_eq!(
        doc["verdicts"][0]["x_uc"],
        serde_json::json!(["(2,3)", "(2,4)"])
    );

    for method in ["diagnoser", "verifier", "oracle"] {
        let r = scguard(&["check", &path, "--method", method]);
        assert_eq!(code(&r), 1);
        let doc: Value = serde_json::from_str(&stdout(&r)).unwrap();
        validate_verdict(&doc);
        assert_eq!(doc["verdicts"].as_array().unwrap().len(), 1);
        assert!(doc.get("agree").is_none());
    }
}

#[test]
fn check_traffic_sensor_erasure_is_safe_with_deadlocks() {
    let dir = TempDir::new().unwrap();
    let path = built(&dir, "traffic", "se", "a3,b3");
    let out = dir.path().join("verdict.json");
    let r = scguard(&["check", &path, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(stdout(&r).is_empty());
    let warning = stderr(&r);
    assert!(warning.contains("following 4 states"), "{warning}");
    for plant in ["(0,3)", "(3,0)", "(5,3)", "(3,5)"] {
        assert!(warning.contains(&format!("plant {plant}")), "{warning}");
    }
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    validate_verdict(&doc);
    assert_eq!(doc["safe"], true);
    assert_eq!(doc["deadlocks"].as_array().unwrap().len(), 4);
}

#[test]
fn check_rejects_corrupt_and_plain_files() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"format\": \"scguard-attacked-model\", ").unwrap();
    assert_eq!(code(&scguard(&["check", bad.to_str().unwrap()])), 2);
    let r = scguard(&["check", &data("ex1_plant.json")]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("expected an attacked model"));
    assert_eq!(code(&scguard(&["check", "/nonexistent/model.json"])), 2);
}

#[test]
fn schema_rejects_malformed_verdicts() {
    let schema: Value = serde_json::from_str(
        &std::fs::read_to_string(root().join("schema/verdict.schema.json")).unwrap(),
    )
    .unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let base = serde_json::json!({
        "format": "scguard-verdict", "version": 1, "mode": "ae", "safe": false,
        "verdicts": [{"safe": false, "method": "oracle", "violated_condition": "uncertain-unsafe"}],
        "deadlocks": [], "blocking": false
    });
    assert!(validator.is_valid(&base));
    let mut missing = base.clone();
    missing["verdicts"][0]
        .as_object_mut()
        .unwrap()
        .remove("violated_condition");
    assert!(!validator.is_valid(&missing));
    let mut wrong = base.clone();
    wrong["verdicts"][0]["method"] = "guess".into();
    assert!(!validator.is_valid(&wrong));
}

#[test]
fn export_renders_dot() {
    let r = scguard(&["export", &data("ex1_plant.json"), "--format", "dot"]);
    assert_eq!(code(&r), 0);
    let dot = stdout(&r);
    assert!(dot.starts_with("digraph"));
    let nodes = dot
        .lines()
        .filter(|l| l.trim_start().starts_with('s') && l.contains("shape="))
        .count();
    assert_eq!(nodes, 4);
    let edges = dot
        .lines()
        .filter(|l| l.contains(" -> s") && !l.contains("__start"))
        .count();
    assert_eq!(edges, 3);
    assert!(dot.contains("label=\"4\", shape=box"));
    assert!(!dot.contains("doublecircle"));
    assert_eq!(dot, stdout(&scguard(&["export", &data("ex1_plant.json")])));

    let dir = TempDir::new().unwrap();
    let path = built(&dir, "traffic", "si", "a4,b4");
    let dot = stdout(&scguard(&["export", &path]));
    assert!(dot.contains("label=\"b4#i\", style=dashed"));
    assert!(dot.contains("doublecircle"));
}

fn log(args: &[&str]) -> Vec<Value> {
    let r = scguard(args);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    stdout(&r)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn simulate_example_one() {
    let dir = TempDir::new().unwrap();
    let path = built(&dir, "ex1", "ae", "b");
    let records = log(&["simulate", &path, "--policy", "all-out"]);
    let last = records.last().unwrap();
    assert_eq!(last["plant"], "4");
    assert_eq!(last["safe_mode"], true);
    let attack = records.iter().position(|r| r["event"] == "b#a").unwrap();
    assert!(records[attack..].iter().all(|r| r["safe_mode"] == true));

    let records = log(&["simulate", &path, "--max-steps", "0"]);
    assert_eq!(records.len(), 1);
    assert_eq!(records[0]["step"], 0);
    assert!(records[0]["event"].is_null());

    let records = log(&["simulate", &path, "--policy", "random:0.0", "--seed", "7"]);
    assert!(records
        .iter()
        .all(|r| !r["event"].as_str().unwrap_or("").contains('#')));
    assert_eq!(records.last().unwrap()["plant"], "2");

    let script = dir.path().join("script.txt");
    std::fs::write(&script, "# hold off\nskip\n").unwrap();
    let records = log(&["simulate", &path, "--policy", script.to_str().unwrap()]);
    assert!(records.iter().all(|r| r["event"] != "b#a"));

    let r = scguard(&["simulate", &path, "--policy", "sometimes"]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("unknown policy"));
    assert_eq!(
        code(&scguard(&["simulate", &path, "--policy", "random:1.5"])),
        2
    );
}

#[test]
fn synthesize_traffic_supervisor() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sup.json");
    let r = scguard(&[
        "synthesize",
        &data("traffic_plant.json"),
        &data("traffic_spec.json"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let (h, _) = ModelFile::load(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(h, fixtures::traffic_supervisor());
    let g = fixtures::traffic_plant();
    let closed = parallel_compose(&h, &g).unwrap();
    for x in reachable(&closed.automaton) {
        let plant = g.name(closed.right(x));
        assert!(
            !fixtures::traffic_collisions().iter().any(|c| c == plant),
            "reaches {plant}"
        );
    }
}

#[test]
fn synthesize_plant_as_spec_gives_plant_language() {
    let r = scguard(&[
        "synthesize",
        &data("traffic_plant.json"),
        &data("traffic_plant.json"),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let (h, _) = ModelFile::load(&stdout(&r)).unwrap();
    let g = fixtures::traffic_plant();
    let closed = parallel_compose(&h, &g).unwrap().automaton;
    assert_eq!(traces_up_to(&closed, 6), traces_up_to(&g, 6));
}

#[test]
fn synthesize_refuses_unobservable_spec() {
    let r = scguard(&[
        "synthesize",
        &data("unobservable_plant.json"),
        &data("unobservable_spec.json"),
    ]);
    assert_eq!(code(&r), 1);
    assert!(stdout(&r).is_empty());
    let err = stderr(&r);
    let witness: Value = serde_json::from_str(&err[err.find('{').unwrap()..]).unwrap();
    assert_eq!(witness["event"], "c");
    assert_eq!(witness["disabled_after"], serde_json::json!(["u"]));
    assert_eq!(witness["enabled_after"], serde_json::json!([]));
}
